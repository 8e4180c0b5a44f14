use std::path::Path;

use dephaskit::dynamics::EvolutionParams;
use dephaskit::spectra::{self, FitReport, Spectrum, PRESET_IDS};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// One spectrum to evaluate, labelled by its preset id or file stem.
#[derive(Debug, Clone, Serialize)]
pub struct Run {
    pub label: String,
    pub spectrum: Spectrum,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitReport>,
}

pub fn evolution_params(cfg: &RunConfig) -> CliResult<EvolutionParams> {
    Ok(EvolutionParams::new(cfg.delta_n, cfg.lambda0_nm, 0.0)?)
}

/// Explicit presets, then the spectrum file; all presets when neither is given.
pub fn collect_runs(cfg: &RunConfig) -> CliResult<Vec<Run>> {
    let mut runs = Vec::new();
    let presets: Vec<String> = if cfg.presets.is_empty() && cfg.spectrum.is_none() {
        PRESET_IDS.iter().map(|s| s.to_string()).collect()
    } else {
        cfg.presets.clone()
    };
    for id in presets {
        runs.push(Run {
            spectrum: spectra::table1_preset(&id)?,
            label: id,
            fit: None,
        });
    }
    if let Some(path) = &cfg.spectrum {
        runs.push(load_spectrum_input(path, cfg.components)?);
    }
    if let Some(sigma) = cfg.sigma {
        for run in &mut runs {
            run.spectrum = run.spectrum.with_sigma(sigma)?;
        }
    }
    Ok(runs)
}

/// JSON (a `fit` report or a bare spectrum) is used as is; anything else is
/// read as sample CSV and fitted.
pub fn load_spectrum_input(path: &Path, components: usize) -> CliResult<Run> {
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "spectrum".into());
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let inner = [
            &["results", "report", "spectrum"][..],
            &["report", "spectrum"][..],
            &["spectrum"][..],
        ]
        .iter()
        .find_map(|keys| keys.iter().try_fold(&value, |v, k| v.get(*k)))
        .cloned()
        .unwrap_or_else(|| value.clone());
        let spectrum: Spectrum = serde_json::from_value(inner)
            .map_err(|e| CliError::Usage(format!("{}: not a spectrum: {e}", path.display())))?;
        let spectrum = Spectrum::new(spectrum.components().to_vec())?;
        return Ok(Run {
            label,
            spectrum,
            fit: None,
        });
    }
    let sample = spectra::load_spectrum_file(path).map_err(|e| match e {
        dephaskit::Error::Io(source) => CliError::io(path, source),
        other => CliError::Core(other),
    })?;
    let fit = spectra::fit_mixture(&sample, components)?;
    Ok(Run {
        label,
        spectrum: fit.spectrum.clone(),
        fit: Some(fit),
    })
}
