use std::path::PathBuf;

use dephaskit::spectra::{self, FitReport};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, write_json};
use crate::summary::Summary;

/// Residual RMS above this fraction of the peak intensity triggers a warning.
pub const RESIDUAL_WARNING: f64 = 0.02;

#[derive(Debug, Clone, Serialize)]
pub struct FitOutput {
    pub input: PathBuf,
    pub components: usize,
    pub report: FitReport,
    pub relative_residual: f64,
    pub warnings: Vec<String>,
}

pub fn fit(cfg: &RunConfig) -> CliResult<FitOutput> {
    let path = cfg
        .spectrum
        .clone()
        .ok_or_else(|| CliError::Usage("fit needs --spectrum <file.csv>".into()))?;
    let sample = spectra::load_spectrum_file(&path).map_err(|e| match e {
        dephaskit::Error::Io(source) => CliError::io(&path, source),
        other => CliError::Core(other),
    })?;
    let report = spectra::fit_mixture(&sample, cfg.components)?;
    let peak = sample.intensities().into_iter().fold(0.0, f64::max);
    let relative_residual = if peak > 0.0 {
        report.residual_rms / peak
    } else {
        f64::INFINITY
    };
    let mut warnings = Vec::new();
    if relative_residual > RESIDUAL_WARNING {
        warnings.push(format!(
            "large residual: rms {:.3e} is {:.1}% of the peak intensity; the {}-component model may not describe this spectrum",
            report.residual_rms,
            100.0 * relative_residual,
            cfg.components
        ));
    }
    if !report.converged {
        warnings.push(format!(
            "fit did not converge after {} iterations",
            report.iterations
        ));
    }
    if report.dropped_components > 0 {
        warnings.push(format!(
            "{} component(s) collapsed to zero weight",
            report.dropped_components
        ));
    }
    Ok(FitOutput {
        input: path,
        components: cfg.components,
        report,
        relative_residual,
        warnings,
    })
}

pub fn run(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let output = fit(cfg)?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    ensure_dir(&cfg.out_dir)?;
    let json = write_json(&cfg.out_dir, "fit.json", &Summary::new("fit", cfg, &output))?;
    Ok(vec![json])
}
