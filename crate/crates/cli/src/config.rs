use std::path::{Path, PathBuf};
use std::str::FromStr;

use dephaskit::dynamics::{DEFAULT_DELTA_N, DEFAULT_LAMBDA0_NM};
use dephaskit::quantumness::ClassicalSetFormulation;
use dephaskit::spectra::PRESET_IDS;
use serde::Serialize;

use crate::args::Overrides;
use crate::error::{CliError, CliResult};

pub const OUT_DIR_ENV: &str = "DEPHASKIT_OUT";
pub const DEFAULT_OUT_DIR: &str = "out";
pub const FORMULATIONS: [&str; 1] = ["measure_prepare_ppt"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub delta_n: f64,
    pub lambda0_nm: f64,
    pub s_max: f64,
    pub step: f64,
    pub t1_fraction: f64,
    pub resolution: f64,
    pub formulation: String,
    pub presets: Vec<String>,
    pub spectrum: Option<PathBuf>,
    pub components: usize,
    pub center_nm: f64,
    pub sigma_max: f64,
    pub sigma_step: f64,
    pub sigma: Option<f64>,
    #[serde(skip)]
    pub out_dir: PathBuf,
    #[serde(skip)]
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            delta_n: DEFAULT_DELTA_N,
            lambda0_nm: DEFAULT_LAMBDA0_NM,
            s_max: 160.0,
            step: 0.1,
            t1_fraction: 0.5,
            resolution: 0.01,
            formulation: FORMULATIONS[0].to_string(),
            presets: Vec::new(),
            spectrum: None,
            components: 2,
            center_nm: 702.672,
            sigma_max: 0.25,
            sigma_step: 0.001,
            sigma: None,
            out_dir: PathBuf::from(DEFAULT_OUT_DIR),
            jobs: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str, origin: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("{origin}: invalid value {value:?} for {key}")))
}

fn split_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl RunConfig {
    /// Defaults, then `DEPHASKIT_OUT`, then the config file, then flags.
    pub fn resolve(overrides: &Overrides, env_out: Option<PathBuf>) -> CliResult<Self> {
        let mut cfg = Self::default();
        if let Some(dir) = env_out {
            cfg.out_dir = dir;
        }
        if let Some(path) = &overrides.config {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            cfg.apply_file(&text, path)?;
        }
        cfg.apply_overrides(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, text: &str, path: &Path) -> CliResult<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = format!("{}:{}", path.display(), idx + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{origin}: expected `key = value`")))?;
            self.set(key.trim(), value.trim(), &origin)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str, origin: &str) -> CliResult<()> {
        match key.replace('-', "_").as_str() {
            "delta_n" => self.delta_n = parse(key, value, origin)?,
            "lambda0" | "lambda0_nm" => self.lambda0_nm = parse(key, value, origin)?,
            "s_max" => self.s_max = parse(key, value, origin)?,
            "step" => self.step = parse(key, value, origin)?,
            "t1_fraction" => self.t1_fraction = parse(key, value, origin)?,
            "resolution" => self.resolution = parse(key, value, origin)?,
            "formulation" => self.formulation = value.to_string(),
            "preset" | "presets" => self.presets = split_list(value),
            "spectrum" => self.spectrum = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "jobs" => self.jobs = Some(parse(key, value, origin)?),
            "components" => self.components = parse(key, value, origin)?,
            "center" | "center_nm" => self.center_nm = parse(key, value, origin)?,
            "sigma_max" => self.sigma_max = parse(key, value, origin)?,
            "sigma_step" => self.sigma_step = parse(key, value, origin)?,
            "sigma" => self.sigma = Some(parse(key, value, origin)?),
            _ => return Err(CliError::Usage(format!("{origin}: unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        macro_rules! take {
            ($field:ident <- $flag:ident) => {
                if let Some(v) = o.$flag.clone() {
                    self.$field = v;
                }
            };
        }
        take!(delta_n <- delta_n);
        take!(lambda0_nm <- lambda0);
        take!(s_max <- s_max);
        take!(step <- step);
        take!(t1_fraction <- t1_fraction);
        take!(resolution <- resolution);
        take!(formulation <- formulation);
        take!(out_dir <- out_dir);
        take!(components <- components);
        take!(center_nm <- center);
        take!(sigma_max <- sigma_max);
        take!(sigma_step <- sigma_step);
        if !o.preset.is_empty() {
            self.presets = o.preset.iter().flat_map(|p| split_list(p)).collect();
        }
        if o.spectrum.is_some() {
            self.spectrum = o.spectrum.clone();
        }
        if o.jobs.is_some() {
            self.jobs = o.jobs;
        }
        if o.sigma.is_some() {
            self.sigma = o.sigma;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let fail = |msg: String| Err(CliError::Usage(msg));
        if !(self.delta_n > 0.0 && self.delta_n < 1.0) {
            return fail(format!("delta_n {} must lie in (0, 1)", self.delta_n));
        }
        if !(self.lambda0_nm > 0.0 && self.lambda0_nm.is_finite()) {
            return fail(format!("lambda0 {} must be positive", self.lambda0_nm));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return fail(format!("step {} must be positive", self.step));
        }
        if !(self.s_max >= self.step && self.s_max.is_finite()) {
            return fail(format!(
                "s_max {} must be at least step {}",
                self.s_max, self.step
            ));
        }
        if !(self.t1_fraction > 0.0 && self.t1_fraction < 1.0) {
            return fail(format!(
                "t1_fraction {} must lie in (0, 1)",
                self.t1_fraction
            ));
        }
        if !(0.0..1.0).contains(&self.resolution) {
            return fail(format!("resolution {} must lie in [0, 1)", self.resolution));
        }
        if !(1..=2).contains(&self.components) {
            return fail(format!("components {} must be 1 or 2", self.components));
        }
        if !(self.center_nm > 0.0 && self.center_nm.is_finite()) {
            return fail(format!("center {} must be positive", self.center_nm));
        }
        if !(self.sigma_step > 0.0
            && self.sigma_max >= self.sigma_step
            && self.sigma_max.is_finite())
        {
            return fail(format!(
                "sigma grid needs sigma_step > 0 and sigma_max >= sigma_step (got {} and {})",
                self.sigma_step, self.sigma_max
            ));
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return fail(format!("sigma {s} must be nonnegative"));
            }
        }
        if self.jobs == Some(0) {
            return fail("jobs must be at least 1".into());
        }
        self.classical_set()?;
        for p in &self.presets {
            if dephaskit::spectra::table1_preset(p).is_err() {
                return fail(format!(
                    "unknown preset {p:?}; valid presets: {}",
                    PRESET_IDS.join(", ")
                ));
            }
        }
        Ok(())
    }

    pub fn classical_set(&self) -> CliResult<ClassicalSetFormulation> {
        let key = self
            .formulation
            .trim()
            .to_ascii_lowercase()
            .replace('-', "_");
        match key.as_str() {
            "measure_prepare_ppt" => Ok(ClassicalSetFormulation::MeasurePreparePpt),
            _ => Err(CliError::Usage(format!(
                "unknown formulation {:?}; valid: {}",
                self.formulation,
                FORMULATIONS.join(", ")
            ))),
        }
    }
}
