use std::path::PathBuf;

use dephaskit::criteria::{hcl_n, DynamicsFamily, Quantumness};
use dephaskit::dynamics::uniform_grid;
use dephaskit::spectra::Spectrum;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, write_json, write_text, Table};
use crate::runs::evolution_params;
use crate::summary::Summary;

/// Drops smaller than this between neighbouring σ are solver noise, not a
/// monotonicity violation.
const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub center_nm: f64,
    pub s: f64,
    pub t1_fraction: f64,
    pub resolution: f64,
    pub sigma: Vec<f64>,
    pub n_alpha: Vec<f64>,
    pub n_beta: Vec<f64>,
    /// Largest σ at and below which both measures stay under the resolution.
    pub threshold_sigma: Option<f64>,
    pub monotone: bool,
}

/// Published values obtained with a different classical-process set; shown
/// for comparison only.
#[derive(Debug, Clone, Serialize)]
pub struct ReferenceValues {
    pub threshold_sigma_nm: f64,
    pub threshold_fwhm_nm: f64,
    pub n_alpha_at_threshold: f64,
    pub n_beta_at_threshold: f64,
    pub gating: bool,
}

pub const REFERENCE: ReferenceValues = ReferenceValues {
    threshold_sigma_nm: 0.1093,
    threshold_fwhm_nm: 0.2574,
    n_alpha_at_threshold: 0.0099,
    n_beta_at_threshold: 0.0073,
    gating: false,
};

#[derive(Debug, Serialize)]
struct SweepOutput<'a> {
    sweep: &'a SweepResult,
    reference: ReferenceValues,
}

pub fn threshold_sigma(
    sigma: &[f64],
    n_alpha: &[f64],
    n_beta: &[f64],
    resolution: f64,
) -> Option<f64> {
    sigma
        .iter()
        .zip(n_alpha.iter().zip(n_beta))
        .take_while(|(_, (a, b))| **a < resolution && **b < resolution)
        .last()
        .map(|(s, _)| *s)
}

pub fn is_monotone(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] - MONOTONE_SLACK)
}

pub fn sweep_sigma(cfg: &RunConfig) -> CliResult<SweepResult> {
    let params = evolution_params(cfg)?;
    let formulation = cfg.classical_set()?;
    let sigma = uniform_grid(cfg.sigma_max, cfg.sigma_step)?;
    let s = cfg.s_max;
    let values: Vec<(f64, f64)> = sigma
        .par_iter()
        .map(|&sg| {
            let spectrum = Spectrum::single(cfg.center_nm, sg)?;
            let family = DynamicsFamily::new(spectrum, params, cfg.s_max, cfg.step)?;
            let a = hcl_n(
                &family,
                s,
                cfg.t1_fraction,
                Quantumness::Alpha,
                &formulation,
            )?;
            let b = hcl_n(&family, s, cfg.t1_fraction, Quantumness::Beta, &formulation)?;
            Ok((a, b))
        })
        .collect::<dephaskit::Result<_>>()?;
    let (n_alpha, n_beta): (Vec<f64>, Vec<f64>) = values.into_iter().unzip();
    let monotone = is_monotone(&n_alpha) && is_monotone(&n_beta);
    let threshold = threshold_sigma(&sigma, &n_alpha, &n_beta, cfg.resolution);
    Ok(SweepResult {
        center_nm: cfg.center_nm,
        s,
        t1_fraction: cfg.t1_fraction,
        resolution: cfg.resolution,
        sigma,
        n_alpha,
        n_beta,
        threshold_sigma: threshold,
        monotone,
    })
}

pub fn to_csv(result: &SweepResult) -> String {
    let mut table = Table::new(&["sigma", "N_alpha", "N_beta"]);
    for i in 0..result.sigma.len() {
        table.numeric_row(&[result.sigma[i], result.n_alpha[i], result.n_beta[i]]);
    }
    table.into_string()
}

pub fn run(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let result = sweep_sigma(cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let csv = write_text(&cfg.out_dir, "sweep_sigma.csv", &to_csv(&result))?;
    let out = SweepOutput {
        sweep: &result,
        reference: REFERENCE,
    };
    let json = write_json(
        &cfg.out_dir,
        "sweep_sigma.json",
        &Summary::new("sweep-sigma", cfg, out),
    )?;
    match result.threshold_sigma {
        Some(t) => println!(
            "threshold sigma = {t} nm (resolution {}); reference value {} nm is informational",
            cfg.resolution, REFERENCE.threshold_sigma_nm
        ),
        None => println!(
            "no sigma on the grid stays below resolution {}",
            cfg.resolution
        ),
    }
    if !result.monotone {
        return Err(CliError::Numerical(
            "N(sigma) is not monotone nondecreasing".into(),
        ));
    }
    Ok(vec![csv, json])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_rules() {
        let s = [0.0, 0.1, 0.2, 0.3];
        let a = [0.0, 0.005, 0.009, 0.02];
        let b = [0.0, 0.004, 0.011, 0.02];
        assert_eq!(threshold_sigma(&s, &a, &b, 0.01), Some(0.1));
        assert_eq!(threshold_sigma(&s, &a, &b, 0.0), None);
        assert_eq!(threshold_sigma(&s, &a, &b, 0.5), Some(0.3));
        assert!(is_monotone(&a));
        assert!(!is_monotone(&[0.0, 0.1, 0.05]));
    }
}
