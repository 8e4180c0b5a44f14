use std::path::PathBuf;

use dephaskit::criteria::{
    evaluate, BlpSearch, CriteriaOptions, CriteriaReport, DynamicsFamily, Thresholds,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, fmt_g, write_json, write_text, Table};
use crate::runs::{collect_runs, evolution_params, Run};
use crate::summary::Summary;

pub const CSV_HEADER: [&str; 13] = [
    "theta",
    "W_alpha",
    "W_beta",
    "N_alpha",
    "N_beta",
    "N_blp",
    "N_rhp",
    "N_lfs",
    "verdict_blp",
    "verdict_rhp",
    "verdict_lfs",
    "verdict_hcl_w",
    "verdict_hcl_n",
];

pub const NON_MARKOVIAN: &str = "non-Markovian";
pub const MARKOVIAN: &str = "Markovian";

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyRow {
    #[serde(flatten)]
    pub run: Run,
    pub report: Option<CriteriaReport>,
    pub error: Option<String>,
}

pub fn criteria_options(cfg: &RunConfig) -> CliResult<CriteriaOptions> {
    Ok(CriteriaOptions {
        t1_fraction: cfg.t1_fraction,
        thresholds: Thresholds {
            hcl_n: cfg.resolution,
            ..Thresholds::default()
        },
        blp_search: BlpSearch::default(),
        formulation: cfg.classical_set()?,
    })
}

pub fn classify(cfg: &RunConfig) -> CliResult<Vec<ClassifyRow>> {
    let params = evolution_params(cfg)?;
    let options = criteria_options(cfg)?;
    let runs = collect_runs(cfg)?;
    Ok(runs
        .into_par_iter()
        .map(|run| {
            let outcome = DynamicsFamily::new(run.spectrum.clone(), params, cfg.s_max, cfg.step)
                .and_then(|family| evaluate(&family, &options));
            match outcome {
                Ok(report) => ClassifyRow {
                    run,
                    report: Some(report),
                    error: None,
                },
                Err(e) => ClassifyRow {
                    run,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

fn verdict(flag: bool) -> String {
    if flag { NON_MARKOVIAN } else { MARKOVIAN }.to_string()
}

pub fn to_csv(rows: &[ClassifyRow]) -> String {
    let mut table = Table::new(&CSV_HEADER);
    for row in rows {
        let mut cells = vec![row.run.label.clone()];
        match &row.report {
            Some(r) => {
                cells.extend(
                    [
                        r.w_alpha, r.w_beta, r.n_alpha, r.n_beta, r.n_blp, r.n_rhp, r.n_lfs,
                    ]
                    .map(fmt_g),
                );
                let v = r.verdicts;
                cells.extend([v.blp, v.rhp, v.lfs, v.hcl_w, v.hcl_n].map(verdict));
            }
            None => {
                cells.extend(std::iter::repeat_n("nan".to_string(), 7));
                cells.extend(std::iter::repeat_n("error".to_string(), 5));
            }
        }
        table.row(&cells);
    }
    table.into_string()
}

pub fn run(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let rows = classify(cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let csv = write_text(&cfg.out_dir, "classify.csv", &to_csv(&rows))?;
    let json = write_json(
        &cfg.out_dir,
        "classify.json",
        &Summary::new("classify", cfg, &rows),
    )?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    for row in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "error: {}: {}",
            row.run.label,
            row.error.as_deref().unwrap_or_default()
        );
    }
    if failed > 0 {
        return Err(CliError::RunsFailed {
            failed,
            total: rows.len(),
        });
    }
    Ok(vec![csv, json])
}
