use std::path::PathBuf;

use dephaskit::criteria::{
    concurrence_trajectory, mutual_information_trajectory, quantumness_trajectory,
    trace_distance_trajectory, DynamicsFamily, Quantumness,
};
use dephaskit::qcore::DensityMatrix;
use serde::Serialize;

use crate::args::Quantity;
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{ensure_dir, file_label, write_json, write_text, Table};
use crate::runs::{collect_runs, evolution_params, Run};
use crate::summary::Summary;

#[derive(Debug, Serialize)]
struct TrajectoryIndex {
    runs: Vec<RunFiles>,
}

#[derive(Debug, Serialize)]
struct RunFiles {
    #[serde(flatten)]
    run: Run,
    files: Vec<String>,
}

/// CSV text for one quantity on the family grid.
pub fn quantity_csv(family: &DynamicsFamily, q: Quantity, cfg: &RunConfig) -> CliResult<String> {
    let grid = family.grid();
    let single = |name: &str, values: Vec<f64>| {
        let mut t = Table::new(&["s", name]);
        for (s, v) in grid.iter().zip(values) {
            t.numeric_row(&[*s, v]);
        }
        t.into_string()
    };
    let formulation = cfg.classical_set()?;
    Ok(match q {
        Quantity::Kappa => {
            let mut t = Table::new(&["s", "re_kappa", "im_kappa", "abs_kappa"]);
            for (s, k) in grid.iter().zip(family.kappa_values()) {
                t.numeric_row(&[*s, k.re, k.im, k.norm()]);
            }
            t.into_string()
        }
        Quantity::Alpha => single(
            "alpha",
            quantumness_trajectory(family, Quantumness::Alpha, &formulation)?,
        ),
        Quantity::Beta => single(
            "beta",
            quantumness_trajectory(family, Quantumness::Beta, &formulation)?,
        ),
        Quantity::TraceDistance => single(
            "trace_distance",
            trace_distance_trajectory(family, &DensityMatrix::plus(), &DensityMatrix::minus())?,
        ),
        Quantity::Concurrence => single("concurrence", concurrence_trajectory(family)?),
        Quantity::MutualInformation => {
            single("mutual_information", mutual_information_trajectory(family)?)
        }
    })
}

pub fn run(cfg: &RunConfig, quantities: &[Quantity]) -> CliResult<Vec<PathBuf>> {
    let quantities = if quantities.is_empty() {
        &Quantity::ALL[..]
    } else {
        quantities
    };
    let params = evolution_params(cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let mut written = Vec::new();
    let mut index = TrajectoryIndex { runs: Vec::new() };
    for run in collect_runs(cfg)? {
        let family = DynamicsFamily::new(run.spectrum.clone(), params, cfg.s_max, cfg.step)?;
        let mut files = Vec::new();
        for &q in quantities {
            let name = format!(
                "trajectory_{}_{}.csv",
                file_label(&run.label),
                q.file_stem()
            );
            written.push(write_text(
                &cfg.out_dir,
                &name,
                &quantity_csv(&family, q, cfg)?,
            )?);
            files.push(name);
        }
        index.runs.push(RunFiles { run, files });
    }
    written.push(write_json(
        &cfg.out_dir,
        "trajectory.json",
        &Summary::new("trajectory", cfg, index),
    )?);
    Ok(written)
}
