use serde::Serialize;

use crate::config::RunConfig;

pub const TOOL: &str = "dephaskit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Every JSON file carries the conventions its numbers depend on.
#[derive(Debug, Serialize)]
pub struct Summary<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub delta_n: f64,
    pub lambda0_nm: f64,
    pub formulation: String,
    pub config: &'a RunConfig,
    pub results: T,
}

impl<'a, T: Serialize> Summary<'a, T> {
    pub fn new(command: &'static str, cfg: &'a RunConfig, results: T) -> Self {
        let formulation = cfg
            .classical_set()
            .map(|f| f.tag().to_string())
            .unwrap_or_else(|_| cfg.formulation.clone());
        Self {
            tool: TOOL,
            version: VERSION,
            command,
            delta_n: cfg.delta_n,
            lambda0_nm: cfg.lambda0_nm,
            formulation,
            config: cfg,
            results,
        }
    }
}
