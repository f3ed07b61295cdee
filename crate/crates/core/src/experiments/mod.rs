//! Scenario runner: composes market runs, histogram statistics and the
//! analytic predictions, and writes CSV/JSON reports.

mod config;
mod runner;
mod scenarios;
mod tables;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{BurnIn, ExperimentConfig, InitSpec, SweepAxis, SweepParameter};
pub use runner::{
    average_timeseries, run_replica, MeanSe, RunOutcome, RunSpec, RunSummary, AUTO_CHECK_EVERY,
    AUTO_FIRST_CHECK,
};
pub use scenarios::{
    run_scenario, run_scenario_with, run_sweep, run_sweep_with, scenario_density_sweep,
    scenario_initial_conditions, scenario_lattice_sweep, scenario_ps_sweep, sup_distance,
    InitialConditionsReport, PairComparison, ScenarioReport, ScenarioResult, SweepPoint,
    SweepResult,
};
pub use tables::{
    parse_predictions_csv, parse_sweep_csv, write_predictions_csv, write_sweep_csv, PredictionRow,
    SweepRow, PREDICTIONS_HEADER, SWEEP_HEADER,
};

use crate::error::{AnalyticsError, ConfigError, StatsError};

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const REPORT_FILE: &str = "report.json";
pub const PARTIAL_MARKER: &str = ".partial";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("equilibrium not reached within {sweeps} sweeps; partial outputs in {}", dir.display())]
    EquilibriumNotReached { sweeps: u64, dir: PathBuf },
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

impl ExperimentError {
    /// Process exit status: 1 config, 2 equilibrium not reached, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 1,
            ExperimentError::Analytics(AnalyticsError::Config(_)) => 1,
            ExperimentError::EquilibriumNotReached { .. } => 2,
            ExperimentError::Io { .. } => 3,
            ExperimentError::Stats(_) | ExperimentError::Analytics(_) => 1,
        }
    }
}

pub(crate) fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| ExperimentError::Io { path, source })
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
