//! Experiment harness for the IPH domain decomposition solvers: eigenvalue
//! tables, iteration scaling studies and the discretization order, written
//! as CSV plus a plain-text summary with fitted slopes.

pub mod config;
pub mod experiments;
pub mod fit;

use std::fs;
use std::io;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

pub use config::{ExperimentConfig, ExperimentId, PhatPolicy};
pub use experiments::{convergence_order, run_experiment, ExperimentOutput, Gate};
pub use fit::{fit_scaling, ScalingFit};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Solver(#[from] iph_dd::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl BenchError {
    /// 1 for configuration problems (including infeasible meshes or
    /// partitions), 3 for failures inside the solvers or file output.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Invalid(_) => 1,
            BenchError::Solver(iph_dd::Error::InvalidArgument(_)) => 1,
            BenchError::Solver(_) | BenchError::Io(_) => 3,
        }
    }
}

/// Writes `<out>/<experiment>.csv` and `<out>/<experiment>.summary.txt`.
/// Only the first CSV line carries a timestamp.
pub fn write_outputs(cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<(PathBuf, PathBuf), BenchError> {
    fs::create_dir_all(&cfg.out)?;
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let csv = cfg.out.join(format!("{}.csv", cfg.experiment));
    let summary = cfg.out.join(format!("{}.summary.txt", cfg.experiment));
    fs::write(&csv, format!("# generated unix={stamp}\n{}", out.csv_body()))?;
    fs::write(&summary, out.summary())?;
    Ok((csv, summary))
}
