//! Experiment runner behind the `qmee` binary.
//!
//! Each task reads an [`ExperimentConfig`], runs its trials on a rayon pool
//! with per-trial random substreams and produces an [`ExperimentReport`] that
//! is written as CSV (plus SVG plots for the timing and surface tasks).

pub mod config;
pub mod experiments;
pub mod plot;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{ExperimentConfig, Overrides, Task};
pub use report::{ExperimentReport, MetricRow};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report: {0}")]
    Report(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] qmee::QmeeError),
}

impl CliError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Report(_) => "report",
            CliError::Csv(_) => "csv",
            CliError::Core(_) => "core",
        }
    }
}

/// Runs `task` and writes its artifacts into `out`, returning the report.
pub fn run_task(task: Task, config: &ExperimentConfig, out: &std::path::Path) -> Result<ExperimentReport, CliError> {
    config.validate(task)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    pool.install(|| match task {
        Task::Linreg => {
            let report = experiments::linreg::run(config)?;
            report.write_csv(&out.join("linreg.csv"))?;
            Ok(report)
        }
        Task::Elm => {
            let report = experiments::elm::run(config)?;
            report.write_csv(&out.join("elm.csv"))?;
            Ok(report)
        }
        Task::Esn => {
            let report = experiments::esn::run(config)?;
            report.write_csv(&out.join("esn.csv"))?;
            Ok(report)
        }
        Task::Timing => {
            let report = experiments::timing::run(config)?;
            report.write_csv(&out.join("timing.csv"))?;
            plot::write_file(&out.join("timing.svg"), &experiments::timing::plot(&report))?;
            Ok(report)
        }
        Task::Surface => {
            let output = experiments::surface::run(config)?;
            output.report.write_csv(&out.join("surface.csv"))?;
            for grid in &output.grids {
                let stem = format!("surface_{}", grid.criterion);
                grid.write_csv(&out.join(format!("{stem}.csv")))?;
                plot::write_file(
                    &out.join(format!("{stem}.svg")),
                    &experiments::surface::plot(grid, config),
                )?;
            }
            Ok(output.report)
        }
    })
}
