//! Experiment orchestration: config files, seeded end-to-end runs, reports,
//! and plot-data export.

mod config;
mod output;
mod run;

use std::path::{Path, PathBuf};

pub use config::{ConfigFile, DpeConfig, ExperimentConfig, Overrides};
pub use output::{
    experiment_dirs, export_plot_data, format_summary, read_report, report_rows, write_combined_report, write_error,
    write_experiment, REPORT_HEADER,
};
pub use run::{chain_seed, run_experiment, DensityTable, ExperimentReport, RunOutput, SeedRecord, Timings, SEED_RULE};

use crate::error::{Error, Result, Stage};

/// Run every experiment of a config file on a pool of `threads` workers
/// (all available cores when `None`), writing each into `out/<name>/` and a
/// combined `out/report.csv`.
pub fn run_config(file: &ConfigFile, out: &Path, threads: Option<usize>) -> Result<Vec<ExperimentReport>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    std::fs::create_dir_all(out)?;
    let mut reports = Vec::with_capacity(file.experiments.len());
    for config in &file.experiments {
        let dir: PathBuf = out.join(config.label());
        match pool.install(|| run_experiment(config)) {
            Ok(run) => {
                write_experiment(&dir, &run).map_err(|e| e.at(Stage::Output))?;
                reports.push(run.report);
            }
            Err(e) => {
                write_error(&dir, &config.label(), &e)?;
                return Err(e);
            }
        }
    }
    write_combined_report(&out.join("report.csv"), &reports.iter().collect::<Vec<_>>()).map_err(|e| e.at(Stage::Output))?;
    Ok(reports)
}
