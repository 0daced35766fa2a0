use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shardpost::harness::{self, ConfigFile, Overrides};
use shardpost::Error;

/// Combine embarrassingly parallel MCMC subposteriors and score the results.
#[derive(Parser)]
#[command(name = "shardpost", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments in a JSON config file.
    Run {
        config: PathBuf,
        /// Master seed for every experiment in the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's `output`, else `results`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Keep per-parameter density tables for `plots`.
        #[arg(long)]
        keep_densities: bool,
    },
    /// Print average relative L2 distances for finished runs.
    Report { dir: PathBuf },
    /// Export plot-ready density tables for one parameter.
    Plots {
        dir: PathBuf,
        /// 1-based parameter number.
        #[arg(long)]
        param: usize,
    },
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else if e.is_numerical() {
        3
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            threads,
            keep_densities,
        } => {
            let overrides = Overrides {
                seed,
                out,
                threads,
                keep_densities,
            };
            let (file, out) = ConfigFile::load(&config)?.with_overrides(&overrides);
            let reports = harness::run_config(&file, &out, overrides.threads)?;
            print!("{}", harness::format_summary(&reports));
            println!("wrote {}", out.join("report.csv").display());
        }
        Command::Report { dir } => {
            let reports = harness::experiment_dirs(&dir)?
                .iter()
                .map(|d| harness::read_report(d))
                .collect::<Result<Vec<_>, _>>()?;
            print!("{}", harness::format_summary(&reports));
        }
        Command::Plots { dir, param } => {
            for d in harness::experiment_dirs(&dir)? {
                let (shards, combined) = harness::export_plot_data(&d, param)?;
                println!("{}\n{}", shards.display(), combined.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
