//! The `bank` command-line interface.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "bank", version, about = "Bayesian nonparametric kernel learning with random Fourier features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for benchmarks.
    #[arg(long, global = true, env = "BANK_THREADS")]
    pub threads: Option<usize>,

    /// Only report errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the configured method and save the model and metrics.
    Train,
    /// Predict with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// CSV of inputs, optionally with the target column.
        #[arg(long)]
        data: PathBuf,
    },
    /// Cross-validate the configured methods.
    Benchmark,
    /// Write the learned kernel and spectral density on a grid.
    KernelExport {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        t_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        t_max: Option<f64>,
        #[arg(long)]
        t_points: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        omega_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        omega_max: Option<f64>,
        #[arg(long)]
        omega_points: Option<usize>,
    },
    /// Generate a synthetic regression dataset from a spectral mixture kernel.
    Synth,
}

pub fn init_logging(quiet: bool) {
    let level = if quiet { log::LevelFilter::Error } else { log::LevelFilter::Info };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failed(format!("cannot start thread pool: {e}")))?;
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    configure_threads(cli.threads)?;
    let config = commands::load_config(cli.config.as_deref(), cli.seed)?;
    match &cli.command {
        Command::Train => {
            let out = commands::output_dir(cli.out.as_deref(), &config, "bank-out");
            let metrics = commands::cmd_train(&config, &out)?;
            if !cli.quiet {
                println!(
                    "trained {} on {} rows: train {} = {}; outputs in {}",
                    metrics.method,
                    metrics.n_train,
                    metrics.metric,
                    metrics.train,
                    out.display()
                );
            }
        }
        Command::Predict { model, data } => {
            let out = commands::output_dir(cli.out.as_deref(), &config, ".");
            let report = commands::cmd_predict(model, data, &out)?;
            if !cli.quiet {
                println!("wrote {} predictions to {}", report.n_rows, report.path.display());
            }
        }
        Command::Benchmark => {
            let out = commands::output_dir(cli.out.as_deref(), &config, "bank-benchmark");
            let rows = commands::cmd_benchmark(&config, &out)?;
            if !cli.quiet {
                print!("{}", commands::format_benchmark_table(config.task, &rows));
            }
        }
        Command::KernelExport {
            model,
            t_min,
            t_max,
            t_points,
            omega_min,
            omega_max,
            omega_points,
        } => {
            let mut grid = config.export.clone();
            grid.t_min = t_min.unwrap_or(grid.t_min);
            grid.t_max = t_max.unwrap_or(grid.t_max);
            grid.t_points = t_points.unwrap_or(grid.t_points);
            grid.omega_min = omega_min.unwrap_or(grid.omega_min);
            grid.omega_max = omega_max.unwrap_or(grid.omega_max);
            grid.omega_points = omega_points.unwrap_or(grid.omega_points);
            let out = commands::output_dir(cli.out.as_deref(), &config, "bank-kernel");
            let (k, s) = commands::cmd_kernel_export(model, &grid, &out)?;
            if !cli.quiet {
                println!("wrote {} and {}", k.display(), s.display());
            }
        }
        Command::Synth => {
            let out = commands::output_dir(cli.out.as_deref(), &config, "bank-synth");
            let path = commands::cmd_synth(&config, &out)?;
            if !cli.quiet {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}
