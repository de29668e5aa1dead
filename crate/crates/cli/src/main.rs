//! File-based pipeline driver.
//!
//! Each subcommand is a pure function of its inputs, flags and seed:
//! rerunning a command reproduces byte-identical data outputs. Every
//! run writes one manifest (`<out>.manifest.json`) recording inputs,
//! outputs, seeds and digests; manifests carry timings and are the only
//! output that varies between identical runs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 schema mismatch,
//! 4 I/O or file-format error. An infeasible optimization is a data
//! outcome, not a failure: it exits 0 with `"feasible": false` in the
//! summary.

mod commands;
mod manifest;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

const VERSION_LINE: &str = concat!(env!("CARGO_PKG_VERSION"), " (model format v1)");

#[derive(Parser)]
#[command(name = "pyrf", version = VERSION_LINE, about = "Pyrolysis soft-sensor pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic plant telemetry CSV.
    Simulate {
        /// Plant config file (key = value); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of records.
        #[arg(long)]
        n: usize,
        /// Output telemetry CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross-validated grid search over forest hyperparameters.
    Tune {
        /// Telemetry CSV.
        #[arg(long)]
        input: PathBuf,
        /// Target sensor column.
        #[arg(long)]
        target: String,
        /// Lag depth for the feature table.
        #[arg(long, default_value_t = 3)]
        lag: usize,
        /// JSON array of hyperparameter combos; the built-in 60-combo
        /// grid when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Number of folds.
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Base seed for per-combo-per-fold training seeds.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CVReport JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated machine-state columns (simulator schema when
        /// omitted).
        #[arg(long)]
        states: Option<String>,
        /// Comma-separated sensor columns (simulator schema when
        /// omitted).
        #[arg(long)]
        sensors: Option<String>,
    },
    /// Train a forest and store it in the binary model format.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 3)]
        lag: usize,
        /// Take the winning combo from a tune report.
        #[arg(long)]
        cv_report: Option<PathBuf>,
        #[arg(long)]
        estimators: Option<usize>,
        #[arg(long)]
        min_samples_split: Option<usize>,
        #[arg(long)]
        min_samples_leaf: Option<usize>,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        features_per_split: Option<usize>,
        /// Disable bootstrap resampling.
        #[arg(long)]
        no_bootstrap: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output model path; metadata goes to `<out>.json`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        states: Option<String>,
        #[arg(long)]
        sensors: Option<String>,
    },
    /// Stream telemetry rows through a stored model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Output predictions CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimize the objective model's prediction under constraint bands.
    Optimize {
        /// Objective model (its target is minimized).
        #[arg(long)]
        objective: PathBuf,
        /// Constraint model and band, `path:lower:upper`; repeatable.
        #[arg(long = "constraint")]
        constraints: Vec<String>,
        /// Decision bound per machine state, `name:lower:upper`;
        /// repeatable. States not listed take the plant config bounds.
        #[arg(long = "bounds")]
        bounds: Vec<String>,
        /// Plant config supplying default decision bounds.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output trace CSV path; the summary JSON goes to
        /// `<out>.summary.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Emulate the on-device retraining loop over recorded telemetry.
    EdgeSim {
        #[arg(long)]
        input: PathBuf,
        /// Warm model served before the first retrain.
        #[arg(long)]
        model: PathBuf,
        /// Simulated run length in seconds.
        #[arg(long, default_value_t = 86_400)]
        duration: i64,
        /// Retrain period in seconds.
        #[arg(long, default_value_t = 7_200)]
        period: i64,
        /// Rolling window size in records.
        #[arg(long, default_value_t = 1_440)]
        window: usize,
        /// Trees per on-device retrain.
        #[arg(long, default_value_t = 20)]
        edge_estimators: usize,
        /// Depth cap for on-device models.
        #[arg(long, default_value_t = 2)]
        edge_depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for the edge log and retrained models.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, n, out, seed } => commands::simulate(config, n, out, seed),
        Command::Tune {
            input,
            target,
            lag,
            grid,
            k,
            seed,
            out,
            states,
            sensors,
        } => commands::tune(input, target, lag, grid, k, seed, out, states, sensors),
        Command::Train {
            input,
            target,
            lag,
            cv_report,
            estimators,
            min_samples_split,
            min_samples_leaf,
            max_depth,
            features_per_split,
            no_bootstrap,
            seed,
            out,
            states,
            sensors,
        } => commands::train(commands::TrainArgs {
            input,
            target,
            lag,
            cv_report,
            estimators,
            min_samples_split,
            min_samples_leaf,
            max_depth,
            features_per_split,
            no_bootstrap,
            seed,
            out,
            states,
            sensors,
        }),
        Command::Predict { model, input, out } => commands::predict(model, input, out),
        Command::Optimize {
            objective,
            constraints,
            bounds,
            config,
            budget,
            seed,
            out,
        } => commands::optimize(objective, constraints, bounds, config, budget, seed, out),
        Command::EdgeSim {
            input,
            model,
            duration,
            period,
            window,
            edge_estimators,
            edge_depth,
            seed,
            out_dir,
        } => commands::edge_sim(commands::EdgeSimArgs {
            input,
            model,
            duration,
            period,
            window,
            edge_estimators,
            edge_depth,
            seed,
            out_dir,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
