//! Config-driven runner for the transport-limit experiments.
//!
//! `otlimits <subcommand> --config <path> [--out <dir>] [--seed <u64>]`
//!
//! Exit codes: 0 on success, 2 on configuration/validation errors, 3 on
//! solver failures. OTLIMITS_THREADS caps internal parallelism.

use clap::{Args, Parser, Subcommand};
use otlimits_cli::config;
use otlimits_cli::experiments::{self, RunError};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "otlimits", version, about = "Transport-limit experiments on finite grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for result.json and data files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Seed for the experiments that sample test potentials.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Primal and dual W1 with the duality gap.
    W1(RunArgs),
    /// p-Wasserstein distance between the two parts of lambda.
    Wp(RunArgs),
    /// Scaled sweep n * min over mu of W_p with extrapolation.
    Sweep(RunArgs),
    /// Conditional action and conditional Wasserstein metric.
    Conditional(RunArgs),
    /// Ground energy, minimizing measure, and the potential sandwich.
    Weakkam(RunArgs),
    /// Transport-measure approximation from the sweep minimizers.
    #[command(name = "transport-measure")]
    TransportMeasure(RunArgs),
    /// Three-route consistency of the modified action.
    #[command(name = "th1-check")]
    Th1Check(RunArgs),
    /// Conditional-vs-unconditional spot check over candidate measures.
    #[command(name = "th5-check")]
    Th5Check(RunArgs),
    /// Scaled transport margins against the conditional action.
    #[command(name = "liminf-check")]
    LiminfCheck(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::W1(_) => "w1",
            Command::Wp(_) => "wp",
            Command::Sweep(_) => "sweep",
            Command::Conditional(_) => "conditional",
            Command::Weakkam(_) => "weakkam",
            Command::TransportMeasure(_) => "transport-measure",
            Command::Th1Check(_) => "th1-check",
            Command::Th5Check(_) => "th5-check",
            Command::LiminfCheck(_) => "liminf-check",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::W1(a)
            | Command::Wp(a)
            | Command::Sweep(a)
            | Command::Conditional(a)
            | Command::Weakkam(a)
            | Command::TransportMeasure(a)
            | Command::Th1Check(a)
            | Command::Th5Check(a)
            | Command::LiminfCheck(a) => a,
        }
    }
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("OTLIMITS_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring invalid OTLIMITS_THREADS={v}"),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    init_thread_pool();
    let args = cli.command.args();
    let cfg = match config::ExperimentConfig::from_path(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    match experiments::run(cli.command.name(), &cfg, &args.out, args.seed) {
        Ok(value) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("serializable"));
        }
        Err(RunError::Validation(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
        Err(RunError::Solver(msg)) => {
            eprintln!("solver error: {msg}");
            std::process::exit(3);
        }
    }
}
