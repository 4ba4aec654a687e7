use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod ops;

#[derive(Parser)]
#[command(name = "cyclo", version, about = "Graph-based dissipativity analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the abstraction, compute the four storage fields, decide
    /// cyclo-dissipativity with respect to the ground state.
    Analyze(AnalyzeArgs),
    /// Audit a candidate storage function against the computed fields.
    Verify(VerifyArgs),
    /// Run a named simulation scenario and check its energy balance.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Registry key of a built-in model
    #[arg(long, conflicts_with = "config")]
    model: Option<String>,

    /// Path to a JSON model config (see docs/model-config.md)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Grid nodes per state dimension, comma separated (default 41 each)
    #[arg(long)]
    grid: Option<String>,

    /// Input levels per input dimension over the input hull, comma separated
    #[arg(long)]
    inputs: Option<String>,

    /// Dwell time per graph edge (default: largest step that cannot skip a cell)
    #[arg(long)]
    step: Option<f64>,

    /// RK4 substeps per edge
    #[arg(long, default_value_t = 4)]
    substeps: usize,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Seed for every sampled check in this invocation
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Worker threads for the graph sweeps (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Ground state coordinates, comma separated
    #[arg(long, allow_hyphen_values = true)]
    ground: String,

    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Ground state coordinates, comma separated
    #[arg(long, allow_hyphen_values = true)]
    ground: String,

    /// Second ground for the cross-ground exchange check
    #[arg(long, allow_hyphen_values = true)]
    ground2: Option<String>,

    /// Candidate storage S(x) as an expression in x1..xn
    #[arg(long, allow_hyphen_values = true)]
    storage_expr: String,

    /// Gradient expressions of the candidate, comma separated, one per dimension
    #[arg(long, allow_hyphen_values = true)]
    storage_grad: Option<String>,

    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario name: capmic-two-port or capmic-mech-port
    #[arg(long)]
    scenario: String,

    /// Linear capacitance coefficient of the microphone model
    #[arg(long, default_value_t = 1.0)]
    c1: f64,

    /// Simulation step override
    #[arg(long)]
    step: Option<f64>,

    #[command(flatten)]
    out: OutArgs,
}

fn main() -> ExitCode {
    // usage problems are tool errors, not falsifications: exit 1, not
    // clap's default 2; --help and --version still exit 0
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };

    let threads = match &cli.command {
        Command::Analyze(a) => a.out.threads,
        Command::Verify(a) => a.out.threads,
        Command::Simulate(a) => a.out.threads,
    };
    let run = || match cli.command {
        Command::Analyze(args) => ops::cmd_analyze(args),
        Command::Verify(args) => ops::cmd_verify(args),
        Command::Simulate(args) => ops::cmd_simulate(args),
    };
    let outcome = match threads {
        Some(t) if t > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| cyclo_core::Error::Internal(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(run)),
        _ => run(),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
