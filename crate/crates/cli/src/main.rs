use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qmee_cli::{run_task, CliError, ExperimentConfig, Overrides, Task};

/// Runs the QMEE experiments and writes CSV reports and SVG plots.
#[derive(Parser)]
#[command(name = "qmee", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Linear regression under impulsive noise.
    Linreg(Common),
    /// Extreme learning machine regression.
    Elm(Common),
    /// Echo state network on the Mackey-Glass series.
    Esn(Common),
    /// Wall time against sample size.
    Timing(Common),
    /// Cost surfaces over a weight lattice.
    Surface(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of Monte Carlo trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Sample size of the task.
    #[arg(long)]
    n: Option<usize>,
}

fn run(task: Task, args: &Common) -> Result<PathBuf, CliError> {
    let mut config = ExperimentConfig::load(args.config.as_deref())?;
    config.apply(
        task,
        &Overrides {
            seed: args.seed,
            trials: args.trials,
            n: args.n,
        },
    );
    run_task(task, &config, &args.out)?;
    Ok(args.out.join(format!("{}.csv", task.name())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, args) = match &cli.command {
        Command::Linreg(a) => (Task::Linreg, a),
        Command::Elm(a) => (Task::Elm, a),
        Command::Esn(a) => (Task::Esn, a),
        Command::Timing(a) => (Task::Timing, a),
        Command::Surface(a) => (Task::Surface, a),
    };
    match run(task, args) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let line = serde_json::json!({
                "error": e.kind(),
                "task": task.name(),
                "message": e.to_string(),
            });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
