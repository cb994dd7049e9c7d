use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dcdgd_cli::{analyze, compare, sweep, CliError, Overrides};

/// Experiments with differential-coded compressed decentralized gradient descent.
#[derive(Parser)]
#[command(name = "dcdgd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a consensus matrix and print its spectrum and thresholds.
    AnalyzeMatrix {
        file: PathBuf,
        /// Smoothness constant used for the step-size table.
        #[arg(long, default_value_t = 1.0)]
        smoothness: f64,
    },
    /// Run a convergence sweep.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Compare compressor bias, SNR and bit cost on Gaussian vectors.
    CompareCompressors {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run the logistic-regression experiment on a local dataset.
    RealData {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides { seed: a.seed, out_dir: a.out_dir, trials: a.trials, iterations: a.iterations }
    }
}

fn execute(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::AnalyzeMatrix { file, smoothness } => Ok(analyze::analyze_matrix(&file, smoothness)?.render()),
        Command::Run { config, overrides } => Ok(sweep::cmd_run(&config, &overrides.into())?.render()),
        Command::CompareCompressors { config, overrides } => {
            Ok(compare::cmd_compare_compressors(&config, &overrides.into())?.render())
        }
        Command::RealData { config, overrides } => Ok(sweep::cmd_real_data(&config, &overrides.into())?.render()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
