use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use pairdistill::harness::{cmd_all, cmd_correlation, cmd_downsample, cmd_ece, cmd_gradcheck, cmd_simulate, RunConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Simulate,
    Ece,
    Correlation,
    Downsample,
    Gradcheck,
    All,
}

/// Simulate ensemble labelers and run the distillation experiments.
#[derive(Debug, Parser)]
#[command(name = "pairdistill", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run seed (overrides the config file and PAIRDISTILL_SEED).
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: &Cli) -> pairdistill::Result<bool> {
    let config = RunConfig::load(&cli.config)?.with_overrides(cli.seed, cli.out.clone())?;
    match cli.command {
        Command::Simulate => print!("{}", cmd_simulate(&config)?),
        Command::Ece => print!("{}", cmd_ece(&config)?),
        Command::Correlation => print!("{}", cmd_correlation(&config)?),
        Command::Downsample => print!("{}", cmd_downsample(&config)?),
        Command::Gradcheck => {
            let report = cmd_gradcheck(&config)?;
            print!("{report}");
            return Ok(report.passed());
        }
        Command::All => {
            let summary = cmd_all(&config)?;
            print!("{summary}");
            return Ok(summary.gradcheck.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
