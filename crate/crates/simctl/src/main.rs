use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use simctl::{cmd_compare, cmd_ess, cmd_run_eps, cmd_run_limit, cmd_sweep, presets, RunOptions};

#[derive(Parser)]
#[command(
    name = "simctl",
    version,
    about = "Selection-mutation experiments: ε-runs, limit runs, ESS solves, sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward simulation at one ε.
    RunEps(Common),
    /// Limit (ε → 0) simulation with branching log.
    RunLimit(Common),
    /// ESS on the configured admissible set, with certificate and uniqueness probe.
    Ess(Common),
    /// Forward runs over an ε list against one limit run.
    Sweep(Common),
    /// Ghost scenario under each correction mode.
    Compare(Common),
    /// Print a shipped preset config.
    Preset { name: Option<String> },
}

#[derive(Args)]
struct Common {
    /// Config file, or `preset:<name>`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    quiet: bool,
    /// ε override; comma-separated for `sweep`.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
}

impl From<Common> for RunOptions {
    fn from(c: Common) -> Self {
        RunOptions {
            config: c.config,
            out: c.out,
            seed: c.seed,
            quiet: c.quiet,
            eps: c.eps,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exit = match cli.command {
        Command::RunEps(c) => cmd_run_eps(&c.into()),
        Command::RunLimit(c) => cmd_run_limit(&c.into()),
        Command::Ess(c) => cmd_ess(&c.into()),
        Command::Sweep(c) => cmd_sweep(&c.into()),
        Command::Compare(c) => cmd_compare(&c.into()),
        Command::Preset { name: None } => {
            for n in presets::NAMES {
                println!("{n}");
            }
            return ExitCode::SUCCESS;
        }
        Command::Preset { name: Some(n) } => match presets::get(&n) {
            Some(text) => {
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            None => {
                eprintln!("simctl: unknown preset {n:?}");
                return ExitCode::from(2);
            }
        },
    };
    ExitCode::from(exit as u8)
}
