use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scbank::app::{self, Options};

#[derive(Parser)]
#[command(name = "scbank", version, about = "Supercapacitor bank scenario runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Average-RoCoF window [s]; overrides sim.rocof_window.
    #[arg(long)]
    window: Option<f64>,
    /// Copied into the outputs as metadata.
    #[arg(long)]
    seed_echo: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one scenario.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a parameter sweep over a base scenario.
    Sweep {
        scenario: PathBuf,
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Parallel runs (default: available cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare reduced cell models under a test current.
    ReduceStudy {
        cell: PathBuf,
        current: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Check a scenario without running it.
    Validate { scenario: PathBuf },
}

fn opts(c: &Common, workers: Option<usize>) -> Options {
    Options {
        window: c.window,
        seed_echo: c.seed_echo,
        workers,
    }
}

fn main() -> ExitCode {
    let code = match Cli::parse().cmd {
        Cmd::Run { scenario, common } => app::cmd_run(&scenario, &common.out, &opts(&common, None)),
        Cmd::Sweep {
            scenario,
            spec,
            common,
            workers,
        } => app::cmd_sweep(&scenario, &spec, &common.out, &opts(&common, workers)),
        Cmd::ReduceStudy { cell, current, common } => {
            app::cmd_reduce_study(&cell, current.as_deref(), &common.out, &opts(&common, None))
        }
        Cmd::Validate { scenario } => app::cmd_validate(&scenario),
    };
    ExitCode::from(code as u8)
}
