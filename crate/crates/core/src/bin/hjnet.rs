use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hjnet::bench::{load_config, run_command, Command, LoadedConfig};

#[derive(Parser)]
#[command(name = "hjnet", version, about = "Hamilton-Jacobi solver experiments")]
struct Cli {
    /// TOML config, or a manifest from an earlier run to reproduce it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Exact-backend error across grid sizes, with the fitted log-log slope.
    Convergence,
    /// Surrogate and pipeline error against network size.
    SizeSweep,
    /// Direct operator regression compared with the pipeline at matched size.
    Baseline,
    /// Minimum characteristic Jacobian determinant against time.
    Tstar,
    /// Train a flow surrogate and save it as model.json.
    Train,
    /// Run the pipeline and evaluate it on a probe lattice.
    Solve,
    /// Method-of-characteristics reference values.
    Oracle,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Convergence => Command::Convergence,
            Cmd::SizeSweep => Command::SizeSweep,
            Cmd::Baseline => Command::Baseline,
            Cmd::Tstar => Command::Tstar,
            Cmd::Train => Command::Train,
            Cmd::Solve => Command::Solve,
            Cmd::Oracle => Command::Oracle,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let loaded = match &cli.config {
        Some(path) => load_config(path),
        None => Ok(LoadedConfig {
            config: Default::default(),
            base_dir: PathBuf::from("."),
        }),
    };
    let command = Command::from(cli.command);
    match loaded.and_then(|l| run_command(command, &l, &cli.out, cli.seed)) {
        Ok(outcome) => {
            println!("{command}: {}", outcome.summary);
            for f in &outcome.files {
                println!("  wrote {}", f.display());
            }
            if outcome.complete {
                ExitCode::SUCCESS
            } else {
                eprintln!("{command}: some rows failed; see the status column");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{command} failed: {e}");
            ExitCode::from(2)
        }
    }
}
