use std::path::PathBuf;
use std::process::ExitCode;

use accim::Error;
use accim_cli::{exit_code, load_config, run, Command};
use clap::{Parser, Subcommand};

/// Escape rates and conditionally invariant densities for expanding maps with holes.
#[derive(Parser)]
#[command(name = "accim", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment configuration (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, short, global = true)]
    workers: Option<usize>,
    /// Monte Carlo seed; overrides `[montecarlo] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Tower constants and hypothesis checks.
    Check,
    /// Fixed point, eigenvalue and projected density.
    Solve,
    /// Hole-shrinking study against the closed-system density.
    Shrink,
    /// `1 - lambda` against `C0 mH` over a hole family.
    Lipschitz,
    /// Monte Carlo survival and conditional histograms.
    Mc,
    /// Every tower cell as JSON.
    TowerDump,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Check => Command::Check,
            Cmd::Solve => Command::Solve,
            Cmd::Shrink => Command::Shrink,
            Cmd::Lipschitz => Command::Lipschitz,
            Cmd::Mc => Command::Mc,
            Cmd::TowerDump => Command::TowerDump,
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config {
        line: None,
        msg: "missing --config".into(),
    })?;
    let mut cfg = load_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.montecarlo.seed = seed;
    }
    let out_dir = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        pool = pool.num_threads(w.max(1));
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let output = pool.install(|| run(cli.command.into(), &cfg))?;
    std::fs::create_dir_all(&out_dir)?;
    for (name, contents) in &output.files {
        std::fs::write(out_dir.join(name), contents)?;
    }
    print!("{}", output.stdout);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
