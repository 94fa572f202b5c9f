use clap::{Parser, Subcommand};
use emchan::cli::{run, Command, THREADS_ENV};
use std::path::PathBuf;
use std::process::ExitCode;

/// Continuous-space electromagnetic channel simulator.
#[derive(Parser)]
#[command(name = "emchan", version)]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override a scenario key, e.g. --set users.count=6 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; replaces output.dir from the scenario.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Temporal autocorrelation at each reference time.
    Acf(Common),
    /// Spatial cross-correlation across the Rx ball.
    Ccf(Common),
    /// Single-user water-filling capacity against transmit power.
    CapacitySu(Common),
    /// Multi-user Monte-Carlo capacity.
    CapacityMu {
        #[command(flatten)]
        common: Common,
        /// Evaluate one realization dumped by scene-dump instead of an ensemble.
        #[arg(long)]
        scene: Option<PathBuf>,
    },
    /// Active-mode count and singular values.
    Dof(Common),
    /// Radiation pattern of the optimised current on a great-circle cut.
    Pattern(Common),
    /// err and optimal power against SVD order.
    SweepSvd(Common),
    /// Write one realization (users, symbols, scatterers) as JSON.
    SceneDump {
        #[command(flatten)]
        common: Common,
        /// Realization index.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Check a scenario and estimate its cost without simulating.
    Validate(Common),
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: could not size thread pool: {e}");
                }
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }
    let (cmd, common) = match args.cmd {
        Cmd::Acf(c) => (Command::Acf, c),
        Cmd::Ccf(c) => (Command::Ccf, c),
        Cmd::CapacitySu(c) => (Command::CapacitySu, c),
        Cmd::CapacityMu { common, scene } => (Command::CapacityMu { scene }, common),
        Cmd::Dof(c) => (Command::Dof, c),
        Cmd::Pattern(c) => (Command::Pattern, c),
        Cmd::SweepSvd(c) => (Command::SweepSvd, c),
        Cmd::SceneDump { common, index } => (Command::SceneDump { index }, common),
        Cmd::Validate(c) => (Command::Validate, c),
    };
    match run(&cmd, &common.config, &common.overrides, common.out.as_deref()) {
        Ok(out) => {
            if let Some(report) = out.report {
                print!("{report}");
            }
            for f in out.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
