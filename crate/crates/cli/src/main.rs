use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lsmass_cli::{exit, run, write_outputs, Command, ExperimentConfig, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "lsmass", version, about = "Level-set functionals of Green's functions and p-capacitary potentials")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Experiment config (INI).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides [output] directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Multiplies every assertion tolerance.
    #[arg(long = "tol-scale", global = true, default_value_t = 1.0)]
    tol_scale: f64,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Solve the potential(s) and export the tables.
    Solve,
    /// F(t) or F_p(t) sweep with monotonicity report.
    Sweep,
    /// ADM mass three ways.
    Adm,
    /// Capacitary ladder β_p against 2m.
    Penrose,
    /// Pointwise and integrated identity checks.
    Identities,
    /// Asymptotic expansion fit and I_p profiles.
    Fit,
    /// 3D grid solve, level surfaces and F.
    Grid3d,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Solve => Command::Solve,
            Sub::Sweep => Command::Sweep,
            Sub::Adm => Command::Adm,
            Sub::Penrose => Command::Penrose,
            Sub::Identities => Command::Identities,
            Sub::Fit => Command::Fit,
            Sub::Grid3d => Command::Grid3d,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { exit::PASS as u8 });
        }
    };
    ExitCode::from(execute(cli) as u8)
}

fn execute(cli: Cli) -> i32 {
    let Some(path) = cli.config else {
        eprintln!("error: --config PATH is required");
        return exit::USAGE;
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return exit::USAGE;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return exit::USAGE;
        }
    }
    let cfg = match ExperimentConfig::load(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return exit::USAGE;
        }
    };
    let opts = RunOptions { tol_scale: cli.tol_scale };
    let report = match run(&cfg, cli.command.into(), opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return match e {
                RunError::Usage(_) => exit::USAGE,
                RunError::Solver(_) => exit::SOLVER_FAILED,
            };
        }
    };
    let dir = cli.out.unwrap_or_else(|| cfg.output.directory.clone());
    if let Err(e) = write_outputs(&report, &dir) {
        eprintln!("{e}");
        return exit::USAGE;
    }
    print!("{}", report.summary());
    if report.passed() {
        exit::PASS
    } else {
        for a in report.failures() {
            eprintln!("FAILED {} (measured {:e}, bound {:e})", a.name, a.measured, a.bound);
        }
        exit::ASSERTION_FAILED
    }
}
