//! `comtrap`: command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure. Failures also
//! print a one-line JSON object on stderr.

mod commands;
mod parse;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use comtrap::ErrorKind;

use commands::{CheckArgs, FewBodyArgs, SpectrumArgs, TrajectoryArgs, VerifyArgs, WindowArgs};

#[derive(Debug, Parser)]
#[command(name = "comtrap", version, about = "Center-of-mass dynamics in harmonic traps")]
struct Cli {
    /// Worker threads for data-parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run every sweep on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mode frequencies over a range of rotation speeds (CSV).
    Spectrum(SpectrumArgs),
    /// Edges of the rotational instability window (JSON).
    Window(WindowArgs),
    /// Classical center-of-mass trajectory (CSV).
    Trajectory(TrajectoryArgs),
    /// Displacement solution-family check on a mean-field ground state (JSON).
    VerifyFamily(VerifyArgs),
    /// Two-particle spectrum and ladder decomposition (JSON).
    Fewbody(FewBodyArgs),
    /// Validate a config and print its derived quantities (JSON).
    Check(CheckArgs),
}

/// A computation that ran but did not meet its own acceptance check.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct CheckFailed(pub String);

fn classify(err: &anyhow::Error) -> ErrorKind {
    for cause in err.chain() {
        if cause.is::<CheckFailed>() {
            return ErrorKind::Numerical;
        }
        let kind = if let Some(e) = cause.downcast_ref::<comtrap::config::ConfigError>() {
            Some(e.kind())
        } else if let Some(e) = cause.downcast_ref::<comtrap::trap::TrapError>() {
            Some(e.kind())
        } else if let Some(e) = cause.downcast_ref::<comtrap::spectral::SpectralError>() {
            Some(e.kind())
        } else if let Some(e) = cause.downcast_ref::<comtrap::classical::ClassicalError>() {
            Some(e.kind())
        } else if let Some(e) = cause.downcast_ref::<comtrap::meanfield::MeanFieldError>() {
            Some(e.kind())
        } else {
            cause.downcast_ref::<comtrap::fewbody::FewBodyError>().map(|e| e.kind())
        };
        if let Some(kind) = kind {
            return kind;
        }
    }
    ErrorKind::Validation
}

fn fail(kind: ErrorKind, message: &str) -> ExitCode {
    let (label, code) = match kind {
        ErrorKind::Validation => ("validation", 1),
        ErrorKind::Numerical => ("numerical", 2),
    };
    let body = serde_json::json!({ "error": label, "message": message });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(n > 0, "--threads must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let exec = if cli.sequential {
        comtrap::Execution::Sequential
    } else {
        comtrap::Execution::Parallel
    };
    match cli.command {
        Command::Spectrum(a) => commands::spectrum(&a, exec),
        Command::Window(a) => commands::window(&a),
        Command::Trajectory(a) => commands::trajectory(&a),
        Command::VerifyFamily(a) => commands::verify_family(&a),
        Command::Fewbody(a) => commands::fewbody(&a, exec),
        Command::Check(a) => commands::check(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COMTRAP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            eprint!("{message}");
            return fail(ErrorKind::Validation, message.lines().next().unwrap_or("invalid arguments"));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(classify(&e), &format!("{e:#}")),
    }
}
