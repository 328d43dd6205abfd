mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Process exit statuses.
pub const EXIT_OK: u8 = 0;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;
pub const EXIT_IO: u8 = 74;
pub const EXIT_USAGE: u8 = 64;

/// An error in the command line or configuration.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    if let Some(e) = err.downcast_ref::<bdfd::Error>() {
        return match e {
            bdfd::Error::InvalidArgument(_)
            | bdfd::Error::UnsupportedOrder { .. }
            | bdfd::Error::Shape(_)
            | bdfd::Error::UnsupportedProblem(_) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return EXIT_IO;
    }
    EXIT_NUMERICAL
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("BDFD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| usage(format!("BDFD_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    init_threads()?;
    match cli.command {
        Command::Gstability(a) => commands::gstability(&a, cli.seed),
        Command::Converge(a) => commands::converge(&a),
        Command::DdeDemo(a) => commands::dde_demo_cmd(&a),
        Command::Coupling(a) => commands::coupling(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
