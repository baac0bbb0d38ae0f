//! Command-line driver: configuration, run directories, sweeps and resume.

pub mod config;
pub mod run;

use std::path::PathBuf;

use clap::Parser;

pub use config::{Command, RunConfig, Source};
pub use run::{analyze_dir, exit_code, run, Analysis, RunOptions, SweepRow};

use crate::error::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "snlab", about = "Schrödinger–Newton simulations")]
pub struct Args {
    /// One of: stationary-spherical, stationary-axi, stationary-rotating,
    /// evolve-spherical, evolve-axi, evolve-planar, sweep-gaussian, analyze.
    pub command: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Continue the run in this directory from its latest checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Single worker, deterministic ordering.
    #[arg(long)]
    pub serial: bool,
}

fn load(args: &Args) -> Result<(RunConfig, RunOptions)> {
    let command = Command::parse(&args.command).ok_or_else(|| Error::Config {
        line: 0,
        key: "command".into(),
        message: format!("unknown command `{}`", args.command),
    })?;
    let opts = RunOptions { resume: args.resume.clone(), workers: args.workers, serial: args.serial };
    let path = match (&args.config, &args.resume) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => dir.join(run::CONFIG_FILE),
        (None, None) => {
            return Err(Error::Config { line: 0, key: "--config".into(), message: "a config file is required".into() });
        }
    };
    let cfg = RunConfig::from_file(&path).map_err(|e| match e {
        Error::Io(io) => Error::Config { line: 0, key: "--config".into(), message: format!("{}: {io}", path.display()) },
        other => other,
    })?;
    if cfg.command != command {
        return Err(Error::Config {
            line: 0,
            key: "run.command".into(),
            message: format!("config is for `{}`, not `{}`", cfg.command.name(), command.name()),
        });
    }
    Ok((cfg, opts))
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = load(&args).and_then(|(cfg, opts)| run(&cfg, &opts));
    match outcome {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("snlab: {e}");
            exit_code(&e)
        }
    }
}
