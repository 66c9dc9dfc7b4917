//! Command-line front end for the `mcs-qkd` rate model.
//!
//! Subcommands: `rate`, `figure1`, `figure2`, `verify`. Exit codes are 0 on
//! success, 1 when verification finds a deviation, 2 for configuration
//! errors and 3 for I/O errors.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Model(#[from] mcs_qkd::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Model(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

/// Secure key rates for weak coherent and modified coherent QKD sources.
#[derive(Debug, Parser)]
#[command(name = "mcsqkd", version)]
pub struct Cli {
    /// `key = value` configuration file; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory for CSV and SVG files.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<String>,
    /// Add the error-correction term instead of subtracting it.
    #[arg(long, global = true)]
    pub paper_literal_sign: bool,
    /// `const:F` or `table:PATH` (two-column `e,f` CSV).
    #[arg(long, global = true, value_name = "POLICY")]
    pub f_policy: Option<String>,
    /// Fiber loss, dB/km.
    #[arg(long, global = true, value_name = "DB_PER_KM")]
    pub a: Option<String>,
    /// Receiver loss, dB.
    #[arg(long, global = true, value_name = "DB")]
    pub receiver_loss: Option<String>,
    /// Detector efficiency.
    #[arg(long, global = true)]
    pub eta_d: Option<String>,
    /// Dark counts per slot.
    #[arg(long, global = true)]
    pub pd: Option<String>,
    /// Baseline error fraction.
    #[arg(long, global = true)]
    pub c: Option<String>,
    /// Any configuration key, e.g. `--set grid_points=400`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate breakdown per family and distance; optimizes the source unless a
    /// parameter is given.
    Rate {
        /// Family name(s), comma separated, or `all`.
        #[arg(long)]
        family: Option<String>,
        /// Mean photon number for `coherent-bb84`.
        #[arg(long)]
        alpha2: Option<String>,
        /// Squeeze parameter for `mcs-bb84` / `mcs-sarg04`.
        #[arg(long)]
        nu: Option<String>,
        /// Distance(s) in km, comma separated.
        #[arg(long)]
        l: Option<String>,
    },
    /// Rate versus source parameter at one distance.
    Figure1 {
        #[arg(long)]
        l: Option<String>,
        /// Upper end of the parameter scan.
        #[arg(long)]
        param_max: Option<String>,
        #[arg(long)]
        points: Option<String>,
    },
    /// Optimal rate versus distance, with cutoff distances.
    Figure2 {
        #[arg(long)]
        l_max: Option<String>,
        #[arg(long)]
        l_step: Option<String>,
    },
    /// Cross-check closed forms against the Fock-sum and quadrature oracles.
    Verify {
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        nu: Option<String>,
        #[arg(long)]
        eta: Option<String>,
        /// Offset added to every closed-form value (checks the checker).
        #[arg(long, hide = true)]
        inject_error: Option<f64>,
    },
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    let mut overrides: Vec<(&str, &str)> = Vec::new();
    fn add<'a>(list: &mut Vec<(&'static str, &'a str)>, key: &'static str, v: &'a Option<String>) {
        if let Some(v) = v {
            list.push((key, v.as_str()));
        }
    }
    let mut push = |key, v| add(&mut overrides, key, v);
    push("out", &cli.out);
    push("f_policy", &cli.f_policy);
    push("a", &cli.a);
    push("receiver_loss", &cli.receiver_loss);
    push("eta_d", &cli.eta_d);
    push("pd", &cli.pd);
    push("c", &cli.c);
    match &cli.command {
        Command::Rate {
            family,
            alpha2,
            nu,
            l,
        } => {
            push("family", family);
            push("alpha2", alpha2);
            push("nu", nu);
            push("l", l);
        }
        Command::Figure1 {
            l,
            param_max,
            points,
        } => {
            push("l", l);
            push("fig1_param_max", param_max);
            push("fig1_points", points);
        }
        Command::Figure2 { l_max, l_step } => {
            push("l_max", l_max);
            push("l_step", l_step);
        }
        Command::Verify { alpha, nu, eta, .. } => {
            push("verify_alpha", alpha);
            push("verify_nu", nu);
            push("verify_eta", eta);
        }
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    for kv in &cli.set {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(CliError::Config(format!(
                "--set expects KEY=VALUE, got `{kv}`"
            )));
        };
        cfg.set(k.trim(), v)?;
    }
    if cli.paper_literal_sign {
        cfg.set("paper_literal_sign", "true")?;
    }
    Ok(cfg)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_CONFIG
                }
            };
        }
    };
    let result = build_config(&cli).and_then(|cfg| match &cli.command {
        Command::Rate { .. } => commands::rate(&cfg, stdout),
        Command::Figure1 { .. } => commands::figure1(&cfg, stdout),
        Command::Figure2 { .. } => commands::figure2(&cfg, stdout),
        Command::Verify { inject_error, .. } => {
            commands::verify(&cfg, inject_error.unwrap_or(0.0), stdout, stderr)
        }
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
