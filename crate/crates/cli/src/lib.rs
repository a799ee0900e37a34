//! Command-line front end for the `fraclab` numerical laboratory.
//!
//! Every subcommand resolves a [`RunConfig`], writes its artifacts through a
//! [`Writer`] and finishes with a `manifest.json` of SHA-256 digests.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fraclab::par::Execution;
use serde::Serialize;

use config::{parse_config, Command, ConfigError, ConfigFile, RunConfig, Settings};
use output::{drift, read_manifest, RunManifest, Writer};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical error: {0}")]
    Numerical(#[from] fraclab::Error),
    #[error("i/o error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("output error: {0}")]
    Internal(String),
    #[error("outputs differ from the previous manifest:\n  {}", .0.join("\n  "))]
    Drift(Vec<String>),
}

impl CliError {
    /// Process exit status: 1 drift, 2 bad input, 3 numerical failure, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        use fraclab::Error as E;
        match self {
            CliError::Drift(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(e) => match e {
                E::InvalidOrder(_)
                | E::UnsupportedDimension(_)
                | E::EmptyGrid
                | E::LengthMismatch { .. }
                | E::ModesOutOfRange { .. }
                | E::InvalidRegion(_)
                | E::EmptyRegion
                | E::InvalidHorizon(_)
                | E::InvalidSource(_)
                | E::InvalidArgument(_) => 2,
                _ => 3,
            },
            CliError::Io { .. } | CliError::Internal(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        use fraclab::Error as E;
        match self {
            CliError::Numerical(E::Uncontrollable { .. }) => "uncontrollable",
            CliError::Numerical(E::IllConditioned { .. }) => "ill-conditioned",
            CliError::Numerical(E::NoConvergence { .. }) => "no-convergence",
            CliError::Numerical(E::InaccurateEigenpair { .. }) => "inaccurate-eigenpair",
            CliError::Numerical(_) => "invalid-input",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Internal(_) => "output",
            CliError::Drift(_) => "drift",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fraclab",
    version,
    about = "Fractional Laplacian spectra, dynamics and control"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArg,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CommandArg {
    /// Lowest eigenvalues against the asymptotic law.
    Spectrum,
    /// Eigenvalue gaps and the uniform/vanishing verdict.
    Gaps,
    /// Free Schrödinger and wave evolution with conserved quantities.
    Evolve,
    /// Boundary observability constants for each truncation K.
    Observability,
    /// Observability constants across β and K with a verdict per β.
    Sharpness,
    /// HUM control steering a truncated state to zero.
    Hum,
    /// Boundary-trace identities and the two-sided estimate ratio.
    Pohozaev,
    /// Eigen diagnostics over a (β, n) grid.
    Sweep,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Spectrum => Command::Spectrum,
            CommandArg::Gaps => Command::Gaps,
            CommandArg::Evolve => Command::Evolve,
            CommandArg::Observability => Command::Observability,
            CommandArg::Sharpness => Command::Sharpness,
            CommandArg::Hum => Command::Hum,
            CommandArg::Pohozaev => Command::Pohozaev,
            CommandArg::Sweep => Command::Sweep,
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// INI configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<String>,
    /// Fractional order(s), comma separated.
    #[arg(long, global = true, value_name = "LIST", allow_hyphen_values = true)]
    pub beta: Option<String>,
    /// Interior grid size(s), comma separated.
    #[arg(long, global = true, value_name = "LIST", allow_hyphen_values = true)]
    pub n: Option<String>,
    /// Number of modes K, comma separated.
    #[arg(long, global = true, value_name = "LIST", allow_hyphen_values = true)]
    pub modes: Option<String>,
    /// Time horizon.
    #[arg(
        long = "T",
        global = true,
        value_name = "T",
        allow_hyphen_values = true
    )]
    pub horizon: Option<String>,
    /// Width of the boundary observation region.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub epsilon: Option<String>,
    /// Seed for random initial data.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub seed: Option<String>,
    /// Omit the timestamp from the manifest and plots.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Compare the new artifacts against the existing manifest.
    #[arg(long, global = true)]
    pub verify: bool,
    /// Run batch work on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

impl CommonArgs {
    fn overrides(&self) -> Result<Settings, ConfigError> {
        let mut s = Settings::default();
        for (flag, key, value) in [
            ("out", "out", &self.out),
            ("beta", "beta", &self.beta),
            ("n", "n", &self.n),
            ("modes", "modes", &self.modes),
            ("T", "t", &self.horizon),
            ("epsilon", "epsilon", &self.epsilon),
            ("seed", "seed", &self.seed),
        ] {
            if let Some(v) = value {
                s.set_flag(flag, key, v)?;
            }
        }
        Ok(s)
    }
}

/// Resolve the configuration for `cli` without running anything.
pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let file = match &cli.common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            parse_config(&text).map_err(|e| ConfigError {
                line: None,
                message: format!("{}: {e}", path.display()),
            })?
        }
        None => ConfigFile::default(),
    };
    Ok(RunConfig::resolve(
        cli.command.into(),
        &file,
        &cli.common.overrides()?,
    )?)
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

/// Run the selected command and return the manifest it wrote.
pub fn run(cli: &Cli) -> Result<RunManifest, CliError> {
    let cfg = resolve(cli)?;
    let exec = if cli.common.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let previous = if cli.common.verify {
        read_manifest(&cfg.out)?
    } else {
        None
    };
    // under --verify the run must be byte-comparable, so no wall-clock time
    let timestamp = (!cli.common.no_timestamp && !cli.common.verify)
        .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    let mut writer = Writer::create(&cfg.out, timestamp)?;
    let outcome = commands::execute(&cfg, &mut writer, exec);
    if let Err(e) = &outcome {
        if !matches!(e, CliError::Numerical(_)) {
            return Err(outcome.unwrap_err());
        }
        writer.json(
            "error.json",
            &ErrorReport {
                error: e.kind(),
                message: e.to_string(),
                exit_code: e.exit_code(),
            },
        )?;
    }
    let manifest = writer.finish(&cfg)?;
    outcome?;
    if cli.common.verify {
        let diffs = match &previous {
            Some(prev) => drift(prev, &manifest),
            None => vec![format!("no previous manifest in {}", cfg.out.display())],
        };
        if !diffs.is_empty() {
            return Err(CliError::Drift(diffs));
        }
    }
    Ok(manifest)
}
