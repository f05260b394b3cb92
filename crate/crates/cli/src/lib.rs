//! Command-line front end: loads model files, dispatches analyses, and writes
//! JSON reports and CSV tables.

pub mod commands;
pub mod model;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

pub use model::{load_model, parse_model, serialize_model, GeneratorModel, ModelFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid model: {0}")]
    Invariant(String),
    #[error("{0}")]
    Usage(String),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("certificate is not strict")]
    NotStrict,
}

impl CliError {
    pub(crate) fn schema(path: &str, message: String) -> Self {
        Self::Schema {
            path: if path.is_empty() {
                ".".into()
            } else {
                path.into()
            },
            message,
        }
    }

    pub(crate) fn invariant(e: impl std::fmt::Display) -> Self {
        Self::Invariant(e.to_string())
    }

    pub(crate) fn usage(e: impl std::fmt::Display) -> Self {
        Self::Usage(e.to_string())
    }

    pub(crate) fn compute(e: impl std::fmt::Display) -> Self {
        Self::Compute(e.to_string())
    }

    /// 1 for a strict request that failed, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::NotStrict => 1,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Schema { .. } => "schema",
            Self::Invariant(_) => "invariant",
            Self::Usage(_) => "usage",
            Self::Compute(_) => "compute",
            Self::Io(_) => "io",
            Self::NotStrict => "not_strict",
        }
    }

    /// Structured form written to standard error.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            path: Option<&'a str>,
        }
        let path = match self {
            Self::Schema { path, .. } => Some(path.as_str()),
            _ => None,
        };
        serde_json::to_string(&Report {
            error: self.kind(),
            message: self.to_string(),
            path,
        })
        .expect("error report serializes")
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "peripheral",
    version,
    about = "Peripheral decompositions, quasi-compactness certificates and QSD analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Peripheral decomposition and its reconstruction error curve.
    Decompose(DecomposeArgs),
    /// Quasi-compactness certificate.
    Certify(CertifyArgs),
    /// Quasi-stationary distributions and conditioned laws.
    Qsd(QsdArgs),
    /// Monte Carlo paths of the absorbed chain.
    Simulate(SimulateArgs),
    /// Continuous-time semigroup checks for a generator.
    Semigroup(SemigroupArgs),
}

#[derive(Debug, Args)]
pub struct Io {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub io: Io,
    /// Largest `n` in the error curve `α_{nd+k}`.
    #[arg(long, default_value_t = 60)]
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CertificateChoice {
    /// Lazy-chain domination `P ≤ a 1⊗μ + diag(ρ_δ)` with `μ` uniform.
    Lazy,
    /// Drift off `E_K` plus local domination on it, with `K = 1_{E_K} P`.
    Lyapunov,
    /// Lower bound `r(P) ≥ min Pφ/φ` with `φ ≡ 1`.
    Lower,
    /// Density criterion for `density` models.
    Density,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub io: Io,
    #[arg(long, value_enum)]
    pub kind: CertificateChoice,
    /// Comma-separated state indices of `E_K`.
    #[arg(long, value_delimiter = ',')]
    pub ek: Option<Vec<usize>>,
    /// Exit with status 1 unless the certificate is strict.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct QsdArgs {
    #[command(flatten)]
    pub io: Io,
    /// Steps of the conditioned law to tabulate.
    #[arg(long, default_value_t = 50)]
    pub horizon: usize,
    /// Initial state (Dirac initial law).
    #[arg(long, default_value_t = 0)]
    pub start: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub io: Io,
    #[arg(long, default_value_t = 30)]
    pub horizon: usize,
    #[arg(long, default_value_t = 100_000)]
    pub paths: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub start: usize,
}

#[derive(Debug, Args)]
pub struct SemigroupArgs {
    #[command(flatten)]
    pub io: Io,
    /// Reference time `T`.
    #[arg(long, default_value_t = 1.0)]
    pub time: f64,
    /// Poisson-tail tolerance of the uniformization series.
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
    /// Times `(T1, T2)` compared by the propagation check.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.7])]
    pub propagate: Vec<f64>,
}

/// Runs one command; outputs are written before a non-strict certificate is
/// reported as an error.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Decompose(args) => commands::decompose(&args),
        Command::Certify(args) => commands::certify(&args),
        Command::Qsd(args) => commands::qsd(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Semigroup(args) => commands::semigroup(&args),
    }
}
