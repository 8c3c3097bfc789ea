mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use riskcal::probes::{DEFAULT_PROBES, DEFAULT_SEED};
use riskcal::DEFAULT_TOLERANCE;

/// Coherent utilities on finite filtered spaces: evaluation, commonotone
/// lifts and time-consistency audits.
#[derive(Debug, Parser)]
#[command(name = "riskcal", version)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Space file (JSON).
    #[arg(long, global = true)]
    pub space: Option<PathBuf>,

    /// Utility file (JSON); overrides the utility inside the space file.
    #[arg(long, global = true)]
    pub utility: Option<PathBuf>,

    /// Resolution of the uniform grid used by lifts.
    #[arg(long, global = true)]
    pub grid_n: Option<usize>,

    /// Number of random probes.
    #[arg(long, global = true, default_value_t = DEFAULT_PROBES)]
    pub probes: usize,

    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Absolute tolerance for audits.
    #[arg(long, global = true, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Extra probe payoff, comma separated. Repeatable.
    #[arg(long = "x", global = true, value_parser = parse_vector, allow_hyphen_values = true)]
    pub x: Vec<Vector>,

    /// First lift input, comma separated.
    #[arg(long, global = true, value_parser = parse_vector, allow_hyphen_values = true)]
    pub f: Option<Vector>,

    /// Second lift input, comma separated.
    #[arg(long, global = true, value_parser = parse_vector, allow_hyphen_values = true)]
    pub g: Option<Vector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check masses and the F1 partition.
    Validate,
    /// Evaluate the utility on probes.
    Eval,
    /// Build the commonotone lift of (f, g).
    Lift,
    /// Audit u02 against the recomposition u01 ∘ u12.
    TcCheck,
    /// Decompose centered probes into the two acceptability cones.
    ConeCheck,
    /// Run a bundled demonstration.
    Demo {
        #[arg(value_enum)]
        which: Demo,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Demo {
    Incompatibility,
    Multiperiod,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Eval => "eval",
            Command::Lift => "lift",
            Command::TcCheck => "tc-check",
            Command::ConeCheck => "cone-check",
            Command::Demo {
                which: Demo::Incompatibility,
            } => "demo incompatibility",
            Command::Demo {
                which: Demo::Multiperiod,
            } => "demo multiperiod",
        }
    }
}

/// Comma-separated payoff given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(pub Vec<f64>);

fn parse_vector(s: &str) -> Result<Vector, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()
        .map(Vector)
}

fn main() -> ExitCode {
    let config = RunConfig::parse();
    match commands::run(&config) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
