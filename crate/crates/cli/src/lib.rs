//! Command-line front end for `gpchan`.
//!
//! Exit codes: 0 success, 1 self-test failure, 2 bad input, 3 budget exhausted
//! (or an instance too large for the requested exact method).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod fixtures;
pub mod output;
pub mod selftest;
pub mod spec;

use commands::{parse_rate, RunConfig};
use output::{Format, Units};
use spec::ChannelSpec;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl From<gpchan::Error> for CliError {
    fn from(e: gpchan::Error) -> Self {
        match e {
            gpchan::Error::BudgetExceeded(_) | gpchan::Error::TooLarge(_) => CliError::Budget(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gpchan", version, about = "Capacity, sphere-packing exponent and code error for channels with transmitter state information")]
pub struct Cli {
    /// Channel specification (JSON).
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Units for capacity values; exponent tables are always in nats.
    #[arg(long, global = true, value_enum, default_value = "nats")]
    pub units: Units,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads, 0 for all cores. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Wall-clock budget; results cut short are flagged `budget`.
    #[arg(long, global = true)]
    pub budget_seconds: Option<f64>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Exit 0 even when the budget cut a computation short.
    #[arg(long, global = true)]
    pub allow_partial: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// GP capacity and receiver-CSI capacity with a witness policy.
    Capacity(CapacityArgs),
    /// Sphere-packing exponent at one or more rates.
    Exponent(ExponentArgs),
    /// Sphere-packing exponent over an increasing rate grid.
    Curve(CurveArgs),
    /// Error probability of a code file.
    Simulate(SimulateArgs),
    /// Smallest maximum error over encoder tables.
    Bestcode(BestcodeArgs),
    /// Best-found error at M = ceil(exp(nR)) for several blocklengths.
    Probe(ProbeArgs),
    /// Bundled invariant and oracle checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CapacityArgs {
    /// Cap on auxiliary letters (default |X|·|S| + 1).
    #[arg(long)]
    pub u_cap: Option<usize>,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 0.05)]
    pub s_step: f64,
    #[arg(long, default_value_t = 0.05)]
    pub x_step: f64,
    #[arg(long, default_value_t = 0.1)]
    pub v_step: f64,
    #[arg(long, default_value_t = 1)]
    pub refine_rounds: usize,
    #[arg(long, default_value_t = 2)]
    pub descent_levels: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ExponentArgs {
    /// Rate in nats; `0.4*ln2` and `0.4bits` also work. Comma-separated for several.
    #[arg(long, required = true, value_delimiter = ',', value_parser = parse_rate)]
    pub rate: Vec<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    /// Explicit strictly increasing rates.
    #[arg(long, value_delimiter = ',', value_parser = parse_rate, conflicts_with_all = ["from", "to"])]
    pub rates: Vec<f64>,
    #[arg(long, value_parser = parse_rate)]
    pub from: Option<f64>,
    #[arg(long, value_parser = parse_rate)]
    pub to: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub points: usize,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMethod {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Code file (JSON).
    #[arg(long)]
    pub code: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    pub method: SimMethod,
    /// Monte-Carlo samples per message.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BestcodeArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub messages: Option<usize>,
    /// Derive M = ceil(exp(nR)) from a rate instead.
    #[arg(long, value_parser = parse_rate)]
    pub rate: Option<f64>,
    /// Draw this many random encoders instead of enumerating all of them.
    #[arg(long)]
    pub random: Option<u64>,
    /// Try every decoder rather than maximum likelihood.
    #[arg(long)]
    pub exhaustive_decoder: bool,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_codes: u128,
}

#[derive(Debug, Clone, Args)]
pub struct ProbeArgs {
    #[arg(long, value_parser = parse_rate)]
    pub rate: f64,
    /// Blocklengths, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub n: Vec<usize>,
    /// Random encoders per blocklength when exhaustive search is too large.
    #[arg(long, default_value_t = 10_000)]
    pub random_k: u64,
    #[arg(long)]
    pub exhaustive_decoder: bool,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_codes: u128,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    /// Multiplies every numeric tolerance; values below 1 tighten the suite.
    #[arg(long, default_value_t = 1.0)]
    pub tolerance_scale: f64,
}

/// What the binary prints and how it exits.
pub struct Outcome {
    pub output: String,
    pub code: i32,
    /// Printed to standard error.
    pub note: Option<String>,
}

pub fn load_spec(path: &std::path::Path) -> Result<ChannelSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    ChannelSpec::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn required_spec(cli: &Cli) -> Result<ChannelSpec, CliError> {
    match &cli.spec {
        Some(p) => load_spec(p),
        None => Err(CliError::Input("this command needs --spec".into())),
    }
}

/// Runs one parsed command line. Output files are the caller's business.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = RunConfig::new(cli.units, cli.seed, cli.workers, cli.budget_seconds)?;
    let report = match &cli.command {
        Command::Selftest(args) => {
            let spec = cli.spec.as_deref().map(load_spec).transpose()?;
            let (report, ok) = selftest::run(&cfg, spec.as_ref(), args.tolerance_scale)?;
            let note = (!ok).then(|| {
                let failures = report.json["failures"].as_array().cloned().unwrap_or_default();
                let names: Vec<String> = failures.iter().filter_map(|v| v.as_str().map(String::from)).collect();
                format!("self-test failed: {}", names.join("; "))
            });
            return Ok(Outcome {
                output: report.render(cli.format)?,
                code: if ok { 0 } else { 1 },
                note,
            });
        }
        Command::Capacity(a) => commands::capacity(&required_spec(cli)?, &cfg, a)?,
        Command::Exponent(a) => commands::exponent(&required_spec(cli)?, &cfg, a)?,
        Command::Curve(a) => commands::curve(&required_spec(cli)?, &cfg, a)?,
        Command::Simulate(a) => commands::simulate(&required_spec(cli)?, &cfg, a)?,
        Command::Bestcode(a) => commands::bestcode(&required_spec(cli)?, &cfg, a)?,
        Command::Probe(a) => commands::probe(&required_spec(cli)?, &cfg, a)?,
    };
    let output = report.render(cli.format)?;
    if report.budget && !cli.allow_partial {
        return Ok(Outcome {
            output,
            code: 3,
            note: Some("budget exhausted; the result is partial (pass --allow-partial to accept it)".into()),
        });
    }
    Ok(Outcome { output, code: 0, note: None })
}
