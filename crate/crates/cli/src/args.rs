use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use throttlab::{Mechanism, QuotaMode, RandomizationScheme, ThrottleKind, WeightingConvention};

#[derive(Debug, Parser)]
#[command(name = "throttlab", version, about = "Auction A/B experiments under interference and quota throttling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact bias of the single-query toy examples.
    Toy {
        #[command(subcommand)]
        which: Toy,
    },
    /// Exact expectations by enumeration for an instance file.
    Oracle(OracleArgs),
    /// Run a Monte Carlo study and write one row per cell.
    Simulate(SimulateArgs),
    /// Summarize a study CSV as quota-by-parameter tables.
    Report {
        /// CSV produced by `simulate`.
        csv: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum Toy {
    /// K bidders with common control bid R0 and treatment bid R1.
    Identical {
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 5.0)]
        r0: f64,
        #[arg(long, default_value_t = 6.0)]
        r1: f64,
    },
    /// Every treatment bid exceeds every control bid.
    Dominating {
        /// Control bids, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [4.0, 4.25, 4.5, 4.75])]
        b0: Vec<f64>,
        /// Treatment bids, comma separated and strictly decreasing.
        #[arg(long, value_delimiter = ',', default_values_t = [6.0, 5.5, 5.25, 5.0])]
        b1: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MechanismArg {
    FirstPrice,
    SecondPrice,
}

impl From<MechanismArg> for Mechanism {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::FirstPrice => Mechanism::FirstPrice,
            MechanismArg::SecondPrice => Mechanism::SecondPrice,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    HorvitzThompson,
    Unweighted,
}

impl From<ConventionArg> for WeightingConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::HorvitzThompson => WeightingConvention::HorvitzThompson,
            ConventionArg::Unweighted => WeightingConvention::Unweighted,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ThrottleArg {
    Standard,
    QuotaTreatment,
}

impl From<ThrottleArg> for ThrottleKind {
    fn from(t: ThrottleArg) -> Self {
        match t {
            ThrottleArg::Standard => ThrottleKind::Standard,
            ThrottleArg::QuotaTreatment => ThrottleKind::QuotaTreatment,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum QuotaModeArg {
    None,
    Joint,
    Split,
}

impl From<QuotaModeArg> for QuotaMode {
    fn from(m: QuotaModeArg) -> Self {
        match m {
            QuotaModeArg::None => QuotaMode::None,
            QuotaModeArg::Joint => QuotaMode::Joint,
            QuotaModeArg::Split => QuotaMode::Split,
        }
    }
}

/// `query_balanced`, `pair_balanced`, `query_bernoulli:P` or
/// `pair_bernoulli:P` (parentheses also accepted).
pub fn parse_scheme(s: &str) -> Result<RandomizationScheme, String> {
    let s = s.trim();
    let (name, arg) = match s.find([':', '(']) {
        Some(i) => (&s[..i], Some(s[i + 1..].trim_end_matches(')'))),
        None => (s, None),
    };
    let p = || -> Result<f64, String> {
        let text = arg.ok_or_else(|| format!("`{name}` needs a probability, e.g. {name}:0.5"))?;
        text.parse::<f64>().map_err(|e| format!("bad probability `{text}`: {e}"))
    };
    let scheme = match name {
        "query_balanced" => RandomizationScheme::QueryBalanced,
        "pair_balanced" => RandomizationScheme::PairBalanced,
        "query_bernoulli" => RandomizationScheme::QueryBernoulli { p: p()? },
        "pair_bernoulli" => RandomizationScheme::PairBernoulli { p: p()? },
        other => return Err(format!("unknown scheme `{other}`")),
    };
    scheme.validate().map_err(|e| e.to_string())?;
    Ok(scheme)
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Instance JSON, optionally with an `experiment` section.
    #[arg(long)]
    pub instance: PathBuf,
    /// Randomization scheme, e.g. `query_balanced` or `pair_bernoulli:0.5`.
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<RandomizationScheme>,
    #[arg(long, value_enum)]
    pub throttle: Option<ThrottleArg>,
    #[arg(long, value_enum)]
    pub quota_mode: Option<QuotaModeArg>,
    /// Same quota for every advertiser (split mode halves it).
    #[arg(long, conflicts_with = "quota_fraction")]
    pub quota: Option<u32>,
    /// Quota as a fraction of each advertiser's eligible queries.
    #[arg(long)]
    pub quota_fraction: Option<f64>,
    #[arg(long, value_enum)]
    pub convention: Option<ConventionArg>,
    #[arg(long, value_enum)]
    pub mechanism: Option<MechanismArg>,
    #[arg(long)]
    pub max_assignments: Option<u128>,
    #[arg(long)]
    pub max_masks: Option<u128>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Study configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: TableFormat,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn scheme_spellings() {
        assert_eq!(parse_scheme("query_balanced"), Ok(RandomizationScheme::QueryBalanced));
        assert_eq!(parse_scheme("pair_bernoulli:0.5"), Ok(RandomizationScheme::PairBernoulli { p: 0.5 }));
        assert_eq!(parse_scheme("query_bernoulli(0.3)"), Ok(RandomizationScheme::QueryBernoulli { p: 0.3 }));
        assert!(parse_scheme("pair_bernoulli").is_err());
        assert!(parse_scheme("pair_bernoulli:1.5").is_err());
        assert!(parse_scheme("coin").is_err());
    }
}
