//! Command-line grammar.

use clap::{Args, Parser, Subcommand, ValueEnum};
use expstat::RateVector;

/// Seed used when neither `--seed` nor `EXPSTAT_SEED` is given.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "expstat",
    version,
    about = "Exact laws of sums and order statistics of independent exponentials"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a density or distribution function on an equally spaced grid.
    Curve(CurveArgs),
    /// Draw a seeded Monte Carlo sample.
    Sample(SampleArgs),
    /// Run the verification checks on a rate vector.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatArg {
    Sum,
    Min,
    Max,
    Order,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    Pdf,
    Cdf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
}

/// Closed interval `[min, max]` with `0 ≤ min < max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, value_enum)]
    pub stat: StatArg,
    /// Comma-separated positive rates, e.g. `0.5,1`.
    #[arg(long, value_parser = parse_rates, allow_hyphen_values = true)]
    pub rates: RateVector,
    /// Order of the statistic, 1 ≤ r ≤ N; required for `--stat order`.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, value_enum, default_value_t = Quantity::Pdf)]
    pub quantity: Quantity,
    /// Evaluation range `min:max`.
    #[arg(long, value_parser = parse_range, default_value = "0:10", allow_hyphen_values = true)]
    pub range: Range,
    /// Number of grid points, at least 2.
    #[arg(long, default_value_t = 101, value_parser = parse_points)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub stat: StatArg,
    #[arg(long, value_parser = parse_rates, allow_hyphen_values = true)]
    pub rates: RateVector,
    #[arg(long)]
    pub r: Option<usize>,
    /// Number of draws, at least 1.
    #[arg(long, value_parser = parse_count)]
    pub count: usize,
    #[arg(long, env = "EXPSTAT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, value_parser = parse_rates, allow_hyphen_values = true)]
    pub rates: RateVector,
    #[arg(long, env = "EXPSTAT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Draws per goodness-of-fit test.
    #[arg(long, default_value_t = 100_000, value_parser = parse_count)]
    pub samples: usize,
}

pub fn parse_rates(s: &str) -> Result<RateVector, String> {
    let rates = s
        .split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<f64>()
                .map_err(|_| format!("`{part}` is not a decimal number"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    RateVector::new(rates).map_err(|e| e.to_string())
}

pub fn parse_range(s: &str) -> Result<Range, String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected `min:max`, got `{s}`"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("`{v}` is not a finite decimal number"))
    };
    let (min, max) = (parse(lo)?, parse(hi)?);
    if min < 0.0 {
        return Err(format!("range start must be non-negative, got {min}"));
    }
    if min >= max {
        return Err(format!("range start {min} must be below its end {max}"));
    }
    Ok(Range { min, max })
}

fn parse_points(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 2 => Ok(n),
        _ => Err(format!("expected an integer of at least 2, got `{s}`")),
    }
}

fn parse_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("expected a positive integer, got `{s}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_are_validated() {
        assert_eq!(parse_rates("0.5, 1").unwrap().rates(), &[0.5, 1.0]);
        assert!(parse_rates("1,-2").is_err());
        assert!(parse_rates("1,,2").is_err());
        assert!(parse_rates("1,inf").is_err());
        assert!(parse_rates("1,0").is_err());
        assert!(parse_rates("1;2").is_err());
    }

    #[test]
    fn ranges_are_validated() {
        assert_eq!(parse_range("0:8").unwrap(), Range { min: 0.0, max: 8.0 });
        assert!(parse_range("-1:2").is_err());
        assert!(parse_range("2:2").is_err());
        assert!(parse_range("3:1").is_err());
        assert!(parse_range("0-1").is_err());
        assert!(parse_range("0:nan").is_err());
    }

    #[test]
    fn grammar_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
