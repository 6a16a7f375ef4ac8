//! `curve` and `sample`: evaluate or draw one statistic of the rate vector.

use std::io::{self, Write};

use expstat::montecarlo::{self, Statistic};
use expstat::orderstats::{
    max_cdf, min_law, order_statistic_cdf, order_statistic_pdf, OrderStatisticRequest,
};
use expstat::{Hypoexponential, RateVector, SampleBatch};

use crate::args::{CurveArgs, Quantity, Range, SampleArgs, StatArg};
use crate::format::format_g17;
use crate::CliError;

/// Resolves `--stat` and `--r`; `r` must be given exactly for `order`.
pub fn statistic(stat: StatArg, r: Option<usize>, rates: &RateVector) -> Result<Statistic, CliError> {
    let stat = match (stat, r) {
        (StatArg::Sum, None) => Statistic::Sum,
        (StatArg::Min, None) => Statistic::Min,
        (StatArg::Max, None) => Statistic::Max,
        (StatArg::Order, Some(r)) => Statistic::Order(r),
        (StatArg::Order, None) => {
            return Err(CliError::Usage("`--stat order` requires `--r`".into()))
        }
        (_, Some(_)) => {
            return Err(CliError::Usage("`--r` is only valid with `--stat order`".into()))
        }
    };
    if let Statistic::Order(r) = stat {
        if r == 0 || r > rates.len() {
            return Err(CliError::Usage(format!(
                "`--r` must lie in 1..={}, got {r}",
                rates.len()
            )));
        }
    }
    Ok(stat)
}

/// A validated `curve` invocation.
#[derive(Debug, Clone)]
pub struct CurveRequest {
    pub statistic: Statistic,
    pub rates: RateVector,
    pub range: Range,
    pub points: usize,
    pub quantity: Quantity,
}

impl CurveRequest {
    pub fn from_args(args: &CurveArgs) -> Result<Self, CliError> {
        Ok(Self {
            statistic: statistic(args.stat, args.r, &args.rates)?,
            rates: args.rates.clone(),
            range: args.range,
            points: args.points,
            quantity: args.quantity,
        })
    }

    /// Equally spaced points from `range.min` to `range.max`, both included.
    pub fn grid(&self) -> Vec<f64> {
        let span = self.range.max - self.range.min;
        let last = self.points - 1;
        (0..self.points)
            .map(|i| {
                if i == last {
                    self.range.max
                } else {
                    self.range.min + span * i as f64 / last as f64
                }
            })
            .collect()
    }

    /// `(z, value)` rows.
    pub fn evaluate(&self) -> expstat::Result<Vec<(f64, f64)>> {
        let eval = self.evaluator()?;
        self.grid()
            .into_iter()
            .map(|z| Ok((z, eval(z)?)))
            .collect()
    }

    fn evaluator(&self) -> expstat::Result<Box<dyn Fn(f64) -> expstat::Result<f64>>> {
        let rates = self.rates.clone();
        let pdf = self.quantity == Quantity::Pdf;
        Ok(match self.statistic {
            Statistic::Sum => {
                let law = Hypoexponential::new(rates);
                if pdf {
                    Box::new(move |z| law.pdf(z))
                } else {
                    Box::new(move |z| law.cdf(z))
                }
            }
            Statistic::Min => {
                let law = min_law(&rates);
                if pdf {
                    Box::new(move |z| law.pdf(z))
                } else {
                    Box::new(move |z| law.cdf(z))
                }
            }
            Statistic::Max if !pdf => Box::new(move |z| max_cdf(&rates, z)),
            Statistic::Max | Statistic::Order(_) => {
                let r = match self.statistic {
                    Statistic::Order(r) => r,
                    _ => rates.len(),
                };
                let req = OrderStatisticRequest::new(rates, r)?;
                if pdf {
                    Box::new(move |z| order_statistic_pdf(&req, z))
                } else {
                    Box::new(move |z| order_statistic_cdf(&req, z))
                }
            }
        })
    }
}

pub fn write_curve<W: Write>(rows: &[(f64, f64)], out: &mut W) -> io::Result<()> {
    writeln!(out, "z,value")?;
    for &(z, v) in rows {
        writeln!(out, "{},{}", format_g17(z), format_g17(v))?;
    }
    Ok(())
}

pub fn cmd_curve<W: Write>(args: &CurveArgs, out: &mut W) -> Result<(), CliError> {
    let req = CurveRequest::from_args(args)?;
    let rows = req.evaluate()?;
    write_curve(&rows, out)?;
    Ok(())
}

pub fn draw(args: &SampleArgs) -> Result<SampleBatch, CliError> {
    let stat = statistic(args.stat, args.r, &args.rates)?;
    Ok(montecarlo::sample(stat, &args.rates, args.count, args.seed, 0)?)
}

pub fn write_sample<W: Write>(batch: &SampleBatch, out: &mut W) -> io::Result<()> {
    writeln!(out, "value")?;
    for &v in &batch.values {
        writeln!(out, "{}", format_g17(v))?;
    }
    Ok(())
}

pub fn cmd_sample<W: Write>(args: &SampleArgs, out: &mut W) -> Result<(), CliError> {
    let batch = draw(args)?;
    write_sample(&batch, out)?;
    Ok(())
}
