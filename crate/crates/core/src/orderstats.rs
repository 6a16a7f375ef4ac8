//! Laws of the extremes and of general order statistics.

use crate::convolution::conv_mixture;
use crate::error::{check_non_negative, check_rate, Error, Result};
use crate::exponential::ExponentialLaw;
use crate::mixture::{clamp_probability, SignedExponentialMixture, Term};
use crate::rates::RateVector;
use crate::rng::RngStream;
use crate::summation::CompensatedSum;

/// Largest `N` for which the `2^N − 1` term inclusion–exclusion mixture of
/// the maximum is built.
pub const SUBSET_LIMIT: usize = 25;

/// The `r`-th smallest of the variables, `1 ≤ r ≤ N`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderStatisticRequest {
    rates: RateVector,
    r: usize,
}

impl OrderStatisticRequest {
    pub fn new(rates: RateVector, r: usize) -> Result<Self> {
        if r == 0 || r > rates.len() {
            return Err(Error::Domain(format!(
                "order r = {r} outside 1..={}",
                rates.len()
            )));
        }
        Ok(Self { rates, r })
    }

    pub fn rates(&self) -> &RateVector {
        &self.rates
    }

    pub fn r(&self) -> usize {
        self.r
    }
}

/// The minimum is `Exp(Σ λ_n)`.
pub fn min_law(rates: &RateVector) -> ExponentialLaw {
    ExponentialLaw::new(rates.total_rate()).expect("sum of positive rates is positive")
}

fn check_subset_limit(rates: &RateVector) -> Result<()> {
    if rates.len() > SUBSET_LIMIT {
        return Err(Error::Capacity(format!(
            "inclusion-exclusion over {} rates exceeds the limit of {SUBSET_LIMIT}; \
             use max_cdf or sampling instead",
            rates.len()
        )));
    }
    Ok(())
}

/// Density of the maximum by inclusion–exclusion: one term
/// `(−1)^{|S|+1} λ_S e^{−λ_S z}` per non-empty subset `S`, with `λ_S` the
/// subset's rate sum. Subsets with equal sums are merged.
pub fn max_mixture(rates: &RateVector) -> Result<SignedExponentialMixture> {
    check_subset_limit(rates)?;
    let rs = rates.rates();
    let count = 1usize << rs.len();
    let mut sums = vec![0.0f64; count];
    let mut terms = Vec::with_capacity(count - 1);
    for mask in 1..count {
        let low = mask.trailing_zeros() as usize;
        let s = sums[mask & (mask - 1)] + rs[low];
        sums[mask] = s;
        let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
        terms.push(Term::new(sign * s, s, 0));
    }
    drop(sums);
    SignedExponentialMixture::density(terms)
}

pub fn max_pdf(rates: &RateVector, z: f64) -> Result<f64> {
    let v = max_mixture(rates)?.eval(z)?;
    Ok(v.max(0.0))
}

/// `Π_n (1 − e^{−λ_n z})`.
pub fn max_cdf(rates: &RateVector, z: f64) -> Result<f64> {
    check_non_negative("z", z)?;
    Ok(rates
        .rates()
        .iter()
        .map(|&l| -(-l * z).exp_m1())
        .product())
}

/// Density of `M_2 − m_2`: `λ_1/(λ_1+λ_2) f_2 + λ_2/(λ_1+λ_2) f_1`.
pub fn range2_mixture(rate_1: f64, rate_2: f64) -> Result<SignedExponentialMixture> {
    check_rate(rate_1)?;
    check_rate(rate_2)?;
    let total = rate_1 + rate_2;
    SignedExponentialMixture::density(vec![
        Term::new(rate_1 / total * rate_2, rate_2, 0),
        Term::new(rate_2 / total * rate_1, rate_1, 0),
    ])
}

/// Density of `M_2` from the sum law: with probability `λ_1/(λ_1+λ_2)` the
/// maximum is `m_2 + X_2`, otherwise `m_2 + X_1`, where `m_2` is independent
/// of the remaining lifetime.
pub fn max2_via_convolution(rate_1: f64, rate_2: f64) -> Result<SignedExponentialMixture> {
    check_rate(rate_1)?;
    check_rate(rate_2)?;
    let total = rate_1 + rate_2;
    let via_second = conv_mixture(&RateVector::new(vec![total, rate_2])?)?;
    let via_first = conv_mixture(&RateVector::new(vec![total, rate_1])?)?;
    SignedExponentialMixture::sum([
        &via_second.scaled(rate_1 / total)?,
        &via_first.scaled(rate_2 / total)?,
    ])?
    .into_density()
}

/// Draws `X_(r)` by sequential minima: `r` times, advance by an
/// `Exp(Σ remaining)` spacing and retire the variable that fired, chosen
/// with probability `λ_k / Σ remaining`.
pub fn order_statistic_sample(req: &OrderStatisticRequest, rng: &mut RngStream) -> f64 {
    let mut remaining: Vec<f64> = req.rates.rates().to_vec();
    let mut total = req.rates.total_rate();
    let mut elapsed = 0.0;
    for step in 0..req.r {
        elapsed += rng.exponential(total);
        if step + 1 == req.r {
            break;
        }
        let target = rng.uniform() * total;
        let mut acc = 0.0;
        let mut pick = remaining.len() - 1;
        for (k, &l) in remaining.iter().enumerate() {
            acc += l;
            if target < acc {
                pick = k;
                break;
            }
        }
        remaining.swap_remove(pick);
        // recompute rather than subtract to avoid drift
        total = remaining.iter().copied().collect::<CompensatedSum>().value();
    }
    elapsed
}

/// `P(X_(r) ≤ z)`: the probability that at least `r` of the events
/// `{X_n ≤ z}` occur, by the Poisson-binomial recursion.
pub fn order_statistic_cdf(req: &OrderStatisticRequest, z: f64) -> Result<f64> {
    check_non_negative("z", z)?;
    let n = req.rates.len();
    let mut pmf = vec![0.0f64; n + 1];
    pmf[0] = 1.0;
    for (i, &l) in req.rates.rates().iter().enumerate() {
        let p = -(-l * z).exp_m1();
        let q = (-l * z).exp();
        for k in (1..=i + 1).rev() {
            pmf[k] = pmf[k] * q + pmf[k - 1] * p;
        }
        pmf[0] *= q;
    }
    // sum whichever side is small so the result keeps its relative accuracy
    let mut upper = CompensatedSum::new();
    for &v in pmf[req.r..].iter().rev() {
        upper.add(v);
    }
    let upper = upper.value();
    if upper <= 0.5 {
        return Ok(clamp_probability(upper));
    }
    let lower: CompensatedSum = pmf[..req.r].iter().copied().collect();
    Ok(clamp_probability(1.0 - lower.value()))
}

/// Density of `X_(r)`: `Σ_k f_k(z) · P(exactly r − 1 of the others ≤ z)`.
pub fn order_statistic_pdf(req: &OrderStatisticRequest, z: f64) -> Result<f64> {
    check_non_negative("z", z)?;
    let rates = req.rates.rates();
    let mut total = CompensatedSum::new();
    for (k, &lk) in rates.iter().enumerate() {
        let mut pmf = vec![0.0f64; req.r];
        pmf[0] = 1.0;
        for (i, &l) in rates.iter().enumerate() {
            if i == k {
                continue;
            }
            let p = -(-l * z).exp_m1();
            let q = (-l * z).exp();
            for j in (1..req.r).rev() {
                pmf[j] = pmf[j] * q + pmf[j - 1] * p;
            }
            pmf[0] *= q;
        }
        total.add(lk * (-lk * z).exp() * pmf[req.r - 1]);
    }
    Ok(total.value().max(0.0))
}

/// Checks the inclusion–exclusion mixture against the product-form cdf on a
/// grid, returning the largest absolute cdf difference.
pub fn max_mixture_cdf_discrepancy(rates: &RateVector, grid: &[f64]) -> Result<f64> {
    let m = max_mixture(rates)?;
    let mut worst: f64 = 0.0;
    for &z in grid {
        worst = worst.max((m.cdf(z)? - max_cdf(rates, z)?).abs());
    }
    Ok(worst)
}
