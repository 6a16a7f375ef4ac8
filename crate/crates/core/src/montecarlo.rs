//! Seeded sampling of sums and order statistics, and the statistical
//! checks (one-sample Kolmogorov–Smirnov, joint-cdf factorization) used to
//! validate the exact laws.

use std::thread;

use crate::error::{Error, Result};
use crate::orderstats::{order_statistic_sample, OrderStatisticRequest};
use crate::rates::RateVector;
use crate::rng::{RngStream, GENERATOR_ID};

/// Asymptotic Kolmogorov–Smirnov constant at α = 0.01.
pub const KS_CRITICAL_001: f64 = 1.628;

/// Minimum sample size accepted by [`factorization_test`].
pub const MIN_FACTORIZATION_PAIRS: usize = 10_000;

/// Which statistic of `X_1..X_N` to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Sum,
    Min,
    Max,
    /// `r`-th smallest, `1 ≤ r ≤ N`.
    Order(usize),
}

/// Draws with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub seed: u64,
    pub stream_id: u64,
    pub count: usize,
    pub generator: &'static str,
}

impl SampleBatch {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.count as f64
    }
}

fn draw_one(stat: Statistic, rates: &[f64], req: Option<&OrderStatisticRequest>, rng: &mut RngStream) -> f64 {
    match stat {
        Statistic::Sum => rates.iter().map(|&l| rng.exponential(l)).sum(),
        Statistic::Min => rates
            .iter()
            .map(|&l| rng.exponential(l))
            .fold(f64::INFINITY, f64::min),
        Statistic::Max => rates.iter().map(|&l| rng.exponential(l)).fold(0.0, f64::max),
        Statistic::Order(_) => order_statistic_sample(req.expect("order request"), rng),
    }
}

/// `count` iid draws of `stat` from stream `(seed, stream_id)`.
pub fn sample(
    stat: Statistic,
    rates: &RateVector,
    count: usize,
    seed: u64,
    stream_id: u64,
) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    let req = match stat {
        Statistic::Order(r) => Some(OrderStatisticRequest::new(rates.clone(), r)?),
        _ => None,
    };
    let mut rng = RngStream::new(seed, stream_id);
    let values = (0..count)
        .map(|_| draw_one(stat, rates.rates(), req.as_ref(), &mut rng))
        .collect();
    Ok(SampleBatch {
        values,
        seed,
        stream_id,
        count,
        generator: GENERATOR_ID,
    })
}

pub fn sample_sum(rates: &RateVector, count: usize, seed: u64) -> Result<SampleBatch> {
    sample(Statistic::Sum, rates, count, seed, 0)
}

pub fn sample_min(rates: &RateVector, count: usize, seed: u64) -> Result<SampleBatch> {
    sample(Statistic::Min, rates, count, seed, 0)
}

pub fn sample_max(rates: &RateVector, count: usize, seed: u64) -> Result<SampleBatch> {
    sample(Statistic::Max, rates, count, seed, 0)
}

pub fn sample_order(rates: &RateVector, r: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    sample(Statistic::Order(r), rates, count, seed, 0)
}

/// Splits `count` draws over `workers` streams (`stream_id = worker index`)
/// and runs them on scoped threads. The concatenated result depends only on
/// `(seed, workers, count)`.
pub fn sample_parallel(
    stat: Statistic,
    rates: &RateVector,
    count: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<SampleBatch>> {
    let workers = workers.max(1).min(count.max(1));
    let base = count / workers;
    let extra = count % workers;
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let n = base + usize::from(w < extra);
                scope.spawn(move || sample(stat, rates, n, seed, w as u64))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampling worker panicked"))
            .collect()
    })
}

/// `count` pairs `(m_N, M_N − m_N)` from one stream.
pub fn sample_min_range_pairs(
    rates: &RateVector,
    count: usize,
    seed: u64,
    stream_id: u64,
) -> Result<Vec<(f64, f64)>> {
    if count == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    let mut rng = RngStream::new(seed, stream_id);
    Ok((0..count)
        .map(|_| {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for &l in rates.rates() {
                let x = rng.exponential(l);
                lo = lo.min(x);
                hi = hi.max(x);
            }
            (lo, hi - lo)
        })
        .collect())
}

/// KS critical value at α = 0.01. For small `n` the Stephens correction
/// `√n + 0.12 + 0.11/√n` replaces `√n`.
pub fn ks_critical_value(n: usize) -> f64 {
    let s = (n as f64).sqrt();
    if n > 35 {
        KS_CRITICAL_001 / s
    } else {
        KS_CRITICAL_001 / (s + 0.12 + 0.11 / s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodnessOfFitReport {
    pub ks_statistic: f64,
    pub n: usize,
    pub critical_value: f64,
    pub passed: bool,
}

/// One-sample KS test of `values` against a continuous `cdf` at α = 0.01.
pub fn ks_test_values<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<GoodnessOfFitReport> {
    if values.is_empty() {
        return Err(Error::Domain("KS test needs a non-empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    let mut prev = f64::NEG_INFINITY;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        if !(-1e-12..=1.0 + 1e-12).contains(&f) {
            return Err(Error::Contract(format!("cdf({x}) = {f} is not a probability")));
        }
        if f < prev - 1e-12 {
            return Err(Error::Contract(format!(
                "cdf is decreasing near {x}: {prev} then {f}"
            )));
        }
        prev = prev.max(f);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    let critical_value = ks_critical_value(n);
    Ok(GoodnessOfFitReport {
        ks_statistic: d,
        n,
        critical_value,
        passed: d < critical_value,
    })
}

pub fn ks_test<F: Fn(f64) -> f64>(batch: &SampleBatch, cdf: F) -> Result<GoodnessOfFitReport> {
    ks_test_values(&batch.values, cdf)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationReport {
    pub max_deviation: f64,
    pub threshold: f64,
    pub n: usize,
    pub passed: bool,
}

/// Empirical independence check: the largest `|Ĥ(u,v) − F̂(u)Ĝ(v)|` over a
/// `grid × grid` lattice of marginal empirical quantiles, against
/// `3 · 1.628 / √n`.
pub fn factorization_test(pairs: &[(f64, f64)], grid: usize) -> Result<FactorizationReport> {
    let n = pairs.len();
    if n < MIN_FACTORIZATION_PAIRS {
        return Err(Error::Domain(format!(
            "factorization test needs at least {MIN_FACTORIZATION_PAIRS} pairs, got {n}"
        )));
    }
    if grid == 0 {
        return Err(Error::Domain("grid must be at least 1×1".into()));
    }
    let cuts = |coord: &dyn Fn(&(f64, f64)) -> f64| -> Vec<f64> {
        let mut v: Vec<f64> = pairs.iter().map(coord).collect();
        v.sort_unstable_by(f64::total_cmp);
        (1..=grid)
            .map(|i| v[(i * n / (grid + 1)).min(n - 1)])
            .collect()
    };
    let us = cuts(&|p| p.0);
    let vs = cuts(&|p| p.1);
    // bucket b means "≤ cut b and above cut b−1"; grid means above every cut
    let bucket = |cuts: &[f64], x: f64| cuts.partition_point(|&c| c < x);

    let mut joint = vec![vec![0usize; grid + 1]; grid + 1];
    for &(x, y) in pairs {
        joint[bucket(&us, x)][bucket(&vs, y)] += 1;
    }
    // cumulative counts
    for i in 0..=grid {
        for j in 0..=grid {
            let up = if i > 0 { joint[i - 1][j] } else { 0 };
            let left = if j > 0 { joint[i][j - 1] } else { 0 };
            let diag = if i > 0 && j > 0 { joint[i - 1][j - 1] } else { 0 };
            joint[i][j] = joint[i][j] + up + left - diag;
        }
    }
    let nf = n as f64;
    let mut worst: f64 = 0.0;
    for i in 0..grid {
        for j in 0..grid {
            let h = joint[i][j] as f64 / nf;
            let f = joint[i][grid] as f64 / nf;
            let g = joint[grid][j] as f64 / nf;
            worst = worst.max((h - f * g).abs());
        }
    }
    let threshold = 3.0 * KS_CRITICAL_001 / nf.sqrt();
    Ok(FactorizationReport {
        max_deviation: worst,
        threshold,
        n,
        passed: worst <= threshold,
    })
}

/// Pearson correlation of two equal-length samples.
pub fn cross_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponential::ExponentialLaw;

    fn rv(r: &[f64]) -> RateVector {
        RateVector::new(r.to_vec()).unwrap()
    }

    #[test]
    fn batches_are_reproducible() {
        let r = rv(&[1.0, 2.0, 3.0]);
        for stat in [Statistic::Sum, Statistic::Min, Statistic::Max, Statistic::Order(2)] {
            let a = sample(stat, &r, 1000, 99, 4).unwrap();
            let b = sample(stat, &r, 1000, 99, 4).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.count, a.values.len());
            assert!(a.values.iter().all(|&x| x > 0.0));
        }
        assert!(sample(Statistic::Sum, &r, 0, 1, 0).is_err());
        assert!(sample(Statistic::Order(4), &r, 10, 1, 0).is_err());
    }

    #[test]
    fn parallel_sampling_is_deterministic() {
        let r = rv(&[1.0, 2.0]);
        let a = sample_parallel(Statistic::Max, &r, 10_001, 3, 4).unwrap();
        let b = sample_parallel(Statistic::Max, &r, 10_001, 3, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|b| b.count).sum::<usize>(), 10_001);
        assert_eq!(a[2], sample(Statistic::Max, &r, a[2].count, 3, 2).unwrap());
    }

    #[test]
    fn sample_means_within_clt_band() {
        let r = rv(&[1.0, 2.0]);
        let n = 1_000_000;
        let min = sample_min(&r, n, 17).unwrap();
        assert!((min.mean() - 1.0 / 3.0).abs() < 3.0 * (1.0 / 3.0) / 1000.0);
        let sum = sample_sum(&r, n, 18).unwrap();
        // sd of the sum is sqrt(1.25)
        assert!((sum.mean() - 1.5).abs() < 3.0 * 1.25f64.sqrt() / 1000.0);
    }

    #[test]
    fn ks_single_point() {
        let law = ExponentialLaw::new(1.0).unwrap();
        let x = 0.8;
        let f = law.cdf(x).unwrap();
        let rep = ks_test_values(&[x], |z| law.cdf(z).unwrap()).unwrap();
        assert!((rep.ks_statistic - f.max(1.0 - f)).abs() < 1e-16);
    }

    #[test]
    fn ks_detects_wrong_rate() {
        let batch = sample(Statistic::Min, &rv(&[1.0]), 100_000, 8, 0).unwrap();
        let e1 = ExponentialLaw::new(1.0).unwrap();
        let e2 = ExponentialLaw::new(2.0).unwrap();
        let good = ks_test(&batch, |z| e1.cdf(z).unwrap()).unwrap();
        assert!(good.passed, "{good:?}");
        let bad = ks_test(&batch, |z| e2.cdf(z).unwrap()).unwrap();
        assert!(!bad.passed);
        assert!((bad.ks_statistic - 0.25).abs() < 0.01);
    }

    #[test]
    fn ks_rejects_non_monotone_cdf() {
        let batch = sample(Statistic::Min, &rv(&[1.0]), 1000, 8, 0).unwrap();
        assert!(matches!(
            ks_test(&batch, |z| (-z).exp()),
            Err(Error::Contract(_))
        ));
        assert!(ks_test_values(&[], |z| z).is_err());
    }

    #[test]
    fn factorization_calibration() {
        let mut rng = RngStream::new(77, 0);
        let indep: Vec<(f64, f64)> =
            (0..100_000).map(|_| (rng.uniform(), rng.uniform())).collect();
        assert!(factorization_test(&indep, 10).unwrap().passed);

        let law = ExponentialLaw::new(1.0).unwrap();
        let como: Vec<(f64, f64)> = (0..100_000)
            .map(|_| {
                let x = law.sample(&mut rng);
                (x, x)
            })
            .collect();
        let rep = factorization_test(&como, 10).unwrap();
        assert!(!rep.passed);
        // F(1−F) at the grid cut closest to the median, 5/11
        assert!((rep.max_deviation - 0.25).abs() < 0.01, "{rep:?}");

        assert!(factorization_test(&indep[..100], 10).is_err());
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let r = rv(&[1.0]);
        let n = 100_000;
        let a = sample(Statistic::Sum, &r, n, 5, 0).unwrap();
        let b = sample(Statistic::Sum, &r, n, 5, 1).unwrap();
        let rho = cross_correlation(&a.values, &b.values);
        assert!(rho.abs() < 4.0 / (n as f64).sqrt(), "rho = {rho}");
    }
}
