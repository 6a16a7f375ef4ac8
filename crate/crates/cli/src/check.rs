//! The `check` report for one rate vector. Each check compares an exact
//! result with an independent computation or with sampled data.

use std::io::{self, Write};

use expstat::convolution::{
    char_fn_linear_combination, char_fn_product, conv_coefficients, conv_mixture,
    partial_fraction_identity_check, EvaluationPath,
};
use expstat::montecarlo::{
    factorization_test, ks_test, sample, sample_min_range_pairs, Statistic,
    MIN_FACTORIZATION_PAIRS,
};
use expstat::oracle::{integrate, IteratedConvolution};
use expstat::orderstats::{
    max2_via_convolution, max_cdf, max_mixture, max_mixture_cdf_discrepancy, min_law,
    order_statistic_pdf, OrderStatisticRequest,
};
use expstat::{Hypoexponential, RateVector, RngStream};

use crate::format::format_g17;

pub const ORACLE_TOLERANCE: f64 = 1e-7;
pub const TRANSFORM_TOLERANCE: f64 = 1e-12;
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
pub const MAX_FORM_TOLERANCE: f64 = 1e-9;
/// Largest `N` for which the inclusion–exclusion maximum is cross-checked.
pub const MAX_FORM_LIMIT: usize = 12;

const FREQUENCIES: usize = 100;
const ORACLE_POINTS: usize = 20;
const MAX_FORM_POINTS: usize = 50;
const FACTORIZATION_GRID: usize = 10;
/// Tail mass left beyond the upper integration limit.
const TAIL_MASS: f64 = 1e-9;

const STREAM_TRANSFORM: u64 = 0;
const STREAM_MIN: u64 = 1;
const STREAM_MAX: u64 = 2;
const STREAM_SUM: u64 = 3;
const STREAM_PAIRS: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: &'static str,
    pub passed: bool,
    pub metric: String,
}

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub info: Vec<String>,
    pub checks: Vec<CheckLine>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckLine> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckLine> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for line in &self.info {
            writeln!(out, "INFO {line}")?;
        }
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            writeln!(out, "CHECK {} {verdict} {}", c.name, c.metric)?;
        }
        let failed: Vec<&str> = self.failures().map(|c| c.name).collect();
        if failed.is_empty() {
            writeln!(out, "RESULT PASS {} checks", self.checks.len())
        } else {
            writeln!(out, "RESULT FAIL {}", failed.join(","))
        }
    }
}

/// Runs every check; internal errors are reported as failures.
pub fn run_checks(rates: &RateVector, seed: u64, samples: usize) -> CheckReport {
    let law = Hypoexponential::new(rates.clone());
    let mut report = CheckReport::default();
    report.info.push(format!("rates {}", join(rates.rates())));
    let blocks: Vec<String> = rates
        .clusters()
        .iter()
        .map(|c| format!("{}x{}", format_g17(c.rate()), c.multiplicity()))
        .collect();
    report.info.push(format!(
        "clusters {} [{}]{}",
        rates.clusters().len(),
        blocks.join(" "),
        if rates.is_distinct() {
            ""
        } else {
            " repeated-rate blocks engaged"
        }
    ));
    report.info.push(format!(
        "path {}",
        match law.path() {
            EvaluationPath::ClosedForm => "closed-form",
            EvaluationPath::PhaseType => "phase-type",
        }
    ));
    report.info.push(format!("seed {seed} samples {samples}"));

    let mut push = |name: &'static str, result: expstat::Result<(bool, String)>| {
        let (passed, metric) = result.unwrap_or_else(|e| (false, format!("error=\"{e}\"")));
        report.checks.push(CheckLine {
            name,
            passed,
            metric,
        });
    };
    push("power_sums", power_sums(rates));
    push("induction_identity", induction_identity(rates));
    push("transform", transform(rates, seed));
    push("oracle_triangle", oracle_triangle(&law));
    push("normalization", normalization(&law));
    if rates.len() <= MAX_FORM_LIMIT {
        push("max_product_form", max_product_form(rates));
    }
    if rates.len() == 2 {
        push("max_two_paths", max_two_paths(rates));
    }
    push("ks_min", ks(rates, &law, Statistic::Min, seed, samples));
    push("ks_max", ks(rates, &law, Statistic::Max, seed, samples));
    push("ks_sum", ks(rates, &law, Statistic::Sum, seed, samples));
    push("factorization", factorization(rates, seed, samples));
    report
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| format_g17(v)).collect::<Vec<_>>().join(",")
}

fn metric(value: f64) -> String {
    format!("{value:.3e}")
}

/// One representative per cluster.
fn distinct_representatives(rates: &RateVector) -> expstat::Result<RateVector> {
    RateVector::new(rates.cluster_rates())
}

/// Representatives repeated by multiplicity: the rate vector the repeated-rate
/// blocks describe exactly.
fn representative_rates(rates: &RateVector) -> expstat::Result<RateVector> {
    RateVector::new(
        rates
            .clusters()
            .iter()
            .flat_map(|c| std::iter::repeat_n(c.rate(), c.multiplicity()))
            .collect(),
    )
}

/// `Σ A_n λ_n^k` against `1` for `k = 0` and `0` for `k = 1..N−1`.
fn power_sums(rates: &RateVector) -> expstat::Result<(bool, String)> {
    let checks = conv_coefficients(&distinct_representatives(rates)?)?.power_sum_checks();
    let worst = checks.iter().map(|c| c.residual()).fold(0.0, f64::max);
    let ratio = checks
        .iter()
        .map(|c| c.residual() / c.tolerance)
        .fold(0.0, f64::max);
    Ok((
        checks.iter().all(|c| c.passed()),
        format!("powers={} max_residual={} max_ratio={}", checks.len(), metric(worst), metric(ratio)),
    ))
}

/// The identity that adds one rate to the sum, probed below, inside and
/// above the rate range.
fn induction_identity(rates: &RateVector) -> expstat::Result<(bool, String)> {
    let reps = distinct_representatives(rates)?;
    let r = reps.rates();
    let mut probes = vec![0.5 * reps.min_rate(), 2.0 * reps.max_rate()];
    if r.len() >= 2 {
        let mut sorted = r.to_vec();
        sorted.sort_by(f64::total_cmp);
        probes.push((sorted[0] * sorted[1]).sqrt());
    }
    let mut passed = true;
    let (mut worst, mut ratio) = (0.0f64, 0.0f64);
    for p in probes {
        let res = partial_fraction_identity_check(&reps, p)?;
        passed &= res.passed();
        worst = worst.max(res.residual);
        ratio = ratio.max(res.residual / res.tolerance);
    }
    Ok((passed, format!("max_residual={} max_ratio={}", metric(worst), metric(ratio))))
}

/// Product of characteristic functions against the partial-fraction form.
fn transform(rates: &RateVector, seed: u64) -> expstat::Result<(bool, String)> {
    let reps = representative_rates(rates)?;
    let mixture = if reps.is_distinct() {
        None
    } else {
        Some(conv_mixture(&reps)?)
    };
    let scale = reps.total_rate() / reps.len() as f64;
    let mut rng = RngStream::new(seed, STREAM_TRANSFORM);
    let mut worst = 0.0f64;
    for _ in 0..FREQUENCIES {
        let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        let t = sign * scale * 10f64.powf(-3.0 + 6.0 * rng.uniform());
        let lhs = char_fn_product(&reps, t)?.value;
        let rhs = match &mixture {
            None => char_fn_linear_combination(&reps, t)?.value,
            Some(m) => m.characteristic_function(t)?,
        };
        worst = worst.max((lhs - rhs).norm());
    }
    Ok((
        worst <= TRANSFORM_TOLERANCE,
        format!("frequencies={FREQUENCIES} max_abs_diff={}", metric(worst)),
    ))
}

fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// The three evaluations of the sum density compared pairwise at interior
/// quantiles.
fn oracle_triangle(law: &Hypoexponential) -> expstat::Result<(bool, String)> {
    let zs = (0..ORACLE_POINTS)
        .map(|i| law.quantile(0.05 + 0.9 * i as f64 / (ORACLE_POINTS - 1) as f64))
        .collect::<expstat::Result<Vec<_>>>()?;
    let z_max = zs.iter().copied().fold(0.0, f64::max);
    let quad = IteratedConvolution::new(law.rates().rates(), z_max)?;
    let mixture = law.mixture();
    let (mut cp, mut cq, mut pq) = (0.0f64, 0.0f64, 0.0f64);
    for &z in &zs {
        let p = law.phase_type().pdf(z)?;
        let q = quad.pdf(z)?;
        pq = pq.max(relative_difference(p, q));
        if let Some(m) = mixture {
            let c = m.eval(z)?;
            cp = cp.max(relative_difference(c, p));
            cq = cq.max(relative_difference(c, q));
        }
    }
    let worst = cp.max(cq).max(pq);
    let closed = |v: f64| {
        if mixture.is_some() {
            metric(v)
        } else {
            "n/a".into()
        }
    };
    Ok((
        worst <= ORACLE_TOLERANCE,
        format!(
            "points={ORACLE_POINTS} closed_vs_phase={} closed_vs_quadrature={} phase_vs_quadrature={}",
            closed(cp),
            closed(cq),
            metric(pq)
        ),
    ))
}

/// `∫_0^b f + P(Z > b)` for the sum and the maximum, with the density
/// integrated numerically.
fn normalization(law: &Hypoexponential) -> expstat::Result<(bool, String)> {
    let rates = law.rates();
    let upper = law.quantile(1.0 - TAIL_MASS)?;
    let body = integrate(|z| law.pdf(z).unwrap_or(f64::NAN), 0.0, upper, 1e-14, 1e-13)?;
    let sum_err = (body.value + (1.0 - law.cdf(upper)?) - 1.0).abs();

    let n = rates.len() as f64;
    let upper = (n.ln() - TAIL_MASS.ln()) / rates.min_rate();
    let req = OrderStatisticRequest::new(rates.clone(), rates.len())?;
    let body = integrate(
        |z| order_statistic_pdf(&req, z).unwrap_or(f64::NAN),
        0.0,
        upper,
        1e-14,
        1e-13,
    )?;
    let max_err = (body.value + (1.0 - max_cdf(rates, upper)?) - 1.0).abs();

    let mut metrics = format!("sum={} max={}", metric(sum_err), metric(max_err));
    let mut worst = sum_err.max(max_err);
    if let Some(m) = law.mixture() {
        let exact = (m.integral() - 1.0).abs();
        metrics.push_str(&format!(" sum_mixture_exact={}", metric(exact)));
        worst = worst.max(exact);
    }
    Ok((worst <= NORMALIZATION_TOLERANCE, metrics))
}

/// Inclusion–exclusion maximum against the product-form cdf.
fn max_product_form(rates: &RateVector) -> expstat::Result<(bool, String)> {
    let upper = ((rates.len() as f64).ln() - TAIL_MASS.ln()) / rates.min_rate();
    let grid: Vec<f64> = (0..MAX_FORM_POINTS)
        .map(|i| upper * i as f64 / (MAX_FORM_POINTS - 1) as f64)
        .collect();
    let worst = max_mixture_cdf_discrepancy(rates, &grid)?;
    Ok((
        worst <= MAX_FORM_TOLERANCE,
        format!("points={MAX_FORM_POINTS} max_abs_diff={}", metric(worst)),
    ))
}

/// The two-variable maximum built from the sum law against inclusion–exclusion.
fn max_two_paths(rates: &RateVector) -> expstat::Result<(bool, String)> {
    let r = rates.rates();
    let direct = max_mixture(rates)?;
    let via_sum = max2_via_convolution(r[0], r[1])?;
    match direct.max_coefficient_difference(&via_sum) {
        Some(d) => Ok((
            d <= MAX_FORM_TOLERANCE,
            format!("terms={} max_coefficient_diff={}", direct.len(), metric(d)),
        )),
        None => Ok((
            false,
            format!("term_structure_differs terms={}/{}", direct.len(), via_sum.len()),
        )),
    }
}

fn ks(
    rates: &RateVector,
    law: &Hypoexponential,
    stat: Statistic,
    seed: u64,
    samples: usize,
) -> expstat::Result<(bool, String)> {
    let report = match stat {
        Statistic::Min => {
            let min = min_law(rates);
            let batch = sample(stat, rates, samples, seed, STREAM_MIN)?;
            ks_test(&batch, |z| min.cdf(z).unwrap_or(f64::NAN))?
        }
        Statistic::Max => {
            let batch = sample(stat, rates, samples, seed, STREAM_MAX)?;
            ks_test(&batch, |z| max_cdf(rates, z).unwrap_or(f64::NAN))?
        }
        _ => {
            let batch = sample(stat, rates, samples, seed, STREAM_SUM)?;
            ks_test(&batch, |z| law.cdf(z).unwrap_or(f64::NAN))?
        }
    };
    Ok((
        report.passed,
        format!(
            "n={} D={} critical={}",
            report.n,
            metric(report.ks_statistic),
            metric(report.critical_value)
        ),
    ))
}

/// Joint empirical cdf of `(m_N, M_N − m_N)` against the product of its
/// marginals.
fn factorization(rates: &RateVector, seed: u64, samples: usize) -> expstat::Result<(bool, String)> {
    let n = samples.max(MIN_FACTORIZATION_PAIRS);
    let pairs = sample_min_range_pairs(rates, n, seed, STREAM_PAIRS)?;
    let report = factorization_test(&pairs, FACTORIZATION_GRID)?;
    Ok((
        report.passed,
        format!(
            "n={} max_deviation={} threshold={}",
            report.n,
            metric(report.max_deviation),
            metric(report.threshold)
        ),
    ))
}
