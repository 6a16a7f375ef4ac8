//! Signed exponential mixtures `f(z) = Σ c_i z^{k_i} e^{-λ_i z}` on `z ≥ 0`.
//!
//! Every density handled by this crate (sums, maxima, ranges, Erlang blocks)
//! is such a mixture. Coefficients may be negative; a mixture flagged as a
//! density integrates to one.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::error::{check_non_negative, check_rate, Error, Result};
use crate::rates::relative_gap;
use num_complex::Complex64;

use crate::summation::{compensated_sum, compensated_sum_complex, sum_descending, CompensatedSum};

/// Terms whose rates agree to this relative tolerance are merged.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Maximum allowed `|∫f − 1|` for a mixture flagged as a density.
pub const DENSITY_TOLERANCE: f64 = 1e-10;

/// Width of the silent clamping window for probabilities.
pub const CLAMP_WINDOW: f64 = 1e-12;

/// Bracket for quantile search is `[0, mean + QUANTILE_BRACKET_SDS · sd]`.
pub const QUANTILE_BRACKET_SDS: f64 = 40.0;

/// Density and cdf use the origin series for `z · max rate` up to this value.
const SERIES_RADIUS: f64 = 1.0;
/// Series terms kept beyond the highest degree; `40!` dwarfs any cancellation.
const SERIES_EXTRA_TERMS: usize = 40;
/// Series coefficients within this many ulps of their term magnitude are
/// treated as exact zeros.
const SERIES_NOISE: f64 = 1e3;

/// One term `coefficient · z^degree · e^{-rate·z}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coefficient: f64,
    pub rate: f64,
    pub degree: u32,
}

impl Term {
    pub fn new(coefficient: f64, rate: f64, degree: u32) -> Self {
        Self {
            coefficient,
            rate,
            degree,
        }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        self.coefficient * power_exp(z, self.degree, self.rate)
    }

    /// `coefficient · (degree + order)! / rate^{degree + order + 1}`, the
    /// term's contribution to the raw moment of the given order.
    pub fn moment_weight(&self, order: u32) -> f64 {
        self.coefficient * factorial_over_power(self.degree + order, self.rate)
    }
}

/// `z^k e^{-λ z}` without spurious overflow.
#[inline]
pub(crate) fn power_exp(z: f64, degree: u32, rate: f64) -> f64 {
    let e = (-rate * z).exp();
    if degree == 0 {
        return e;
    }
    if z == 0.0 {
        return 0.0;
    }
    let p = z.powi(degree as i32);
    if p.is_finite() && e > f64::MIN_POSITIVE {
        p * e
    } else {
        (degree as f64 * z.ln() - rate * z).exp()
    }
}

/// `k! / λ^{k+1}` as a running product of ratios.
pub(crate) fn factorial_over_power(k: u32, rate: f64) -> f64 {
    (1..=k).fold(1.0 / rate, |acc, j| acc * (j as f64 / rate))
}

fn ln_factorial(n: u32) -> f64 {
    compensated_sum((2..=n).map(|j| (j as f64).ln()))
}

/// Regularized lower and upper incomplete gamma `(P, Q)` at integer shape
/// `k + 1` and argument `y`; i.e. the Erlang(k+1) cdf and survival at `y`.
pub(crate) fn erlang_pq(k: u32, y: f64) -> (f64, f64) {
    if y <= 0.0 {
        return (0.0, 1.0);
    }
    if y.is_infinite() {
        return (1.0, 0.0);
    }
    if k == 0 {
        return (-(-y).exp_m1(), (-y).exp());
    }
    let ln_y = y.ln();
    if y < (k + 1) as f64 {
        // lower tail: P = Σ_{j>k} e^{-y} y^j / j!
        let mut j = k + 1;
        let mut term = (j as f64 * ln_y - y - ln_factorial(j)).exp();
        let mut p = CompensatedSum::new();
        while term > 0.0 {
            p.add(term);
            j += 1;
            term *= y / j as f64;
            if term < 1e-17 * p.value() || j > k + 100_000 {
                break;
            }
        }
        let p = p.value().min(1.0);
        (p, 1.0 - p)
    } else {
        // upper tail: Q = Σ_{j≤k} e^{-y} y^j / j!, summed from the largest term down
        let mut term = (k as f64 * ln_y - y - ln_factorial(k)).exp();
        let mut q = CompensatedSum::new();
        for j in (0..=k).rev() {
            q.add(term);
            if term == 0.0 {
                break;
            }
            term *= j as f64 / y;
        }
        let q = q.value().min(1.0);
        (1.0 - q, q)
    }
}

/// Clamps a computed probability into `[0, 1]`, warning when the excursion
/// exceeds [`CLAMP_WINDOW`].
pub(crate) fn clamp_probability(p: f64) -> f64 {
    if !(-CLAMP_WINDOW..=1.0 + CLAMP_WINDOW).contains(&p) {
        log::warn!("probability {p:e} outside [0, 1] beyond the clamping window; clamped");
    }
    p.clamp(0.0, 1.0)
}

/// Safeguarded Newton/bisection inversion of a continuous cdf on `[0, ∞)`.
pub(crate) fn solve_quantile<F, D>(cdf: F, pdf: D, p: f64, upper: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
    D: Fn(f64) -> Result<f64>,
{
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability must lie in (0, 1), got {p}")));
    }
    let mut lo = 0.0;
    let mut hi = if upper.is_finite() && upper > 0.0 { upper } else { 1.0 };
    let mut expansions = 0;
    while cdf(hi)? < p {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Numerical(format!(
                "could not bracket quantile for p = {p}"
            )));
        }
    }

    let mut z = 0.5 * (lo + hi);
    let mut prev_residual = f64::INFINITY;
    for _ in 0..500 {
        let residual = cdf(z)? - p;
        if residual == 0.0 {
            return Ok(z);
        }
        if residual < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let density = pdf(z)?;
        let newton = z - residual / density;
        let shrinking = residual.abs() < 0.5 * prev_residual;
        z = if density > 0.0 && newton > lo && newton < hi && shrinking {
            newton
        } else {
            0.5 * (lo + hi)
        };
        prev_residual = residual.abs();
    }

    // the bracket end closest in probability
    let candidates = [z, lo, hi];
    let mut best = (f64::INFINITY, z);
    for c in candidates {
        let r = (cdf(c)? - p).abs();
        if r < best.0 {
            best = (r, c);
        }
    }
    if best.0 > 1e-10 {
        return Err(Error::Numerical(format!(
            "quantile search for p = {p} stalled with residual {:e}",
            best.0
        )));
    }
    Ok(best.1)
}

/// Canonical signed exponential mixture.
///
/// Terms are sorted by `(rate, degree)`; terms whose rates agree within
/// [`MERGE_TOLERANCE`] and share a degree are summed, and exact zeros dropped.
#[derive(Debug, Clone)]
pub struct SignedExponentialMixture {
    terms: Vec<Term>,
    density: bool,
    /// Taylor coefficients of the cdf at the origin, built on first use.
    origin_series: OnceLock<OriginSeries>,
}

impl PartialEq for SignedExponentialMixture {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms && self.density == other.density
    }
}

/// `∫_0^z f = Σ_j b_j u^j` with `u = z · scale`.
#[derive(Debug, Clone)]
struct OriginSeries {
    scale: f64,
    coefficients: Vec<f64>,
}

impl OriginSeries {
    fn new(terms: &[Term]) -> Self {
        let scale = terms.iter().map(|t| t.rate).fold(0.0, f64::max);
        let max_degree = terms.iter().map(|t| t.degree).max().unwrap_or(0) as usize;
        let len = max_degree + 1 + SERIES_EXTRA_TERMS;
        let mut sums = vec![CompensatedSum::new(); len + 1];
        let mut magnitude = vec![0.0f64; len + 1];
        for t in terms {
            // c (−λ)^m / m! · z^{k+m+1} / (k+m+1), expressed in u = z · scale
            let ratio = -t.rate / scale;
            let first = t.degree as usize + 1;
            let mut g = t.coefficient / scale.powi(first as i32);
            for (m, j) in (first..=len).enumerate() {
                if m > 0 {
                    g *= ratio / m as f64;
                }
                let x = g / j as f64;
                sums[j].add(x);
                magnitude[j] += x.abs();
            }
        }
        let coefficients = sums
            .iter()
            .zip(&magnitude)
            .map(|(s, &mag)| {
                let v = s.value();
                if v.abs() <= SERIES_NOISE * f64::EPSILON * mag {
                    0.0
                } else {
                    v
                }
            })
            .collect();
        Self {
            scale,
            coefficients,
        }
    }

    fn eval(&self, z: f64) -> f64 {
        let u = z * self.scale;
        let mut acc = CompensatedSum::new();
        let mut power = 1.0;
        for &b in &self.coefficients {
            acc.add(b * power);
            power *= u;
        }
        acc.value()
    }

    /// `f(z) = scale · Σ_j j b_j u^{j−1}`, with the summand magnitude.
    fn derivative(&self, z: f64) -> (f64, f64) {
        let u = z * self.scale;
        let mut acc = CompensatedSum::new();
        let mut magnitude = 0.0;
        let mut power = 1.0;
        for (j, &b) in self.coefficients.iter().enumerate().skip(1) {
            let x = j as f64 * b * power;
            acc.add(x);
            magnitude += x.abs();
            power *= u;
        }
        (self.scale * acc.value(), self.scale * magnitude)
    }
}

impl SignedExponentialMixture {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            check_rate(t.rate)?;
            if !t.coefficient.is_finite() {
                return Err(Error::Domain(format!(
                    "mixture coefficient must be finite, got {}",
                    t.coefficient
                )));
            }
        }
        Ok(Self {
            terms: canonicalize(terms),
            density: false,
            origin_series: OnceLock::new(),
        })
    }

    /// Builds a mixture and flags it as a density, checking normalization.
    pub fn density(terms: Vec<Term>) -> Result<Self> {
        Self::new(terms)?.into_density()
    }

    /// Flags this mixture as a probability density after checking that it
    /// integrates to one within [`DENSITY_TOLERANCE`].
    pub fn into_density(mut self) -> Result<Self> {
        let total = self.integral();
        if (total - 1.0).abs() > DENSITY_TOLERANCE {
            return Err(Error::Contract(format!(
                "mixture integrates to {total:.17}, not 1 within {DENSITY_TOLERANCE:e}"
            )));
        }
        self.density = true;
        Ok(self)
    }

    pub fn is_density(&self) -> bool {
        self.density
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Multiplies every coefficient by `factor`. The result is not a density.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.terms
                .iter()
                .map(|t| Term::new(t.coefficient * factor, t.rate, t.degree))
                .collect(),
        )
    }

    /// Pointwise sum of mixtures, canonicalized. The result is not a density.
    pub fn sum<'a, I: IntoIterator<Item = &'a Self>>(parts: I) -> Result<Self> {
        Self::new(parts.into_iter().flat_map(|m| m.terms.iter().copied()).collect())
    }

    /// `f(z)`, accumulated in descending term magnitude with compensation.
    pub fn eval(&self, z: f64) -> Result<f64> {
        Ok(self.eval_with_magnitude(z)?.0)
    }

    /// `f(z)` together with the sum of the magnitudes of its summands; their
    /// ratio bounds the digits lost to cancellation.
    pub fn eval_with_magnitude(&self, z: f64) -> Result<(f64, f64)> {
        check_non_negative("z", z)?;
        if let Some(series) = self.origin_series() {
            if z * series.scale <= SERIES_RADIUS {
                return Ok(series.derivative(z));
            }
        }
        let mut values: Vec<f64> = self.terms.iter().map(|t| t.eval(z)).collect();
        let magnitude = values.iter().map(|v| v.abs()).sum();
        Ok((sum_descending(&mut values), magnitude))
    }

    /// Near the origin the terms of a mixed-sign mixture cancel to rounding
    /// noise; the series has exact zeros for the vanishing orders instead.
    /// Same-sign mixtures need no series.
    fn origin_series(&self) -> Option<&OriginSeries> {
        let positive = self.terms.iter().any(|t| t.coefficient > 0.0);
        let negative = self.terms.iter().any(|t| t.coefficient < 0.0);
        if !(positive && negative) {
            return None;
        }
        Some(
            self.origin_series
                .get_or_init(|| OriginSeries::new(&self.terms)),
        )
    }

    /// Exact `∫_0^∞ f = Σ c_i k_i! / λ_i^{k_i+1}`.
    pub fn integral(&self) -> f64 {
        let mut w: Vec<f64> = self.terms.iter().map(|t| t.moment_weight(0)).collect();
        sum_descending(&mut w)
    }

    /// Raw moment of order 1 or 2.
    pub fn moment(&self, order: u32) -> Result<f64> {
        if !(order == 1 || order == 2) {
            return Err(Error::Domain(format!("moment order must be 1 or 2, got {order}")));
        }
        let mut w: Vec<f64> = self.terms.iter().map(|t| t.moment_weight(order)).collect();
        Ok(sum_descending(&mut w))
    }

    pub fn mean(&self) -> Result<f64> {
        self.moment(1)
    }

    pub fn variance(&self) -> Result<f64> {
        let m1 = self.moment(1)?;
        Ok(self.moment(2)? - m1 * m1)
    }

    /// `∫_0^∞ e^{itz} f(z) dz = Σ c_i k_i! / (λ_i − it)^{k_i+1}`.
    pub fn characteristic_function(&self, t: f64) -> Result<Complex64> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("frequency must be finite, got {t}")));
        }
        Ok(compensated_sum_complex(self.terms.iter().map(|term| {
            let phi = Complex64::new(term.rate, 0.0) / Complex64::new(term.rate, -t);
            phi.powu(term.degree + 1) * term.moment_weight(0)
        })))
    }

    /// Largest `|c_i k_i! / λ_i^{k_i+1}|`: how much the normalization relies
    /// on cancellation between terms.
    pub fn condition_estimate(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.moment_weight(0).abs())
            .fold(0.0, f64::max)
    }

    /// Cumulative distribution function, by term-wise incomplete gamma.
    pub fn cdf(&self, z: f64) -> Result<f64> {
        self.require_density("cdf")?;
        check_non_negative("z", z)?;
        if z == 0.0 {
            return Ok(0.0);
        }
        if z.is_infinite() {
            return Ok(1.0);
        }
        let total = self.integral();
        if let Some(series) = self.origin_series() {
            if z * series.scale <= SERIES_RADIUS {
                let below = series.eval(z) / total;
                if below <= 0.5 {
                    return Ok(clamp_probability(below));
                }
            }
        }
        let mut lower = Vec::with_capacity(self.terms.len());
        let mut upper = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let w = t.moment_weight(0);
            let (p, q) = erlang_pq(t.degree, t.rate * z);
            lower.push(w * p);
            upper.push(w * q);
        }
        let below = sum_descending(&mut lower) / total;
        let f = if below <= 0.5 {
            below
        } else {
            1.0 - sum_descending(&mut upper) / total
        };
        Ok(clamp_probability(f))
    }

    /// `z` with `|cdf(z) − p| ≤ 1e-10`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.require_density("quantile")?;
        let mean = self.mean()?;
        let sd = self.variance()?.max(0.0).sqrt();
        solve_quantile(
            |z| self.cdf(z),
            |z| self.eval(z),
            p,
            mean + QUANTILE_BRACKET_SDS * sd,
        )
    }

    /// Largest coefficient difference against `other` when both have the
    /// same term structure (rates within [`MERGE_TOLERANCE`], same degrees),
    /// otherwise `None`.
    pub fn max_coefficient_difference(&self, other: &Self) -> Option<f64> {
        if self.terms.len() != other.terms.len() {
            return None;
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.terms.iter().zip(&other.terms) {
            if a.degree != b.degree || relative_gap(a.rate, b.rate) > MERGE_TOLERANCE {
                return None;
            }
            worst = worst.max((a.coefficient - b.coefficient).abs());
        }
        Some(worst)
    }

    fn require_density(&self, op: &str) -> Result<()> {
        if !self.density {
            return Err(Error::Contract(format!(
                "{op} requires a mixture flagged as a density"
            )));
        }
        Ok(())
    }
}

fn canonicalize(mut terms: Vec<Term>) -> Vec<Term> {
    terms.sort_by(|a, b| a.rate.total_cmp(&b.rate).then(a.degree.cmp(&b.degree)));
    let mut out = Vec::with_capacity(terms.len());
    let mut i = 0;
    while i < terms.len() {
        let rate = terms[i].rate;
        let mut by_degree: BTreeMap<u32, CompensatedSum> = BTreeMap::new();
        while i < terms.len() && relative_gap(rate, terms[i].rate) <= MERGE_TOLERANCE {
            by_degree
                .entry(terms[i].degree)
                .or_default()
                .add(terms[i].coefficient);
            i += 1;
        }
        for (degree, c) in by_degree {
            let coefficient = c.value();
            if coefficient != 0.0 {
                out.push(Term::new(coefficient, rate, degree));
            }
        }
    }
    out
}
