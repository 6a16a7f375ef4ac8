//! Law of the sum `S_N = X_1 + … + X_N` of independent exponentials.
//!
//! For pairwise-distinct rates the density is the signed combination
//! `Σ_n A_n λ_n e^{−λ_n z}` with `A_n = Π_{j≠n} λ_j / (λ_j − λ_n)`.
//! Rates that coincide within the cluster tolerance are merged into Erlang
//! blocks through the confluent partial-fraction expansion of the Laplace
//! transform. When clusters are close enough for the signed sum to lose
//! most of its digits, evaluation switches to the phase-type form.

use num_complex::Complex64;

use crate::error::{check_non_negative, check_rate, Error, Result};
use crate::mixture::{solve_quantile, SignedExponentialMixture, Term, QUANTILE_BRACKET_SDS};
use crate::phase_type::PhaseTypeForm;
use crate::double_double::DoubleDouble;
use crate::rates::{relative_gap, RateVector};
use crate::summation::{compensated_sum, compensated_sum_complex};

/// Minimum relative gap between cluster rates for the closed form to be used.
pub const SWITCH_THRESHOLD: f64 = 1e-3;

/// Largest mixture condition estimate for which the closed form is used.
pub const CONDITION_LIMIT: f64 = 1e6;

/// Closed-form evaluations whose summands exceed the result by more than
/// this factor are redone in phase-type form.
pub const CANCELLATION_LIMIT: f64 = 1e3;

/// Above this many rates, coefficients are accumulated in log space.
pub const LOG_SPACE_THRESHOLD: usize = 20;

/// Relative tolerance scale for the coefficient identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-8;

/// Partial-fraction coefficients `A_n = Π_{j≠n} λ_j / (λ_j − λ_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionCoefficients {
    rates: Vec<f64>,
    coefficients: Vec<f64>,
    condition_estimate: f64,
}

/// One coefficient identity `Σ A_n λ_n^k = [k = 0]` and its tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSumCheck {
    pub power: usize,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
}

impl PowerSumCheck {
    pub fn residual(&self) -> f64 {
        (self.value - self.expected).abs()
    }

    pub fn passed(&self) -> bool {
        self.residual() <= self.tolerance
    }
}

impl ConvolutionCoefficients {
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `max |A_n|`.
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    /// `Σ A_n λ_n^k` for `k = 0..N−1`; these equal `1, 0, …, 0`.
    pub fn power_sum_checks(&self) -> Vec<PowerSumCheck> {
        let max_rate = self.rates.iter().copied().fold(0.0, f64::max);
        (0..self.rates.len())
            .map(|k| {
                let value = compensated_sum(
                    self.coefficients
                        .iter()
                        .zip(&self.rates)
                        .map(|(a, l)| a * l.powi(k as i32)),
                );
                PowerSumCheck {
                    power: k,
                    value,
                    expected: if k == 0 { 1.0 } else { 0.0 },
                    tolerance: IDENTITY_TOLERANCE
                        * self.condition_estimate
                        * max_rate.powi(k as i32),
                }
            })
            .collect()
    }

    /// Density `Σ A_n λ_n e^{−λ_n z}` without clamping or path switching.
    pub fn closed_form_pdf(&self, z: f64) -> Result<f64> {
        check_non_negative("z", z)?;
        let mut terms: Vec<f64> = self
            .coefficients
            .iter()
            .zip(&self.rates)
            .map(|(a, l)| a * l * (-l * z).exp())
            .collect();
        Ok(crate::summation::sum_descending(&mut terms))
    }
}

/// `A_n` for rates assumed pairwise distinct.
fn partial_fraction_coefficients(rates: &[f64]) -> Vec<f64> {
    let n = rates.len();
    if n > LOG_SPACE_THRESHOLD {
        return (0..n)
            .map(|i| {
                let mut log_mag = 0.0;
                let mut negative = false;
                for (j, &lj) in rates.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let diff = lj - rates[i];
                    log_mag += lj.ln() - diff.abs().ln();
                    negative ^= diff < 0.0;
                }
                let mag = log_mag.exp();
                if negative {
                    -mag
                } else {
                    mag
                }
            })
            .collect();
    }
    (0..n)
        .map(|i| {
            rates
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &lj)| lj / (lj - rates[i]))
                .product()
        })
        .collect()
}

/// Partial-fraction coefficients of the sum. Requires every cluster to be a
/// singleton.
pub fn conv_coefficients(rates: &RateVector) -> Result<ConvolutionCoefficients> {
    if !rates.is_distinct() {
        return Err(Error::DegenerateRates(format!(
            "{} rates fall into {} clusters",
            rates.len(),
            rates.clusters().len()
        )));
    }
    let coefficients = partial_fraction_coefficients(rates.rates());
    let condition_estimate = coefficients.iter().map(|a| a.abs()).fold(0.0, f64::max);
    Ok(ConvolutionCoefficients {
        rates: rates.rates().to_vec(),
        coefficients,
        condition_estimate,
    })
}

/// Confluent partial fractions over the clusters.
///
/// With cluster rates `μ_k` and multiplicities `m_k`, the transform
/// `Π_k (μ_k / (μ_k + s))^{m_k}` expands as `Σ_k Σ_{j≤m_k} a_{kj} (s + μ_k)^{−j}`,
/// and `(s + μ)^{−j}` inverts to `z^{j−1} e^{−μz} / (j−1)!`. The `a_{kj}` are
/// Taylor coefficients of `g_k(s) = Π_l μ_l^{m_l} Π_{l≠k} (μ_l + s)^{−m_l}` at
/// `s = −μ_k`, obtained from the log-derivative recurrence
/// `q t_q = Σ_{p=1}^{q} σ_p t_{q−p}`, `σ_p = Σ_{l≠k} m_l (μ_k − μ_l)^{−p}`.
fn confluent_terms(rates: &RateVector) -> Vec<Term> {
    if rates.is_distinct() {
        let rs = rates.rates();
        return partial_fraction_coefficients(rs)
            .into_iter()
            .zip(rs)
            .map(|(a, &l)| Term::new(a * l, l, 0))
            .collect();
    }

    let clusters: Vec<(f64, usize)> = rates
        .clusters()
        .iter()
        .map(|c| (c.rate(), c.multiplicity()))
        .collect();
    let log_space = rates.len() > LOG_SPACE_THRESHOLD;
    let mut terms = Vec::with_capacity(rates.len());

    for (k, &(mu, m)) in clusters.iter().enumerate() {
        let leading = if log_space {
            let mut log_mag = m as f64 * mu.ln();
            let mut negative = false;
            for (l, &(nu, ml)) in clusters.iter().enumerate() {
                if l == k {
                    continue;
                }
                log_mag += ml as f64 * (nu.ln() - (nu - mu).abs().ln());
                negative ^= nu < mu && ml % 2 == 1;
            }
            let mag = log_mag.exp();
            if negative {
                -mag
            } else {
                mag
            }
        } else {
            clusters
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != k)
                .fold(mu.powi(m as i32), |acc, (_, &(nu, ml))| {
                    acc * (nu / (nu - mu)).powi(ml as i32)
                })
        };

        // σ_p for p = 1..m−1
        let sigma: Vec<f64> = (1..m)
            .map(|p| {
                compensated_sum(
                    clusters
                        .iter()
                        .enumerate()
                        .filter(|&(l, _)| l != k)
                        .map(|(_, &(nu, ml))| ml as f64 / (mu - nu).powi(p as i32)),
                )
            })
            .collect();
        // normalized Taylor coefficients u_q = t_q / t_0
        let mut u = vec![1.0; m];
        for q in 1..m {
            u[q] = compensated_sum((1..=q).map(|p| sigma[p - 1] * u[q - p])) / q as f64;
        }

        let mut factorial = 1.0;
        for j in 1..=m {
            if j > 1 {
                factorial *= (j - 1) as f64;
            }
            terms.push(Term::new(leading * u[m - j] / factorial, mu, (j - 1) as u32));
        }
    }
    terms
}

/// Density of the sum as a signed exponential mixture (Erlang blocks for
/// clustered rates).
///
/// Fails with [`Error::Numerical`] when cancellation between the terms
/// prevents the mixture from normalizing within tolerance; the phase-type
/// path still evaluates such rate vectors.
pub fn conv_mixture(rates: &RateVector) -> Result<SignedExponentialMixture> {
    SignedExponentialMixture::density(confluent_terms(rates)).map_err(|e| {
        Error::Numerical(format!(
            "closed-form mixture too ill-conditioned for these rates ({e})"
        ))
    })
}

/// Which representation evaluates a [`Hypoexponential`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluationPath {
    ClosedForm,
    PhaseType,
}

/// The law of `S_N`, with the evaluation path chosen once at construction.
#[derive(Debug, Clone)]
pub struct Hypoexponential {
    rates: RateVector,
    mixture: Option<SignedExponentialMixture>,
    phase_type: PhaseTypeForm,
    path: EvaluationPath,
}

impl Hypoexponential {
    pub fn new(rates: RateVector) -> Self {
        let mixture = conv_mixture(&rates).ok();
        let too_close = rates
            .min_relative_gap()
            .is_some_and(|g| g < SWITCH_THRESHOLD);
        let path = match &mixture {
            Some(m) if !too_close && m.condition_estimate() <= CONDITION_LIMIT => {
                EvaluationPath::ClosedForm
            }
            _ => EvaluationPath::PhaseType,
        };
        let phase_type = PhaseTypeForm::new(&rates);
        Self {
            rates,
            mixture,
            phase_type,
            path,
        }
    }

    pub fn rates(&self) -> &RateVector {
        &self.rates
    }

    pub fn path(&self) -> EvaluationPath {
        self.path
    }

    /// The closed-form mixture, when it normalizes.
    pub fn mixture(&self) -> Option<&SignedExponentialMixture> {
        self.mixture.as_ref()
    }

    pub fn phase_type(&self) -> &PhaseTypeForm {
        &self.phase_type
    }

    pub fn pdf(&self, z: f64) -> Result<f64> {
        check_non_negative("z", z)?;
        if z == 0.0 {
            return Ok(if self.rates.len() == 1 {
                self.rates.rates()[0]
            } else {
                0.0
            });
        }
        let v = match (self.path, &self.mixture) {
            (EvaluationPath::ClosedForm, Some(m)) => {
                let (v, magnitude) = m.eval_with_magnitude(z)?;
                if magnitude > CANCELLATION_LIMIT * v.abs() {
                    // the signed terms cancel here; the phase-type form
                    // keeps relative accuracy
                    self.phase_type.pdf(z)?
                } else {
                    v
                }
            }
            _ => self.phase_type.pdf(z)?,
        };
        Ok(v.max(0.0))
    }

    pub fn cdf(&self, z: f64) -> Result<f64> {
        match (self.path, &self.mixture) {
            (EvaluationPath::ClosedForm, Some(m)) => m.cdf(z),
            _ => self.phase_type.cdf(z),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match (self.path, &self.mixture) {
            (EvaluationPath::ClosedForm, Some(m)) => m.quantile(p),
            _ => {
                let upper = self.mean() + QUANTILE_BRACKET_SDS * self.variance().sqrt();
                solve_quantile(|z| self.cdf(z), |z| self.pdf(z), p, upper)
            }
        }
    }

    /// `Σ 1/λ_n`.
    pub fn mean(&self) -> f64 {
        compensated_sum(self.rates.rates().iter().map(|r| 1.0 / r))
    }

    /// `Σ 1/λ_n²`.
    pub fn variance(&self) -> f64 {
        compensated_sum(self.rates.rates().iter().map(|r| 1.0 / (r * r)))
    }
}

pub fn conv_pdf(rates: &RateVector, z: f64) -> Result<f64> {
    Hypoexponential::new(rates.clone()).pdf(z)
}

pub fn conv_pdf_phase_type(ph: &PhaseTypeForm, z: f64) -> Result<f64> {
    ph.pdf(z)
}

pub fn conv_cdf(rates: &RateVector, z: f64) -> Result<f64> {
    Hypoexponential::new(rates.clone()).cdf(z)
}

pub fn conv_quantile(rates: &RateVector, p: f64) -> Result<f64> {
    Hypoexponential::new(rates.clone()).quantile(p)
}

/// `(mean, variance)` of the sum.
pub fn conv_moments(rates: &RateVector) -> (f64, f64) {
    let h = Hypoexponential::new(rates.clone());
    (h.mean(), h.variance())
}

/// `P(X_b > X_a) = λ_a / (λ_a + λ_b)` for `X_a ~ Exp(rate_a)`, `X_b ~ Exp(rate_b)`.
pub fn ordering_probability(rate_a: f64, rate_b: f64) -> Result<f64> {
    check_rate(rate_a)?;
    check_rate(rate_b)?;
    Ok(rate_a / (rate_a + rate_b))
}

/// A characteristic function value `φ(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicFunctionValue {
    pub t: f64,
    pub value: Complex64,
}

fn check_frequency(t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("frequency must be finite, got {t}")));
    }
    Ok(())
}

#[inline]
fn phi(rate: f64, t: f64) -> Complex64 {
    Complex64::new(rate, 0.0) / Complex64::new(rate, -t)
}

/// `φ(t) = λ / (λ − it)`.
pub fn char_fn_single(rate: f64, t: f64) -> Result<CharacteristicFunctionValue> {
    check_rate(rate)?;
    check_frequency(t)?;
    Ok(CharacteristicFunctionValue {
        t,
        value: phi(rate, t),
    })
}

/// `Π_n λ_n / (λ_n − it)`.
pub fn char_fn_product(rates: &RateVector, t: f64) -> Result<CharacteristicFunctionValue> {
    check_frequency(t)?;
    let value = rates
        .rates()
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, &l| acc * phi(l, t));
    Ok(CharacteristicFunctionValue { t, value })
}

/// `Σ_n A_n φ_n(t)`; requires distinct rates.
///
/// Coefficients and terms are formed in double-double precision: for close
/// rates the `A_n` are large and cancel, and rounding each term to double
/// would leave an error of `ε Σ |A_n φ_n|`.
pub fn char_fn_linear_combination(
    rates: &RateVector,
    t: f64,
) -> Result<CharacteristicFunctionValue> {
    check_frequency(t)?;
    let coeffs = conv_coefficients(rates)?;
    let r = coeffs.rates();
    let t_dd = DoubleDouble::from(t);
    let (mut re, mut im) = (DoubleDouble::ZERO, DoubleDouble::ZERO);
    for (n, &ln) in r.iter().enumerate() {
        let a = r
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != n)
            .fold(DoubleDouble::ONE, |acc, (_, &lj)| {
                acc * (DoubleDouble::from(lj) / DoubleDouble::diff(lj, ln))
            });
        // λ / (λ − it) = λ (λ + it) / (λ² + t²)
        let l = DoubleDouble::from(ln);
        let scale = a * l / (l * l + t_dd * t_dd);
        re = re + scale * l;
        im = im + scale * t_dd;
    }
    let value = Complex64::new(re.to_f64(), im.to_f64());
    if !(value.re.is_finite() && value.im.is_finite()) {
        // out of double-double range; fall back to the double coefficients
        let value = compensated_sum_complex(
            coeffs
                .coefficients()
                .iter()
                .zip(r)
                .map(|(&a, &l)| phi(l, t) * a),
        );
        return Ok(CharacteristicFunctionValue { t, value });
    }
    Ok(CharacteristicFunctionValue { t, value })
}

/// Outcome of the induction-step identity check
/// `Σ_n λ_n/(λ_n − λ_p) · A_n = Π_j λ_j/(λ_j − λ_p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub condition_estimate: f64,
    pub tolerance: f64,
}

impl IdentityResidual {
    pub fn passed(&self) -> bool {
        self.residual <= self.tolerance
    }
}

/// Checks the identity that carries the induction from `N` to `N + 1`
/// rates, with `probe_rate` in the role of the added rate.
pub fn partial_fraction_identity_check(
    rates: &RateVector,
    probe_rate: f64,
) -> Result<IdentityResidual> {
    check_rate(probe_rate)?;
    if let Some(&hit) = rates
        .rates()
        .iter()
        .find(|&&l| relative_gap(l, probe_rate) <= rates.cluster_tolerance())
    {
        return Err(Error::Domain(format!(
            "probe rate {probe_rate} collides with rate {hit}"
        )));
    }
    let coeffs = conv_coefficients(rates)?;
    let lhs = compensated_sum(
        coeffs
            .coefficients()
            .iter()
            .zip(coeffs.rates())
            .map(|(&a, &l)| l / (l - probe_rate) * a),
    );
    let rhs: f64 = coeffs
        .rates()
        .iter()
        .map(|&l| l / (l - probe_rate))
        .product();
    let condition_estimate = coeffs.condition_estimate();
    Ok(IdentityResidual {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        condition_estimate,
        tolerance: IDENTITY_TOLERANCE * condition_estimate,
    })
}

/// `Γ(2, λ)` density `λ² z e^{−λz}`, multiplied in the same order as the
/// Erlang-block evaluation.
pub fn gamma2_pdf(rate: f64, z: f64) -> f64 {
    (rate * rate) * (z * (-rate * z).exp())
}

/// Largest deviation over `z_grid` between the sum density at rates
/// `(λ(1+δ), λ(1−δ))` and the `Γ(2, λ)` density.
pub fn gamma_limit_error(lambda_mean: f64, delta: f64, z_grid: &[f64]) -> Result<f64> {
    check_rate(lambda_mean)?;
    if !(0.0..0.5).contains(&delta) {
        return Err(Error::Domain(format!("delta must lie in [0, 0.5), got {delta}")));
    }
    let rates = RateVector::new(vec![lambda_mean * (1.0 + delta), lambda_mean * (1.0 - delta)])?;
    let law = Hypoexponential::new(rates);
    let mut worst: f64 = 0.0;
    for &z in z_grid {
        let d = (law.pdf(z)? - gamma2_pdf(lambda_mean, z)).abs();
        worst = worst.max(d);
    }
    Ok(worst)
}
