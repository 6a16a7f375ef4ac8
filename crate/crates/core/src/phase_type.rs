//! Phase-type representation of a sum of exponentials in series.
//!
//! `S_N` is the absorption time of the chain `1 → 2 → … → N → absorbed`
//! with holding rates `λ_1..λ_N`. The sub-generator `T` is upper bidiagonal
//! with `−λ_n` on the diagonal and `λ_n` above it.
//!
//! `exp(Tz)` is evaluated by scaling and squaring on the shifted matrix
//! `B = T + μI` with `μ = max λ`. `B` is entrywise non-negative, so its
//! Taylor terms and all squarings are sums of non-negative numbers and each
//! entry of the result carries a small relative error, including far into
//! the tail where the density is tiny.

use crate::error::{check_non_negative, check_rate, Error, Result};
use crate::mixture::clamp_probability;
use crate::rates::RateVector;
use crate::summation::compensated_sum;

const MAX_TAYLOR_TERMS: usize = 400;
/// Taylor terms are added until each is below this fraction of the entry.
const TAYLOR_RELATIVE_CUTOFF: f64 = 1e-17;
/// `‖B h‖_∞` bound after scaling.
const SCALED_NORM: f64 = 0.5;

/// Dense upper-triangular square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
struct UpperTriangular {
    n: usize,
    data: Vec<f64>,
}

impl UpperTriangular {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in i..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in k..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }
}

/// Phase-type representation of `S_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTypeForm {
    rates: Vec<f64>,
}

/// Row 0 of `exp(Tz)` together with the scaling diagnostics used.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientRow {
    pub values: Vec<f64>,
    pub squarings: u32,
    pub taylor_terms: usize,
}

impl PhaseTypeForm {
    /// Chain through the rates in their given order.
    pub fn new(rates: &RateVector) -> Self {
        Self {
            rates: rates.rates().to_vec(),
        }
    }

    pub fn from_rates(rates: &[f64]) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::Domain("at least one phase is required".into()));
        }
        for &r in rates {
            check_rate(r)?;
        }
        Ok(Self {
            rates: rates.to_vec(),
        })
    }

    pub fn order(&self) -> usize {
        self.rates.len()
    }

    /// All mass on the first phase.
    pub fn initial(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.order()];
        v[0] = 1.0;
        v
    }

    pub fn sub_generator(&self) -> Vec<Vec<f64>> {
        let n = self.order();
        (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                row[i] = -self.rates[i];
                if i + 1 < n {
                    row[i + 1] = self.rates[i];
                }
                row
            })
            .collect()
    }

    /// Absorption rates `−T·1`: zero except `λ_N` in the last phase.
    pub fn exit(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.order()];
        v[self.order() - 1] = self.rates[self.order() - 1];
        v
    }

    /// First row of `exp(Tz)`: the probabilities of occupying each phase at `z`.
    pub fn transient_row(&self, z: f64) -> Result<TransientRow> {
        check_non_negative("z", z)?;
        let n = self.order();
        if z == 0.0 {
            let mut values = vec![0.0; n];
            values[0] = 1.0;
            return Ok(TransientRow {
                values,
                squarings: 0,
                taylor_terms: 0,
            });
        }
        if !z.is_finite() {
            return Ok(TransientRow {
                values: vec![0.0; n],
                squarings: 0,
                taylor_terms: 0,
            });
        }

        let shift = self.rates.iter().copied().fold(0.0, f64::max);
        let norm = shift * z;
        let squarings = if norm > SCALED_NORM {
            (norm / SCALED_NORM).log2().ceil() as u32
        } else {
            0
        };
        let h = z / 2f64.powi(squarings as i32);

        let mut x = UpperTriangular::zeros(n);
        for i in 0..n {
            x.set(i, i, (shift - self.rates[i]) * h);
            if i + 1 < n {
                x.set(i, i + 1, self.rates[i] * h);
            }
        }

        let mut sum = UpperTriangular::identity(n);
        let mut term = UpperTriangular::identity(n);
        let mut terms_used = 0;
        let mut converged = false;
        for k in 1..=MAX_TAYLOR_TERMS {
            term = term.mul(&x);
            let inv_k = 1.0 / k as f64;
            term.data.iter_mut().for_each(|v| *v *= inv_k);
            let mut negligible = true;
            for (s, t) in sum.data.iter_mut().zip(&term.data) {
                *s += *t;
                if *t > TAYLOR_RELATIVE_CUTOFF * *s {
                    negligible = false;
                }
            }
            terms_used = k;
            if k + 1 >= n && negligible {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(format!(
                "matrix exponential Taylor series did not converge: order {n}, z = {z}, \
                 shift = {shift}, squarings = {squarings}, terms = {terms_used}"
            )));
        }

        let decay = (-shift * h).exp();
        sum.data.iter_mut().for_each(|v| *v *= decay);
        for _ in 0..squarings {
            sum = sum.mul(&sum);
        }

        let values = (0..n).map(|j| sum.get(0, j)).collect::<Vec<_>>();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "matrix exponential produced non-finite entries at z = {z} \
                 (squarings = {squarings}, terms = {terms_used})"
            )));
        }
        Ok(TransientRow {
            values,
            squarings,
            taylor_terms: terms_used,
        })
    }

    /// `α exp(Tz) t`.
    pub fn pdf(&self, z: f64) -> Result<f64> {
        let row = self.transient_row(z)?;
        let n = self.order();
        Ok(row.values[n - 1] * self.rates[n - 1])
    }

    /// `α exp(Tz) 1`.
    pub fn survival(&self, z: f64) -> Result<f64> {
        let row = self.transient_row(z)?;
        Ok(compensated_sum(row.values).min(1.0))
    }

    pub fn cdf(&self, z: f64) -> Result<f64> {
        Ok(clamp_probability(1.0 - self.survival(z)?))
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.rates.iter().map(|r| 1.0 / r))
    }

    pub fn variance(&self) -> f64 {
        compensated_sum(self.rates.iter().map(|r| 1.0 / (r * r)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn ph(rates: &[f64]) -> PhaseTypeForm {
        PhaseTypeForm::from_rates(rates).unwrap()
    }

    #[test]
    fn generator_rows_sum_to_zero() {
        let p = ph(&[1.0, 2.5, 0.3]);
        let t = p.sub_generator();
        let exit = p.exit();
        for (i, row) in t.iter().enumerate() {
            let s: f64 = row.iter().sum::<f64>() + exit[i];
            assert_eq!(s, 0.0);
            assert!(row[i] < 0.0);
        }
        assert_eq!(p.initial(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn closed_form_examples() {
        assert!((ph(&[1.0, 2.0]).pdf(LN_2).unwrap() - 0.5).abs() < 1e-10);
        let e = (-1.0f64).exp();
        assert!((ph(&[1.0, 1.0]).pdf(1.0).unwrap() - e).abs() < 1e-14);
        assert!((ph(&[1.0, 1.0 + 1e-8]).pdf(1.0).unwrap() - e).abs() < 1e-8);
    }

    #[test]
    fn single_phase_is_exponential() {
        let p = ph(&[3.0]);
        for z in [0.0f64, 0.1, 1.0, 10.0, 200.0] {
            let exact = 3.0 * (-3.0 * z).exp();
            let got = p.pdf(z).unwrap();
            assert!((got - exact).abs() <= 1e-13 * exact, "z = {z}");
        }
    }

    #[test]
    fn erlang_tail_has_relative_accuracy() {
        // Erlang(3, 2) far in the tail: 2^3 z^2 e^{-2z} / 2
        let p = ph(&[2.0, 2.0, 2.0]);
        for z in [0.5f64, 5.0, 50.0, 300.0] {
            let exact = 4.0 * z * z * (-2.0 * z).exp();
            let got = p.pdf(z).unwrap();
            assert!((got / exact - 1.0).abs() < 1e-12, "z = {z}: {got} vs {exact}");
        }
    }

    #[test]
    fn survival_of_hypoexponential() {
        // rates (1, 2): survival = 2e^{-z} - e^{-2z}
        let p = ph(&[1.0, 2.0]);
        for z in [0.0f64, 0.3, 1.0, 4.0, 30.0] {
            let exact = 2.0 * (-z).exp() - (-2.0 * z).exp();
            // relative error grows like λz·eps through the squarings
            assert!((p.survival(z).unwrap() - exact).abs() <= 1e-13 * exact);
        }
        assert_eq!(p.cdf(0.0).unwrap(), 0.0);
    }

    #[test]
    fn phase_order_does_not_matter() {
        let a = ph(&[0.5, 3.0, 1.1, 7.0]);
        let b = ph(&[7.0, 1.1, 0.5, 3.0]);
        for z in [0.01, 0.4, 2.0, 9.0] {
            let (x, y) = (a.pdf(z).unwrap(), b.pdf(z).unwrap());
            assert!((x - y).abs() <= 1e-13 * x.abs());
        }
    }

    #[test]
    fn moments() {
        let p = ph(&[1.0, 2.0]);
        assert_eq!(p.mean(), 1.5);
        assert_eq!(p.variance(), 1.25);
    }
}
