use crate::error::{check_non_negative, check_rate, Result};
use crate::mixture::{SignedExponentialMixture, Term};
use crate::rng::RngStream;

/// `Exp(rate)` with density `λ e^{-λx}` on `x ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialLaw {
    rate: f64,
}

impl ExponentialLaw {
    pub fn new(rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.rate
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        check_non_negative("x", x)?;
        Ok(self.rate * (-self.rate * x).exp())
    }

    /// `1 − e^{−λx}` via `expm1`, accurate for small `λx`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_non_negative("x", x)?;
        Ok(-(-self.rate * x).exp_m1())
    }

    pub fn survival(&self, x: f64) -> Result<f64> {
        check_non_negative("x", x)?;
        Ok((-self.rate * x).exp())
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(crate::Error::Domain(format!(
                "probability must lie in (0, 1), got {p}"
            )));
        }
        Ok(-(-p).ln_1p() / self.rate)
    }

    /// Inverse-transform draw `−ln(U)/λ`.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        rng.exponential(self.rate)
    }

    /// The density as a one-term mixture.
    pub fn to_mixture(&self) -> SignedExponentialMixture {
        SignedExponentialMixture::density(vec![Term::new(self.rate, self.rate, 0)])
            .expect("a single exponential term integrates to one")
    }
}
