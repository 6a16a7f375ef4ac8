//! Exact laws for sums and order statistics of independent exponential
//! random variables with distinct (or partially repeated) rates.
//!
//! The densities involved are all signed exponential mixtures
//! ([`SignedExponentialMixture`]). Sums are evaluated from partial-fraction
//! coefficients. Near-equal rates are merged into Erlang blocks, and a
//! phase-type form takes over when the closed form becomes ill-conditioned
//! ([`Hypoexponential`]). Maxima come from inclusion–exclusion. General order
//! statistics use a Poisson-binomial recursion and a sequential sampler.
//! [`montecarlo`] and [`oracle`] hold the statistical and quadrature checks
//! that back the closed forms.

pub mod convolution;
mod double_double;
pub mod error;
pub mod exponential;
pub mod mixture;
pub mod montecarlo;
pub mod oracle;
pub mod orderstats;
pub mod phase_type;
pub mod rates;
pub mod rng;
pub mod summation;

pub use convolution::{
    char_fn_linear_combination, char_fn_product, char_fn_single, conv_cdf, conv_coefficients,
    conv_mixture, conv_moments, conv_pdf, conv_pdf_phase_type, conv_quantile, gamma_limit_error,
    ordering_probability, partial_fraction_identity_check, CharacteristicFunctionValue,
    ConvolutionCoefficients, EvaluationPath, Hypoexponential,
};
pub use error::{Error, Result};
pub use exponential::ExponentialLaw;
pub use mixture::{SignedExponentialMixture, Term};
pub use montecarlo::{GoodnessOfFitReport, SampleBatch, Statistic};
pub use orderstats::OrderStatisticRequest;
pub use phase_type::PhaseTypeForm;
pub use rates::RateVector;
pub use rng::RngStream;
