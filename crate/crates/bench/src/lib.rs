//! Rate-vector fixtures shared by the benchmarks.

use expstat::RateVector;

/// `n` well-separated rates spread geometrically over `[0.1, 10]`.
pub fn spread(n: usize) -> RateVector {
    let rates = (0..n)
        .map(|i| 0.1 * 100f64.powf(i as f64 / (n.max(2) - 1) as f64))
        .collect();
    RateVector::new(rates).expect("positive rates")
}

/// `n` rates packed within a relative band of `1e-5`, which forces the
/// phase-type path.
pub fn packed(n: usize) -> RateVector {
    RateVector::new((0..n).map(|i| 1.0 + 1e-6 * i as f64).collect()).expect("positive rates")
}

/// Rates with repeated values, exercising Erlang blocks.
pub fn repeated(n: usize) -> RateVector {
    RateVector::new((0..n).map(|i| 1.0 + (i / 3) as f64).collect()).expect("positive rates")
}
