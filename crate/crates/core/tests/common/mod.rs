#![allow(dead_code)]

use expstat::rates::relative_gap;
use expstat::RateVector;
use proptest::prelude::*;

/// Rates `10^e` with `e` uniform in `[lo, hi]`, pairwise relative gap above
/// `min_gap`.
pub fn spread_rates(
    len: std::ops::RangeInclusive<usize>,
    lo: f64,
    hi: f64,
    min_gap: f64,
) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..=hi, len)
        .prop_map(|es| es.into_iter().map(|e| 10f64.powf(e)).collect::<Vec<f64>>())
        .prop_filter("rates too close", move |r: &Vec<f64>| {
            r.iter()
                .enumerate()
                .all(|(i, &a)| r[..i].iter().all(|&b| relative_gap(a, b) > min_gap))
        })
}

/// Rate sets that may contain exact repeats, drawn from a small palette.
pub fn repeated_rates(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop::sample::select(vec![0.5, 1.0, 2.0, 3.5]), len)
}

pub fn rv(rates: &[f64]) -> RateVector {
    RateVector::new(rates.to_vec()).unwrap()
}

pub fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
