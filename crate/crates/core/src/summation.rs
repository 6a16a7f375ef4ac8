//! Compensated (Neumaier) summation.
//!
//! Signed exponential mixtures routinely add terms of alternating sign whose
//! magnitudes dwarf the result, so every evaluation in this crate accumulates
//! through [`CompensatedSum`].

use num_complex::Complex64;

/// Running sum with a Neumaier error term.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        s.extend(iter);
        s
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Sums `terms` in descending order of magnitude with compensation.
///
/// The slice is reordered in place.
pub fn sum_descending(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(|a, b| b.abs().total_cmp(&a.abs()));
    compensated_sum(terms.iter().copied())
}

/// Component-wise compensated sum of complex values.
pub fn compensated_sum_complex<I: IntoIterator<Item = Complex64>>(iter: I) -> Complex64 {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for z in iter {
        re.add(z.re);
        im.add(z.im);
    }
    Complex64::new(re.value(), im.value())
}
