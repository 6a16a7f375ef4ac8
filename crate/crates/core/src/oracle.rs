//! Quadrature oracles for the sum density.
//!
//! These evaluate the convolution integral directly, independent of the
//! partial-fraction coefficients and of the matrix exponential. They are
//! slow and meant for verification (tests and `expstat check`), not for
//! routine evaluation.
//!
//! [`IteratedConvolution`] computes `f_k(z) = ∫_0^z f_{k−1}(x) λ_k e^{−λ_k (z−x)} dx`
//! level by level. Each intermediate density is tabulated at Chebyshev–Lobatto
//! nodes on geometrically graded panels and marched panel to panel:
//! `f_k(x) = f_k(a) e^{−λ_k (x−a)} + ∫_a^x f_{k−1}(s) λ_k e^{−λ_k (x−s)} ds`,
//! with the inner integral done by adaptive Gauss–Kronrod on the panel's
//! barycentric interpolant.

use crate::error::{check_non_negative, check_rate, Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub intervals: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive 7–15 Gauss–Kronrod quadrature on `[a, b]`, bisecting
/// the interval with the largest error estimate until the total estimate is
/// within `max(abs_tol, rel_tol · |value|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadratureResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration bounds must be finite: [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
            intervals: 0,
        });
    }
    let (v, e) = gk15(&f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let (mut total, mut err) = (v, e);
    loop {
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::Numerical(format!(
                "adaptive quadrature on [{a}, {b}] reached {MAX_INTERVALS} intervals \
                 with error estimate {err:e} (value {total:e})"
            )));
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (lo, hi, pv, pe) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (lv, le) = gk15(&f, lo, mid);
        let (rv, re) = gk15(&f, mid, hi);
        total += lv + rv - pv;
        err += le + re - pe;
        pieces.push((lo, mid, lv, le));
        pieces.push((mid, hi, rv, re));
    }
    // re-sum to shed drift from the incremental updates
    let value = pieces.iter().map(|p| p.2).sum();
    let error_estimate = pieces.iter().map(|p| p.3).sum();
    Ok(QuadratureResult {
        value,
        error_estimate,
        intervals: pieces.len(),
    })
}

/// `∫_0^z λ_1 e^{−λ_1 x} λ_2 e^{−λ_2 (z−x)} dx` by adaptive quadrature.
pub fn two_rate_convolution_pdf(rate_1: f64, rate_2: f64, z: f64) -> Result<f64> {
    check_rate(rate_1)?;
    check_rate(rate_2)?;
    check_non_negative("z", z)?;
    let r = integrate(
        |x| rate_1 * (-rate_1 * x).exp() * rate_2 * (-rate_2 * (z - x)).exp(),
        0.0,
        z,
        1e-15,
        1e-13,
    )?;
    Ok(r.value)
}

const NODES: usize = 24;
const PANEL_GROWTH: f64 = 1.25;
const QUAD_REL_TOL: f64 = 1e-13;

/// Chebyshev–Lobatto interpolation on a reference panel `[−1, 1]`.
#[derive(Debug, Clone)]
struct Lobatto {
    nodes: [f64; NODES],
    weights: [f64; NODES],
}

impl Lobatto {
    fn new() -> Self {
        let mut nodes = [0.0; NODES];
        let mut weights = [0.0; NODES];
        for j in 0..NODES {
            nodes[j] = -(std::f64::consts::PI * j as f64 / (NODES - 1) as f64).cos();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            weights[j] = if j == 0 || j == NODES - 1 { 0.5 * sign } else { sign };
        }
        nodes[0] = -1.0;
        nodes[NODES - 1] = 1.0;
        Self { nodes, weights }
    }

    fn map(&self, a: f64, b: f64, j: usize) -> f64 {
        if j == 0 {
            a
        } else if j == NODES - 1 {
            b
        } else {
            a + 0.5 * (b - a) * (self.nodes[j] + 1.0)
        }
    }

    fn interpolate(&self, a: f64, b: f64, values: &[f64], x: f64) -> f64 {
        let t = 2.0 * (x - a) / (b - a) - 1.0;
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&node, &weight), &value) in self.nodes.iter().zip(&self.weights).zip(values) {
            let d = t - node;
            if d == 0.0 {
                return value;
            }
            let w = weight / d;
            num += w * value;
            den += w;
        }
        num / den
    }
}

/// Sum density by iterated adaptive quadrature of the convolution integral.
#[derive(Debug, Clone)]
pub struct IteratedConvolution {
    rates: Vec<f64>,
    breaks: Vec<f64>,
    lobatto: Lobatto,
    /// Node values of `f_{N−1}`, `NODES` per panel.
    penultimate: Vec<f64>,
    /// `f_N` at each panel's left end.
    last_at_breaks: Vec<f64>,
}

impl IteratedConvolution {
    /// Prepares the oracle for evaluation on `[0, z_max]`.
    pub fn new(rates: &[f64], z_max: f64) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::Domain("at least one rate is required".into()));
        }
        for &r in rates {
            check_rate(r)?;
        }
        if !(z_max.is_finite() && z_max > 0.0) {
            return Err(Error::Domain(format!("z_max must be positive, got {z_max}")));
        }
        let fastest = rates.iter().copied().fold(0.0, f64::max);
        let slowest = rates.iter().copied().fold(f64::INFINITY, f64::min);
        let mut breaks = vec![0.0, (1e-2 / fastest).min(z_max)];
        while *breaks.last().unwrap() < z_max {
            let x = *breaks.last().unwrap();
            let width = ((PANEL_GROWTH - 1.0) * x).min(1.0 / slowest);
            breaks.push((x + width).min(z_max));
        }

        let lobatto = Lobatto::new();
        let panels = breaks.len() - 1;
        let mut oracle = Self {
            rates: rates.to_vec(),
            breaks,
            lobatto,
            penultimate: Vec::new(),
            last_at_breaks: Vec::new(),
        };
        if rates.len() == 1 {
            return Ok(oracle);
        }

        let l1 = rates[0];
        let mut current: Vec<f64> = (0..panels)
            .flat_map(|p| {
                let (a, b) = (oracle.breaks[p], oracle.breaks[p + 1]);
                let lob = &oracle.lobatto;
                (0..NODES).map(move |j| l1 * (-l1 * lob.map(a, b, j)).exp())
            })
            .collect();
        for &rate in &rates[1..rates.len() - 1] {
            current = oracle.march_nodes(&current, rate)?;
        }
        oracle.last_at_breaks = oracle.march_breaks(&current, *rates.last().unwrap())?;
        oracle.penultimate = current;
        Ok(oracle)
    }

    fn panel(&self, p: usize) -> (f64, f64) {
        (self.breaks[p], self.breaks[p + 1])
    }

    /// `∫_a^x I_p(s) λ e^{−λ(x−s)} ds` with `I_p` the interpolant of `prev` on panel `p`.
    fn panel_integral(&self, prev: &[f64], p: usize, rate: f64, x: f64) -> Result<f64> {
        let (a, b) = self.panel(p);
        if x <= a {
            return Ok(0.0);
        }
        let values = &prev[p * NODES..(p + 1) * NODES];
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Ok(0.0);
        }
        let abs_tol = 1e-17 * scale;
        let r = integrate(
            |s| self.lobatto.interpolate(a, b, values, s) * rate * (-rate * (x - s)).exp(),
            a,
            x,
            abs_tol,
            QUAD_REL_TOL,
        )?;
        Ok(r.value)
    }

    fn march_nodes(&self, prev: &[f64], rate: f64) -> Result<Vec<f64>> {
        let panels = self.breaks.len() - 1;
        let mut out = Vec::with_capacity(prev.len());
        let mut at_left = 0.0;
        for p in 0..panels {
            let (a, b) = self.panel(p);
            for j in 0..NODES {
                let x = self.lobatto.map(a, b, j);
                let v = if j == 0 {
                    at_left
                } else {
                    at_left * (-rate * (x - a)).exp() + self.panel_integral(prev, p, rate, x)?
                };
                out.push(v);
            }
            at_left = out[out.len() - 1];
        }
        Ok(out)
    }

    fn march_breaks(&self, prev: &[f64], rate: f64) -> Result<Vec<f64>> {
        let panels = self.breaks.len() - 1;
        let mut out = Vec::with_capacity(panels);
        let mut at_left = 0.0;
        for p in 0..panels {
            out.push(at_left);
            let (a, b) = self.panel(p);
            at_left = at_left * (-rate * (b - a)).exp() + self.panel_integral(prev, p, rate, b)?;
        }
        Ok(out)
    }

    pub fn z_max(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    pub fn pdf(&self, z: f64) -> Result<f64> {
        check_non_negative("z", z)?;
        if z > self.z_max() {
            return Err(Error::Domain(format!(
                "z = {z} beyond the prepared range {}",
                self.z_max()
            )));
        }
        let rate = *self.rates.last().unwrap();
        if self.rates.len() == 1 {
            return Ok(rate * (-rate * z).exp());
        }
        let p = self
            .breaks
            .partition_point(|&b| b <= z)
            .saturating_sub(1)
            .min(self.breaks.len() - 2);
        let a = self.breaks[p];
        Ok(self.last_at_breaks[p] * (-rate * (z - a)).exp()
            + self.panel_integral(&self.penultimate, p, rate, z)?)
    }
}
