//! Acceptance criteria, one line each. Run with
//! `cargo test -p expstat-cli --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use expstat::convolution::{
    char_fn_linear_combination, char_fn_product, conv_coefficients, conv_pdf,
    conv_pdf_phase_type, gamma_limit_error, partial_fraction_identity_check,
};
use expstat::montecarlo::{
    factorization_test, ks_test, sample, sample_min_range_pairs, Statistic,
};
use expstat::oracle::IteratedConvolution;
use expstat::orderstats::{
    max2_via_convolution, max_cdf, max_mixture, max_mixture_cdf_discrepancy, min_law,
    order_statistic_cdf, OrderStatisticRequest,
};
use expstat::rates::relative_gap;
use expstat::{Hypoexponential, PhaseTypeForm, RateVector, RngStream};

const SEED: u64 = 20_240_917;

struct Outcome {
    passed: bool,
    detail: String,
}

fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `len` rates log-uniform in `[10^lo, 10^hi]` with pairwise relative gap
/// above `min_gap`, by rejection.
fn random_rates(rng: &mut RngStream, len: usize, lo: f64, hi: f64, min_gap: f64) -> RateVector {
    loop {
        let rates: Vec<f64> = (0..len)
            .map(|_| 10f64.powf(lo + (hi - lo) * rng.uniform()))
            .collect();
        let spread = rates.iter().enumerate().all(|(i, &a)| {
            rates[..i].iter().all(|&b| relative_gap(a, b) > min_gap)
        });
        if spread {
            return RateVector::new(rates).expect("positive rates");
        }
    }
}

fn uniform_len(rng: &mut RngStream, lo: usize, hi: usize) -> usize {
    lo + ((hi - lo + 1) as f64 * rng.uniform()) as usize
}

fn oracle_triangle() -> expstat::Result<Outcome> {
    let mut rng = RngStream::new(SEED, 1);
    let (mut cp, mut cq, mut pq) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let n = uniform_len(&mut rng, 2, 8);
        let rates = random_rates(&mut rng, n, -2.0, 2.0, 1e-3);
        let law = Hypoexponential::new(rates.clone());
        let zs = (0..20)
            .map(|i| law.quantile(0.05 + 0.9 * i as f64 / 19.0))
            .collect::<expstat::Result<Vec<_>>>()?;
        let coeffs = conv_coefficients(&rates)?;
        let phase = PhaseTypeForm::new(&rates);
        let quad = IteratedConvolution::new(rates.rates(), zs[19])?;
        for &z in &zs {
            let c = coeffs.closed_form_pdf(z)?;
            let p = conv_pdf_phase_type(&phase, z)?;
            let q = quad.pdf(z)?;
            cp = cp.max(relative_difference(c, p));
            cq = cq.max(relative_difference(c, q));
            pq = pq.max(relative_difference(p, q));
            // the dispatching evaluator must agree as well
            cp = cp.max(relative_difference(conv_pdf(&rates, z)?, p));
        }
    }
    let worst = cp.max(cq).max(pq);
    Ok(Outcome {
        passed: worst <= 1e-7,
        detail: format!(
            "50 sets x 20 points; closed/phase {cp:.1e}, closed/quadrature {cq:.1e}, \
             phase/quadrature {pq:.1e} (tol 1e-7)"
        ),
    })
}

fn coefficient_identities() -> expstat::Result<Outcome> {
    let mut rng = RngStream::new(SEED, 2);
    let (mut power_ratio, mut remain_ratio) = (0.0f64, 0.0f64);
    let mut passed = true;
    for _ in 0..100 {
        let n = uniform_len(&mut rng, 1, 10);
        let rates = random_rates(&mut rng, n, -2.0, 2.0, 1e-3);
        for check in conv_coefficients(&rates)?.power_sum_checks() {
            passed &= check.passed();
            power_ratio = power_ratio.max(check.residual() / check.tolerance);
        }
        let probe = loop {
            let p = 10f64.powf(-2.0 + 4.0 * rng.uniform());
            if rates.rates().iter().all(|&l| relative_gap(l, p) > 1e-3) {
                break p;
            }
        };
        let res = partial_fraction_identity_check(&rates, probe)?;
        passed &= res.passed();
        remain_ratio = remain_ratio.max(res.residual / res.tolerance);
    }
    Ok(Outcome {
        passed,
        detail: format!(
            "100 sets, N <= 10; worst residual/tolerance: power sums {power_ratio:.1e}, \
             induction identity {remain_ratio:.1e} (must be <= 1)"
        ),
    })
}

fn transform_equality() -> expstat::Result<Outcome> {
    let mut rng = RngStream::new(SEED, 3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = uniform_len(&mut rng, 1, 8);
        let rates = random_rates(&mut rng, n, -2.0, 2.0, 1e-3);
        for _ in 0..100 {
            let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            let t = sign * 10f64.powf(-3.0 + 6.0 * rng.uniform());
            let lhs = char_fn_product(&rates, t)?.value;
            let rhs = char_fn_linear_combination(&rates, t)?.value;
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(Outcome {
        passed: worst <= 1e-12,
        detail: format!("50 sets x 100 frequencies, N <= 8; max |difference| {worst:.1e} (tol 1e-12)"),
    })
}

fn gamma_limit() -> expstat::Result<Outcome> {
    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
    let deltas = [1e-1, 1e-2, 1e-3];
    let errors = deltas
        .iter()
        .map(|&d| gamma_limit_error(1.0, d, &grid))
        .collect::<expstat::Result<Vec<_>>>()?;
    let xs: Vec<f64> = deltas.iter().map(|d| d.log10()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.log10()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    let pairwise: Vec<f64> = (0..2).map(|i| (ys[i] - ys[i + 1]) / (xs[i] - xs[i + 1])).collect();
    let at_zero = gamma_limit_error(1.0, 0.0, &grid)?;
    let clustered = !RateVector::new(vec![1.0, 1.0])?.is_distinct();
    Ok(Outcome {
        passed: slope >= 1.9 && pairwise.iter().all(|&s| s >= 1.9) && at_zero == 0.0 && clustered,
        detail: format!(
            "errors {:.2e} {:.2e} {:.2e}; slope {slope:.3} (pairwise {:.3}, {:.3}; need >= 1.9); \
             deviation at delta=0: {at_zero:e}",
            errors[0], errors[1], errors[2], pairwise[0], pairwise[1]
        ),
    })
}

/// Every batch drawn by the sampling criteria, for the determinism rerun.
type Draws = Vec<Vec<f64>>;

fn order_statistics(draws: &mut Draws) -> expstat::Result<Outcome> {
    let mut rng = RngStream::new(SEED, 5);
    let mut max_form = 0.0f64;
    for n in 1..=12 {
        for _ in 0..2 {
            let rates = random_rates(&mut rng, n, -1.0, 1.0, 1e-3);
            let upper = ((n as f64).ln() + 25.0) / rates.min_rate();
            let grid: Vec<f64> = (0..50).map(|i| upper * i as f64 / 49.0).collect();
            max_form = max_form.max(max_mixture_cdf_discrepancy(&rates, &grid)?);
        }
    }

    let mut two_paths = 0.0f64;
    let mut same_structure = true;
    for &(a, b) in &[(1.0, 2.0), (0.3, 7.0), (5.0, 0.05), (1.0, 1.5)] {
        let direct = max_mixture(&RateVector::new(vec![a, b])?)?;
        match direct.max_coefficient_difference(&max2_via_convolution(a, b)?) {
            Some(d) => two_paths = two_paths.max(d),
            None => same_structure = false,
        }
    }

    let n = 100_000;
    let three = RateVector::new(vec![1.0, 2.0, 3.0])?;
    let five = RateVector::new(vec![0.5, 1.0, 1.5, 2.0, 4.0])?;
    let mut ks = Vec::new();
    for (k, rates) in [&three, &five].into_iter().enumerate() {
        let stream = 10 * k as u64;
        let min = min_law(rates);
        let batch = sample(Statistic::Min, rates, n, SEED, stream)?;
        ks.push(("min", rates.len(), ks_test(&batch, |z| min.cdf(z).unwrap_or(f64::NAN))?));
        draws.push(batch.values);
        let batch = sample(Statistic::Max, rates, n, SEED, stream + 1)?;
        ks.push(("max", rates.len(), ks_test(&batch, |z| max_cdf(rates, z).unwrap_or(f64::NAN))?));
        draws.push(batch.values);
    }
    for (rates, r, stream) in [(&three, 2, 20), (&five, 3, 21)] {
        let req = OrderStatisticRequest::new(rates.clone(), r)?;
        let batch = sample(Statistic::Order(r), rates, n, SEED, stream)?;
        let report = ks_test(&batch, |z| order_statistic_cdf(&req, z).unwrap_or(f64::NAN))?;
        ks.push(if r == 2 { ("X(2)", 3, report) } else { ("X(3)", 5, report) });
        draws.push(batch.values);
    }
    let ks_passed = ks.iter().all(|(_, _, r)| r.passed);
    let ks_summary: Vec<String> = ks
        .iter()
        .map(|(name, n, r)| format!("{name}/N={n} D/crit {:.2}", r.ks_statistic / r.critical_value))
        .collect();
    Ok(Outcome {
        passed: max_form <= 1e-9 && same_structure && two_paths <= 1e-12 && ks_passed,
        detail: format!(
            "max vs product cdf {max_form:.1e} (tol 1e-9, N <= 12); M2 paths {two_paths:.1e} \
             (tol 1e-12); KS n=1e5: {}",
            ks_summary.join(", ")
        ),
    })
}

fn independence(draws: &mut Draws) -> expstat::Result<Outcome> {
    let rates = RateVector::new(vec![1.0, 2.0])?;
    let pairs = sample_min_range_pairs(&rates, 1_000_000, SEED, 6)?;
    let report = factorization_test(&pairs, 10)?;
    let comonotone: Vec<(f64, f64)> = pairs.iter().map(|&(m, _)| (m, m)).collect();
    let control = factorization_test(&comonotone, 10)?;
    draws.push(pairs.iter().flat_map(|&(a, b)| [a, b]).collect());
    Ok(Outcome {
        passed: report.passed && !control.passed,
        detail: format!(
            "1e6 pairs: deviation {:.2e} vs threshold {:.2e} ({}); comonotone control {:.2e} ({})",
            report.max_deviation,
            report.threshold,
            if report.passed { "factorizes" } else { "does not factorize" },
            control.max_deviation,
            if control.passed { "wrongly passes" } else { "rejected" }
        ),
    })
}

fn run_cli(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_expstat"))
        .args(args)
        .env_remove("EXPSTAT_SEED")
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(0), "expstat {args:?} failed");
    String::from_utf8(out.stdout).expect("utf-8 output")
}

fn two_rate_sweep() -> expstat::Result<Outcome> {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let lambdas: Vec<(String, f64)> = (1..=10)
        .map(|n| (format!("{}", n as f64 / 10.0), n as f64 / 10.0))
        .chain((90..=100).map(|n| (format!("{}", n as f64 / 100.0), n as f64 / 100.0)))
        .collect();
    for (text, lambda) in &lambdas {
        let rates = format!("{text},1");
        let csv = run_cli(&[
            "curve", "--stat", "sum", "--rates", &rates, "--quantity", "pdf", "--range", "0:40",
            "--points", "4000",
        ]);
        let values: Vec<(f64, f64)> = csv
            .lines()
            .skip(1)
            .map(|l| {
                let (z, v) = l.split_once(',').expect("two columns");
                (z.parse().expect("number"), v.parse().expect("number"))
            })
            .collect();
        let finite = values.iter().all(|&(_, v)| v.is_finite());
        let non_negative = values.iter().all(|&(_, v)| v >= 0.0);
        let area: f64 = values
            .windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[1].1 + w[0].1))
            .sum();
        let deviation = (area - 1.0).abs();
        worst = worst.max(deviation);
        if !(finite && non_negative && deviation <= 1e-4 && values.len() == 4000) {
            let beyond = Hypoexponential::new(RateVector::new(vec![*lambda, 1.0])?)
                .cdf(40.0)
                .map(|c| 1.0 - c)?;
            failures.push(format!(
                "lambda1={text}: area {area:.6} (mass beyond 40 is {beyond:.2e})"
            ));
        }
    }
    Ok(Outcome {
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{} curves finite, non-negative; max |area - 1| {worst:.1e} (tol 1e-4)", lambdas.len())
        } else {
            format!("{} of {} curves off: {}", failures.len(), lambdas.len(), failures.join("; "))
        },
    })
}

fn determinism(first: &Draws) -> expstat::Result<Outcome> {
    let mut again = Vec::new();
    order_statistics(&mut again)?;
    independence(&mut again)?;
    let same = first.len() == again.len()
        && first.iter().zip(&again).all(|(a, b)| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        });
    let args = ["sample", "--stat", "order", "--r", "2", "--rates", "1,2,3", "--count", "10000", "--seed", "7"];
    let cli_same = run_cli(&args) == run_cli(&args);
    let values: usize = first.iter().map(Vec::len).sum();
    Ok(Outcome {
        passed: same && cli_same,
        detail: format!(
            "{} batches ({values} values) {}; CLI sample rerun {}",
            first.len(),
            if same { "bit-identical" } else { "differ" },
            if cli_same { "identical" } else { "differs" }
        ),
    })
}

fn report(id: u32, name: &str, limit: Option<Duration>, run: impl FnOnce() -> expstat::Result<Outcome>) -> bool {
    let start = Instant::now();
    let outcome = run();
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match outcome {
        Ok(o) => (o.passed, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    match limit {
        Some(limit) => {
            detail.push_str(&format!("; {:.2} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs()));
            passed &= elapsed < limit;
        }
        None => detail.push_str(&format!("; {:.2} s", elapsed.as_secs_f64())),
    }
    println!("ACCEPTANCE {id} {} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut draws = Draws::new();
    let results = [
        report(1, "oracle triangle", Some(secs(60)), oracle_triangle),
        report(2, "coefficient identities", Some(secs(5)), coefficient_identities),
        report(3, "transform equality", None, transform_equality),
        report(4, "gamma limit", None, gamma_limit),
        report(5, "order statistics", Some(secs(120)), || order_statistics(&mut draws)),
        report(6, "independence", None, || independence(&mut draws)),
        report(7, "two-rate density sweep", Some(secs(10)), two_rate_sweep),
        report(8, "determinism", None, || determinism(&draws)),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("ACCEPTANCE {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
