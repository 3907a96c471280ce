//! Scalar tail and moment utilities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::E;

use crate::error::{domain, validation, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Survival of the log-log tail law: `e / (t ln t)` for `t >= e`, else 1.
pub fn loglog_survival(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t <= E {
        1.0
    } else {
        (E / (t * t.ln())).min(1.0)
    }
}

/// Inverse of [`loglog_survival`]: the `t >= e` with `e / (t ln t) = u`.
///
/// Solved by Newton's method on `t ln t = e / u`, started above the root so
/// that the iterates decrease monotonically, with a bisection fallback.
pub fn loglog_tail_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(domain(format!("tail probability {u} outside (0, 1]")));
    }
    if u == 1.0 {
        return Ok(E);
    }
    let c = E / u;
    let g = |t: f64| t * t.ln() - c;
    let (mut lo, mut hi) = (E, c.max(E));
    let mut t = hi;
    for _ in 0..200 {
        let gt = g(t);
        if gt == 0.0 {
            return Ok(t);
        }
        if gt > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let mut next = t - gt / (t.ln() + 1.0);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t {
            return Ok(next);
        }
        t = next;
    }
    Ok(t)
}

/// Chernoff bound `P(chi2_m > x) <= 2^{m/2} e^{-x/4}` (moment generating
/// function at `1/4`).
pub fn chernoff_chisq_bound(m: f64, x: f64) -> Result<f64> {
    if !(m >= 1.0) || !(x > 0.0) {
        return Err(domain(format!("Chernoff bound needs m >= 1 and x > 0, got m = {m}, x = {x}")));
    }
    Ok((0.5 * m * std::f64::consts::LN_2 - 0.25 * x).exp())
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
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
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Panel { a, b, value: kronrod * h, error: ((kronrod - gauss) * h).abs() }
}

/// Globally adaptive Gauss-Kronrod 7/15 integration with absolute tolerance.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> f64 {
    let mut heap = BinaryHeap::new();
    let first = gk15(&mut f, a, b);
    let mut err = first.error;
    heap.push(first);
    for _ in 0..20_000 {
        if err <= abs_tol {
            break;
        }
        let Some(p) = heap.pop() else { break };
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(Panel { error: 0.0, ..p });
            continue;
        }
        let left = gk15(&mut f, p.a, m);
        let right = gk15(&mut f, m, p.b);
        err += left.error + right.error - p.error;
        heap.push(left);
        heap.push(right);
    }
    heap.iter().map(|p| p.value).sum()
}

/// `E|Y|^p = int_0^inf p t^{p-1} P(|Y| > t) dt`, integrated on `[0, upper]`.
///
/// The omitted tail `int_upper^inf p t^{p-1} S(t) dt` is the caller's
/// truncation error; it vanishes when `S(upper) = 0`. The survival function
/// is checked to take values in `[0, 1]` and be nonincreasing on every
/// quadrature node.
pub fn moment_via_tail(survival: impl Fn(f64) -> f64, p: f64, upper: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(domain(format!("moment order must be positive, got {p}")));
    }
    if !(upper > 0.0 && upper.is_finite()) {
        return Err(domain(format!("upper limit must be positive and finite, got {upper}")));
    }
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    let value = integrate(
        |t| {
            let s = survival(t);
            nodes.push((t, s));
            if t == 0.0 {
                if p == 1.0 {
                    s
                } else if p > 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                p * t.powf(p - 1.0) * s
            }
        },
        0.0,
        upper,
        1e-8,
    );
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (t, s) in &nodes {
        if !(0.0..=1.0).contains(s) {
            return Err(validation(format!("survival value {s} at t = {t} outside [0, 1]")));
        }
    }
    for w in nodes.windows(2) {
        if w[1].1 > w[0].1 + 1e-15 {
            return Err(validation(format!("survival function increases between t = {} and t = {}", w[0].0, w[1].0)));
        }
    }
    Ok(value)
}

/// Fraction of nonnegative values, the empirical `P(Y >= 0)`.
pub fn sign_probability_check(projections: &[f64]) -> Result<f64> {
    if projections.len() < 1000 {
        return Err(domain(format!("sign check needs at least 1000 samples, got {}", projections.len())));
    }
    let k = projections.iter().filter(|y| **y >= 0.0).count();
    Ok(k as f64 / projections.len() as f64)
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let ph = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (ph + z2 / (2.0 * nf)) / denom;
    let half = z * (ph * (1.0 - ph) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}
