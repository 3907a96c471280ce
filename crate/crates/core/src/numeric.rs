//! Log-domain scalar helpers shared by the hyperbolic and SPD geometries.

use std::f64::consts::LN_2;

/// `ln(sinh x)` for `x >= 0`; `-inf` at zero.
pub(crate) fn ln_sinh(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        f64::NEG_INFINITY
    } else if x > 20.0 {
        x - LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

/// `ln(cosh x)`.
pub(crate) fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        // cosh a - 1 = 2 sinh^2(a/2)
        (2.0 * (0.5 * a).sinh().powi(2)).ln_1p()
    } else {
        a - LN_2 + (-2.0 * a).exp().ln_1p()
    }
}

/// `ln(e^a + e^b)`.
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum_i e^{a_i})`.
pub(crate) fn log_sum_exp(terms: impl IntoIterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let hi = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + terms.iter().map(|t| (t - hi).exp()).sum::<f64>().ln()
}

/// `asinh(e^a)` without overflow.
pub(crate) fn asinh_exp(a: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        0.0
    } else if a > 20.0 {
        a + (1.0 + (1.0 + (-2.0 * a).exp()).sqrt()).ln()
    } else {
        a.exp().asinh()
    }
}

/// Geodesic distance in curvature `-1` from `ln((cosh d - 1) / 2) = ln sinh^2(d/2)`.
pub(crate) fn distance_from_ln_half_gap(ln_q: f64) -> f64 {
    2.0 * asinh_exp(0.5 * ln_q)
}
