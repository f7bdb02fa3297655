//! Special functions used by closed-form reference values.

use crate::error::{Error, Result};

/// Dilogarithm `Li₂(y) = Σ_{j≥1} y^j/j²` for `0 ≤ y ≤ 1`.
pub fn dilog(y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::domain(format!("dilogarithm implemented on [0, 1], got {y}")));
    }
    if y == 1.0 {
        return Ok(std::f64::consts::PI.powi(2) / 6.0);
    }
    if y <= 0.5 {
        return Ok(dilog_series(y));
    }
    // Li₂(y) + Li₂(1−y) = π²/6 − ln y · ln(1−y)
    let z = 1.0 - y;
    Ok(std::f64::consts::PI.powi(2) / 6.0 - y.ln() * z.ln() - dilog_series(z))
}

fn dilog_series(y: f64) -> f64 {
    let mut sum = 0.0f64;
    let mut p = y;
    let mut j = 1.0f64;
    while p > 1e-18 * sum.max(f64::MIN_POSITIVE) || j < 2.0 {
        sum += p / (j * j);
        p *= y;
        j += 1.0;
        if p == 0.0 {
            break;
        }
    }
    sum
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Upper incomplete gamma `Γ(a, x) = ∫_x^∞ s^{a−1} e^{−s} ds`.
pub fn upper_incomplete_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return gamma(a);
    }
    statrs::function::gamma::gamma_ur(a, x) * gamma(a)
}
