//! Principal branch of the Lambert W function.
//!
//! `lambert_w0(x)` returns the unique `w >= -1` with `w * exp(w) == x` for
//! `x >= -1/e`. The initial guess depends on the regime (branch-point series,
//! `ln(1 + x)` in the middle, asymptotic logarithms for large `x`) and is
//! polished with Halley's iteration.

use crate::error::{Error, Result};

/// `-1/e`, the branch point of W.
pub const BRANCH_POINT: f64 = -0.367_879_441_171_442_33;

/// Inputs this far below the branch point are snapped onto it.
pub const BRANCH_SLACK: f64 = 1e-15;

const MAX_ITERATIONS: usize = 50;

/// Principal branch W₀.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < BRANCH_POINT - BRANCH_SLACK {
        return Err(Error::LambertDomain { x });
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if x <= BRANCH_POINT {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }

    let mut w = initial_guess(x);
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        if f.abs() <= 2.0 * f64::EPSILON * x.abs() {
            return Ok(w);
        }
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            // exactly on the branch point after rounding
            return Ok(w);
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        if !step.is_finite() {
            break;
        }
        let next = (w - step).max(-1.0);
        if (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs()) {
            return Ok(next);
        }
        w = next;
    }
    Err(Error::NoConvergence {
        what: "lambert_w0",
        iterations: MAX_ITERATIONS,
    })
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // series in p = sqrt(2(ex + 1)) around the branch point
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        (1.0 + x).ln() * (1.0 - (1.0 + x).ln() / (2.0 + (1.0 + x).ln()) * 0.5)
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}
