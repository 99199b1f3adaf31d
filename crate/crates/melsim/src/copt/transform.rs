//! Log-space variable transform and the chord underestimator.
//!
//! The centralized solver works on `x = exp(x_bar)`. Exponential terms in
//! the objective and the `<=` constraint rows are convex as-is; the `>=`
//! rows carry concave `-exp` terms, which are relaxed by replacing `exp`
//! with its chord over the variable's box. `separation_max` is the exact
//! worst-case gap of that replacement and drives both branching and the
//! tightness analysis.

use crate::error::{Error, Result};

/// `x -> log x` for strictly positive values.
pub fn exp_transform(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("cannot log-transform non-positive value {x}")));
    }
    Ok(x.ln())
}

/// `x_bar -> exp(x_bar)`.
pub fn inverse_transform(x_bar: f64) -> f64 {
    x_bar.exp()
}

/// Chord of `exp` over `[x_min, x_max]`: an overestimator of `exp(x)` on the
/// interval (equivalently an underestimator of the concave `-exp(x)`).
pub fn linear_underestimator(x: f64, x_min: f64, x_max: f64) -> f64 {
    let width = x_max - x_min;
    if width <= 0.0 {
        return x_min.exp();
    }
    (x_max * x_min.exp() - x_min * x_max.exp()) / width + (x_max.exp() - x_min.exp()) / width * x
}

/// Chord slope and intercept over `[x_min, x_max]`, for assembling affine
/// constraint rows. Degenerate intervals collapse to the constant chord.
pub fn underestimator_line(x_min: f64, x_max: f64) -> (f64, f64) {
    let width = x_max - x_min;
    if width <= 1e-15 {
        return (0.0, x_min.exp());
    }
    let slope = (x_max.exp() - x_min.exp()) / width;
    let intercept = (x_max * x_min.exp() - x_min * x_max.exp()) / width;
    (slope, intercept)
}

/// Exact maximum of the separation `delta(x) = L(x) - exp(x)` over the
/// interval: `e^{x_min} (1 - Z + Z log Z)` with `Z = (e^w - 1)/w`.
pub fn separation_max(x_min: f64, x_max: f64) -> f64 {
    let width = x_max - x_min;
    if width <= 0.0 {
        return 0.0;
    }
    // Z - 1 and log Z via expm1/ln_1p to survive small widths.
    let z_minus_1 = (width.exp_m1() - width) / width;
    let z = 1.0 + z_minus_1;
    let log_z = z_minus_1.ln_1p();
    x_min.exp() * (z * log_z - z_minus_1)
}

/// Interior point where the separation peaks: `x_min + log Z`.
pub fn separation_argmax(x_min: f64, x_max: f64) -> f64 {
    let width = x_max - x_min;
    if width <= 0.0 {
        return x_min;
    }
    let z = width.exp_m1() / width;
    x_min + z.ln()
}
