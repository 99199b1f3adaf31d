//! Convergence-bound machinery for the learning objective.
//!
//! The quality of a training schedule `(tau, g)` is scored through an upper
//! bound on the gap between distributed and centralized training. The bound
//! itself is awkward to optimize, so it is approximated by the two-parameter
//! surrogate `u = c1 / (g * tau^c2)` fitted by log-linear regression over a
//! schedule grid. Solvers consume the surrogate; this module owns both.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning-rate/divergence parameters of one orchestrator's task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningParams {
    /// SGD learning rate.
    pub eta: f64,
    /// Control parameter weighting the divergence gap.
    pub phi: f64,
    /// Bound on the gradient divergence between local and aggregated loss.
    pub delta: f64,
    /// Smoothness bound of the local losses.
    pub beta: f64,
    /// Maximum local iterations per global cycle.
    pub tau_max: u32,
    /// Global training-time budget in seconds.
    pub t_max: f64,
}

impl LearningParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta", self.eta),
            ("phi", self.phi),
            ("delta", self.delta),
            ("beta", self.beta),
            ("t_max", self.t_max),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be strictly positive")));
            }
        }
        if self.eta * self.beta > 1.0 {
            return Err(Error::domain("eta * beta must be <= 1"));
        }
        if self.tau_max < 1 {
            return Err(Error::domain("tau_max must be >= 1"));
        }
        Ok(())
    }
}

/// Fitted parameters of the accuracy proxy `u = c1 / (g * tau^c2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceApprox {
    pub c1: f64,
    pub c2: f64,
    /// Goodness of fit of the log-linear regression.
    pub fit_r2: f64,
}

impl ConvergenceApprox {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0) || !(self.c2 > 0.0) {
            return Err(Error::domain("c1 and c2 must be strictly positive"));
        }
        Ok(())
    }

    /// Same proxy with the iteration exponent pinned to 1 (used by the
    /// closed-form schedule bounds, which require it).
    pub fn with_unit_exponent(&self) -> Self {
        Self { c2: 1.0, ..*self }
    }
}

/// Divergence gap `H(tau) = (delta/beta) * [(eta*beta + 1)^tau - eta*delta*tau]`.
pub fn divergence_gap(tau: u32, p: &LearningParams) -> f64 {
    let growth = (p.eta * p.beta + 1.0).powi(tau as i32);
    p.delta / p.beta * (growth - p.eta * p.delta * tau as f64)
}

/// Effective per-iteration progress rate; the bound is valid only when this
/// is strictly positive.
fn progress_rate(tau: u32, p: &LearningParams) -> f64 {
    p.eta * (1.0 - p.beta * p.eta / 2.0) - p.phi * divergence_gap(tau, p) / tau as f64
}

/// Upper bound on the optimality gap after `g` global cycles of `tau` local
/// iterations: `1 / (g * tau * rate(tau))`.
pub fn convergence_upper_bound(g: u32, tau: u32, p: &LearningParams) -> Result<f64> {
    if g < 1 {
        return Err(Error::domain("g must be >= 1"));
    }
    if tau < 1 || tau > p.tau_max {
        return Err(Error::domain(format!("tau={tau} outside [1, {}]", p.tau_max)));
    }
    let rate = progress_rate(tau, p);
    if !(rate > 0.0) {
        return Err(Error::InvalidRegime { tau });
    }
    Ok(1.0 / (g as f64 * tau as f64 * rate))
}

/// Evaluate the fitted proxy at a schedule.
pub fn u_value(a: &ConvergenceApprox, tau: u32, g: u32) -> f64 {
    debug_assert!(tau >= 1 && g >= 1);
    a.c1 / (g as f64 * (tau as f64).powf(a.c2))
}

/// Fit `log(bound * g) = log c1 - c2 log tau` by least squares over the grid.
///
/// Every grid point must satisfy the bound's validity condition; the grid
/// needs at least two distinct `tau` values.
pub fn fit_approximation(p: &LearningParams, tau_grid: &[u32], g_grid: &[u32]) -> Result<ConvergenceApprox> {
    if tau_grid.is_empty() || g_grid.is_empty() {
        return Err(Error::Fit("empty fit grid".into()));
    }
    let mut xs = Vec::with_capacity(tau_grid.len() * g_grid.len());
    let mut ys = Vec::with_capacity(xs.capacity());
    for &tau in tau_grid {
        for &g in g_grid {
            let bound = convergence_upper_bound(g, tau, p)?;
            xs.push((tau as f64).ln());
            ys.push((bound * g as f64).ln());
        }
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    if sxx < 1e-12 {
        return Err(Error::Fit("degenerate grid: need at least two distinct tau values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let fit_r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let approx = ConvergenceApprox { c1: intercept.exp(), c2: -slope, fit_r2 };
    approx.validate()?;
    Ok(approx)
}

/// Default fit grid: all valid `tau` in `[1, tau_max]` crossed with `g` in
/// `[1, 50]`, clipping `tau` values where the bound's validity condition fails.
pub fn default_fit_grids(p: &LearningParams) -> (Vec<u32>, Vec<u32>) {
    let tau_grid: Vec<u32> = (1..=p.tau_max).filter(|&t| progress_rate(t, p) > 0.0).collect();
    (tau_grid, (1..=50).collect())
}

/// Fit the proxy on the default grid.
pub fn fit_default(p: &LearningParams) -> Result<ConvergenceApprox> {
    p.validate()?;
    let (tau_grid, g_grid) = default_fit_grids(p);
    if tau_grid.is_empty() {
        return Err(Error::Fit("no valid tau in [1, tau_max]".into()));
    }
    fit_approximation(p, &tau_grid, &g_grid)
}
