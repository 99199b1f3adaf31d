//! Log-barrier interior-point solver for the relaxed subproblems.
//!
//! Standard two-phase scheme: phase I minimizes the worst constraint slack
//! to find a strictly feasible point (or certify infeasibility), phase II
//! follows the central path with damped Newton steps. The reported duality
//! gap (`m / t`) makes `value - gap` a sound lower bound on the subproblem
//! optimum, which is what the branch-and-bound layer consumes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::program::{Constraint, ExpSumProgram, ExpTerm};

/// Result of a convex subproblem solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    /// Objective value at the returned (strictly feasible) point.
    pub value: f64,
    /// Certified duality gap at the returned point.
    pub gap: f64,
    /// Max of the scaled stationarity residual and the duality gap.
    pub kkt_residual: f64,
    /// Set when an iteration cap stopped the solve early.
    pub best_effort: bool,
}

impl SolveOutcome {
    /// Sound lower bound on the subproblem optimum.
    pub fn lower_bound(&self) -> f64 {
        self.value - self.gap
    }
}

const FREE_EPS: f64 = 1e-12;
const MAX_NEWTON: usize = 60;
const NEWTON_DEC_TOL: f64 = 1e-11;

struct Phi<'a> {
    prog: &'a ExpSumProgram,
    t: f64,
    free: &'a [bool],
}

impl Phi<'_> {
    fn strictly_feasible(&self, x: &[f64]) -> bool {
        let b = &self.prog.bounds;
        for j in 0..self.prog.dim {
            if self.free[j] && (x[j] <= b.lo[j] || x[j] >= b.hi[j]) {
                return false;
            }
        }
        self.prog.constraints.iter().all(|c| c.value(x) < 0.0)
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.t * self.prog.objective_value(x);
        for c in &self.prog.constraints {
            let g = c.value(x);
            if g >= 0.0 {
                return f64::INFINITY;
            }
            v -= (-g).ln();
        }
        let b = &self.prog.bounds;
        for j in 0..self.prog.dim {
            if self.free[j] {
                let (dl, dh) = (x[j] - b.lo[j], b.hi[j] - x[j]);
                if dl <= 0.0 || dh <= 0.0 {
                    return f64::INFINITY;
                }
                v -= dl.ln() + dh.ln();
            }
        }
        v
    }

    /// Gradient and Hessian of the barrier-augmented objective.
    fn grad_hess(&self, x: &[f64], grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) {
        let n = self.prog.dim;
        grad.fill(0.0);
        hess.fill(0.0);

        let add_exp_term = |term: &ExpTerm, mult: f64, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>| {
            let v = mult * term.value(x);
            for &(j, wj) in &term.exponent {
                grad[j] += v * wj;
                for &(k, wk) in &term.exponent {
                    hess[(j, k)] += v * wj * wk;
                }
            }
        };

        for term in &self.prog.objective {
            add_exp_term(term, self.t, grad, hess);
        }
        for &(j, w) in &self.prog.objective_affine {
            grad[j] += self.t * w;
        }

        let mut cgrad = DVector::<f64>::zeros(n);
        let mut touched: Vec<usize> = Vec::new();
        for c in &self.prog.constraints {
            let g = c.value(x);
            let inv = 1.0 / (-g);
            // gradient of the row
            cgrad.fill(0.0);
            touched.clear();
            for term in &c.exp_terms {
                let v = term.value(x);
                for &(j, wj) in &term.exponent {
                    if cgrad[j] == 0.0 {
                        touched.push(j);
                    }
                    cgrad[j] += v * wj;
                }
            }
            for &(j, w) in &c.affine {
                if cgrad[j] == 0.0 {
                    touched.push(j);
                }
                cgrad[j] += w;
            }
            touched.sort_unstable();
            touched.dedup();
            // -ln(-g): grad += cgrad/(-g); hess += cgrad cgrad^T / g^2 + hess_g/(-g)
            for &j in &touched {
                grad[j] += cgrad[j] * inv;
                for &k in &touched {
                    hess[(j, k)] += cgrad[j] * cgrad[k] * inv * inv;
                }
            }
            for term in &c.exp_terms {
                add_exp_term(term, inv, grad, hess);
            }
        }

        let b = &self.prog.bounds;
        for j in 0..n {
            if self.free[j] {
                let (dl, dh) = (x[j] - b.lo[j], b.hi[j] - x[j]);
                grad[j] += -1.0 / dl + 1.0 / dh;
                hess[(j, j)] += 1.0 / (dl * dl) + 1.0 / (dh * dh);
            }
        }
    }
}

struct CenteringResult {
    converged: bool,
    stationarity: f64,
}

/// Damped Newton to the central point at fixed barrier weight.
/// `early_exit` aborts centering as soon as the predicate holds.
fn center(
    phi: &Phi<'_>,
    x: &mut Vec<f64>,
    early_exit: Option<&dyn Fn(&[f64]) -> bool>,
) -> CenteringResult {
    let n = phi.prog.dim;
    let mut grad = DVector::<f64>::zeros(n);
    let mut hess = DMatrix::<f64>::zeros(n, n);
    let mut stationarity = f64::INFINITY;
    for _ in 0..MAX_NEWTON {
        if let Some(f) = early_exit {
            if f(x) {
                return CenteringResult { converged: true, stationarity };
            }
        }
        phi.grad_hess(x, &mut grad, &mut hess);
        // pinned variables take no step
        for j in 0..n {
            if !phi.free[j] {
                grad[j] = 0.0;
                for k in 0..n {
                    hess[(j, k)] = 0.0;
                    hess[(k, j)] = 0.0;
                }
                hess[(j, j)] = 1.0;
            }
        }
        stationarity = grad.amax();

        let mut ridge = 0.0;
        let dir = loop {
            let mut h = hess.clone();
            if ridge > 0.0 {
                for j in 0..n {
                    h[(j, j)] += ridge;
                }
            }
            match h.cholesky() {
                Some(chol) => break chol.solve(&(-&grad)),
                None => {
                    ridge = if ridge == 0.0 { 1e-10 } else { ridge * 100.0 };
                    if ridge > 1e6 {
                        return CenteringResult { converged: false, stationarity };
                    }
                }
            }
        };

        let decrement = -grad.dot(&dir);
        if decrement <= 2.0 * NEWTON_DEC_TOL {
            return CenteringResult { converged: true, stationarity };
        }

        // backtrack to strict feasibility, then Armijo
        let mut step = 1.0;
        let mut candidate: Vec<f64>;
        let phi_x = phi.value(x);
        loop {
            candidate = x.iter().zip(dir.iter()).map(|(xi, di)| xi + step * di).collect();
            if phi.strictly_feasible(&candidate)
                && phi.value(&candidate) <= phi_x - 0.01 * step * decrement
            {
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                return CenteringResult { converged: true, stationarity };
            }
        }
        *x = candidate;
    }
    CenteringResult { converged: false, stationarity }
}

struct BarrierRun {
    x: Vec<f64>,
    value: f64,
    gap: f64,
    kkt: f64,
    best_effort: bool,
}

/// Follow the central path from a strictly feasible `x0` until the duality
/// gap falls below `gap_target`.
fn barrier_loop(
    prog: &ExpSumProgram,
    free: &[bool],
    mut x: Vec<f64>,
    gap_target: f64,
    t0: f64,
    early_exit: Option<&dyn Fn(&[f64]) -> bool>,
) -> BarrierRun {
    let m = prog.constraints.len() as f64
        + 2.0 * free.iter().filter(|f| **f).count() as f64;
    let mut t = t0.max(1.0);
    let mu = 20.0;
    let mut best_effort = false;
    let mut stationarity = f64::INFINITY;
    loop {
        let phi = Phi { prog, t, free };
        let res = center(&phi, &mut x, early_exit);
        stationarity = res.stationarity / t;
        if !res.converged {
            best_effort = true;
        }
        if let Some(f) = early_exit {
            if f(&x) {
                break;
            }
        }
        if m / t <= gap_target {
            break;
        }
        t *= mu;
        if t > 1e16 {
            best_effort = true;
            break;
        }
    }
    let gap = m / t;
    BarrierRun {
        value: prog.objective_value(&x),
        x,
        gap,
        kkt: gap.max(stationarity),
        best_effort,
    }
}

fn center_point(prog: &ExpSumProgram, free: &[bool]) -> Vec<f64> {
    (0..prog.dim)
        .map(|j| {
            if free[j] {
                0.5 * (prog.bounds.lo[j] + prog.bounds.hi[j])
            } else {
                prog.bounds.lo[j]
            }
        })
        .collect()
}

/// Phase I: find a strictly feasible point of `prog`, or certify that the
/// feasible set is (numerically) empty. `hint` seeds the search (a nearly
/// feasible parent point converges in a handful of steps).
fn phase_one(prog: &ExpSumProgram, free: &[bool], tol: f64, hint: Option<&[f64]>) -> Result<Vec<f64>> {
    let center = center_point(prog, free);
    let x0 = match hint {
        Some(h) if h.len() == prog.dim => {
            let pulled: Vec<f64> = (0..prog.dim)
                .map(|j| {
                    if free[j] {
                        let margin = 1e-6 * (prog.bounds.hi[j] - prog.bounds.lo[j]);
                        h[j].clamp(prog.bounds.lo[j] + margin, prog.bounds.hi[j] - margin)
                    } else {
                        prog.bounds.lo[j]
                    }
                })
                .collect();
            if prog.max_constraint_violation(&pulled) < prog.max_constraint_violation(&center) {
                pulled
            } else {
                center
            }
        }
        _ => center,
    };
    let worst = prog.max_constraint_violation(&x0);
    if worst < 0.0 {
        return Ok(x0); // already strictly feasible
    }

    // Augmented program over (x, s): minimize s subject to g_i(x) - s <= 0.
    let s_idx = prog.dim;
    let scale = worst.abs().max(1.0);
    let mut bounds = prog.bounds.clone();
    bounds.lo.push(-10.0 * scale);
    bounds.hi.push(worst + scale);
    let constraints: Vec<Constraint> = prog
        .constraints
        .iter()
        .map(|c| {
            let mut affine = c.affine.clone();
            affine.push((s_idx, -1.0));
            Constraint {
                exp_terms: c.exp_terms.clone(),
                affine,
                constant: c.constant,
                label: c.label.clone(),
            }
        })
        .collect();
    let aug = ExpSumProgram {
        dim: prog.dim + 1,
        objective: Vec::new(),
        objective_affine: vec![(s_idx, 1.0)],
        constraints,
        bounds,
        underestimated_rows: 0,
    };
    let mut aug_free = free.to_vec();
    aug_free.push(true);

    let mut x_aug = center_point(&aug, &aug_free);
    x_aug[s_idx] = worst + 0.5 * scale;

    // stop as soon as the x-part is strictly inside the original set
    let margin = 1e-9 * scale;
    let strictly_ok = move |xa: &[f64]| -> bool {
        prog.max_constraint_violation(&xa[..prog.dim]) < -margin
    };
    let run = barrier_loop(&aug, &aug_free, x_aug, tol.min(1e-6), 1.0, Some(&strictly_ok));
    let x: Vec<f64> = run.x[..prog.dim].to_vec();
    if prog.max_constraint_violation(&x) < 0.0 {
        return Ok(x);
    }
    Err(Error::infeasible(format!(
        "phase I certificate: minimum slack {:.3e} >= 0",
        run.x[s_idx]
    )))
}

/// Solve the convex program to the requested duality gap.
///
/// The returned point is strictly feasible; `value - gap` lower-bounds the
/// true optimum. Infeasible programs surface as `Error::Infeasible`;
/// iteration caps set `best_effort` instead of failing.
pub fn solve_convex(prog: &ExpSumProgram, tol: f64) -> Result<SolveOutcome> {
    solve_convex_from(prog, tol, None)
}

/// Like [`solve_convex`], seeding the path-following from `warm` when that
/// point is strictly feasible (skips phase I, the usual case for
/// branch-and-bound children).
pub fn solve_convex_from(prog: &ExpSumProgram, tol: f64, warm: Option<&[f64]>) -> Result<SolveOutcome> {
    prog.bounds.validate()?;
    let free: Vec<bool> = (0..prog.dim)
        .map(|j| prog.bounds.hi[j] - prog.bounds.lo[j] > FREE_EPS)
        .collect();
    let warmed = warm.and_then(|w| strictify(prog, &free, w));
    let t0 = if warmed.is_some() { 50.0 } else { 1.0 };
    let x0 = warmed.map_or_else(|| phase_one(prog, &free, tol, warm), Ok)?;
    debug_assert!(prog.max_constraint_violation(&x0) < 0.0);
    let run = barrier_loop(prog, &free, x0, tol, t0, None);
    Ok(SolveOutcome {
        x: run.x,
        value: run.value,
        gap: run.gap,
        kkt_residual: run.kkt,
        best_effort: run.best_effort,
    })
}

/// Pull a candidate point strictly inside the box; keep it only if it is
/// also strictly feasible for all constraint rows.
fn strictify(prog: &ExpSumProgram, free: &[bool], w: &[f64]) -> Option<Vec<f64>> {
    if w.len() != prog.dim {
        return None;
    }
    let b = &prog.bounds;
    let x: Vec<f64> = (0..prog.dim)
        .map(|j| {
            if free[j] {
                let margin = 1e-7 * (b.hi[j] - b.lo[j]);
                w[j].clamp(b.lo[j] + margin, b.hi[j] - margin)
            } else {
                b.lo[j]
            }
        })
        .collect();
    (prog.max_constraint_violation(&x) < 0.0).then_some(x)
}
