//! Assembly of the relaxed convex subproblem over a variable box.
//!
//! All variables live in log space. The objective and every `<=` row are
//! sums of exponentials of affine forms (convex); the two `>=` rows per
//! learner/orchestrator are replaced by affine chord underestimators, so the
//! whole program is convex. Tiny slacks sized by the variable floor keep the
//! floored image of every integer-feasible point inside the feasible set,
//! which preserves the lower-bound property of the relaxation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mop::{C2Mode, Instance, Normalization, SolverConfig};

use super::transform::underestimator_line;

/// Index layout of the transformed variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub learners: usize,
    pub orchestrators: usize,
}

impl VarLayout {
    pub fn new(inst: &Instance) -> Self {
        Self { learners: inst.learners(), orchestrators: inst.orchestrators() }
    }

    pub fn dim(&self) -> usize {
        2 * self.learners * self.orchestrators + 2 * self.orchestrators
    }

    /// Association variable of pair `(l, o)`.
    pub fn assoc(&self, l: usize, o: usize) -> usize {
        l * self.orchestrators + o
    }

    /// Allocation variable of pair `(l, o)`.
    pub fn alloc(&self, l: usize, o: usize) -> usize {
        self.learners * self.orchestrators + l * self.orchestrators + o
    }

    /// Local-iteration variable of orchestrator `o`.
    pub fn tau(&self, o: usize) -> usize {
        2 * self.learners * self.orchestrators + o
    }

    /// Global-cycle variable of orchestrator `o`.
    pub fn cycles(&self, o: usize) -> usize {
        2 * self.learners * self.orchestrators + self.orchestrators + o
    }

    /// True for variables whose chords enter the relaxation (association and
    /// allocation); only these are worth branching on.
    pub fn is_underestimated(&self, var: usize) -> bool {
        var < 2 * self.learners * self.orchestrators
    }
}

/// Per-variable bounds of the transformed domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl VarBox {
    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() {
            return Err(Error::domain("box bound lengths differ"));
        }
        for (j, (l, h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::domain(format!("box bounds for variable {j} must be finite")));
            }
            if l > h {
                return Err(Error::domain(format!("empty box: lo > hi for variable {j}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        0.5 * (self.lo[j] + self.hi[j])
    }

    pub fn width(&self, j: usize) -> f64 {
        self.hi[j] - self.lo[j]
    }

    /// Split on variable `j` at its midpoint.
    pub fn bisect(&self, j: usize) -> (VarBox, VarBox) {
        let mid = self.midpoint(j);
        let mut left = self.clone();
        let mut right = self.clone();
        left.hi[j] = mid;
        right.lo[j] = mid;
        (left, right)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= l - 1e-9 && *v <= h + 1e-9)
    }
}

/// One exponential term `coef * exp(sum w_k x_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpTerm {
    pub coef: f64,
    pub exponent: Vec<(usize, f64)>,
}

impl ExpTerm {
    fn of(coef: f64, exponent: Vec<(usize, f64)>) -> Self {
        Self { coef, exponent }
    }

    pub fn eval_exponent(&self, x: &[f64]) -> f64 {
        self.exponent.iter().map(|&(j, w)| w * x[j]).sum()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.coef * self.eval_exponent(x).exp()
    }
}

/// Constraint `sum exp-terms + affine + constant <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub exp_terms: Vec<ExpTerm>,
    pub affine: Vec<(usize, f64)>,
    pub constant: f64,
    pub label: String,
}

impl Constraint {
    pub fn value(&self, x: &[f64]) -> f64 {
        let e: f64 = self.exp_terms.iter().map(|t| t.value(x)).sum();
        let a: f64 = self.affine.iter().map(|&(j, w)| w * x[j]).sum();
        e + a + self.constant
    }
}

/// A convex exponential-sum program over a box.
#[derive(Debug, Clone)]
pub struct ExpSumProgram {
    pub dim: usize,
    pub objective: Vec<ExpTerm>,
    pub objective_affine: Vec<(usize, f64)>,
    pub constraints: Vec<Constraint>,
    pub bounds: VarBox,
    /// Number of `>=` rows whose exponentials were chord-substituted.
    pub underestimated_rows: usize,
}

impl ExpSumProgram {
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let e: f64 = self.objective.iter().map(|t| t.value(x)).sum();
        let a: f64 = self.objective_affine.iter().map(|&(j, w)| w * x[j]).sum();
        e + a
    }

    pub fn max_constraint_violation(&self, x: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.value(x)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The transformed domain: associations and allocations in `[floor, 1]`,
/// iterations in `[1, tau_max]`, cycles in `[1, g_cap]`, all in log space.
pub fn default_box(inst: &Instance, cfg: &SolverConfig) -> VarBox {
    let layout = VarLayout::new(inst);
    let mut lo = vec![0.0; layout.dim()];
    let mut hi = vec![0.0; layout.dim()];
    let floor_log = cfg.lambda_floor.ln();
    for l in 0..layout.learners {
        for o in 0..layout.orchestrators {
            lo[layout.assoc(l, o)] = floor_log;
            hi[layout.assoc(l, o)] = 0.0;
            lo[layout.alloc(l, o)] = floor_log;
            hi[layout.alloc(l, o)] = 0.0;
        }
    }
    let mut a0_min = f64::INFINITY;
    for l in 0..layout.learners {
        for o in 0..layout.orchestrators {
            a0_min = a0_min.min(inst.topo.coeff(l, o).a0);
        }
    }
    let g_cap = (inst.params.t_max / a0_min).floor().max(1.0);
    for o in 0..layout.orchestrators {
        lo[layout.tau(o)] = 0.0;
        hi[layout.tau(o)] = (inst.params.tau_max as f64).ln();
        lo[layout.cycles(o)] = 0.0;
        hi[layout.cycles(o)] = g_cap.ln();
    }
    VarBox { lo, hi }
}

/// Assemble the relaxed convex subproblem of the transformed program over
/// `bounds`.
pub fn build_relaxed_subproblem(
    inst: &Instance,
    cfg: &SolverConfig,
    norm: &Normalization,
    bounds: &VarBox,
) -> Result<ExpSumProgram> {
    bounds.validate()?;
    let layout = VarLayout::new(inst);
    if bounds.dim() != layout.dim() {
        return Err(Error::domain("box dimension does not match the instance"));
    }
    let n_learn = layout.learners;
    let n_orch = layout.orchestrators;
    let floor = cfg.lambda_floor;
    let energy_scale = cfg.alpha / (norm.e_max * n_learn as f64);
    let proxy_scale = (1.0 - cfg.alpha) / (norm.u_max * n_orch as f64);

    let mut objective = Vec::new();
    for l in 0..n_learn {
        for o in 0..n_orch {
            let c = inst.topo.coeff(l, o);
            let (lam, all, tau, g) =
                (layout.assoc(l, o), layout.alloc(l, o), layout.tau(o), layout.cycles(o));
            if energy_scale > 0.0 {
                objective.push(ExpTerm::of(energy_scale * c.z0, vec![(lam, 1.0), (g, 1.0)]));
                objective.push(ExpTerm::of(
                    energy_scale * c.z1,
                    vec![(lam, 1.0), (g, 1.0), (all, 1.0)],
                ));
                objective.push(ExpTerm::of(
                    energy_scale * c.z2,
                    vec![(lam, 1.0), (g, 1.0), (all, 1.0), (tau, 1.0)],
                ));
            }
        }
    }
    if proxy_scale > 0.0 {
        for o in 0..n_orch {
            let c2 = match cfg.copt_c2 {
                C2Mode::One => 1.0,
                C2Mode::Fitted => inst.approx[o].c2,
            };
            objective.push(ExpTerm::of(
                proxy_scale * inst.approx[o].c1,
                vec![(layout.tau(o), -c2), (layout.cycles(o), -1.0)],
            ));
        }
    }

    let mut constraints = Vec::new();
    let mut underestimated_rows = 0;

    // Per learner: time budget, association window, pairwise exclusivity.
    let time_rhs = inst.params.t_max * (1.0 + 100.0 * floor * n_orch as f64);
    for l in 0..n_learn {
        let mut time_terms = Vec::with_capacity(3 * n_orch);
        for o in 0..n_orch {
            let c = inst.topo.coeff(l, o);
            let (lam, all, tau, g) =
                (layout.assoc(l, o), layout.alloc(l, o), layout.tau(o), layout.cycles(o));
            time_terms.push(ExpTerm::of(c.a0, vec![(lam, 1.0), (g, 1.0)]));
            time_terms.push(ExpTerm::of(c.a1, vec![(lam, 1.0), (g, 1.0), (all, 1.0)]));
            time_terms.push(ExpTerm::of(
                c.a2,
                vec![(lam, 1.0), (g, 1.0), (all, 1.0), (tau, 1.0)],
            ));
        }
        constraints.push(Constraint {
            exp_terms: time_terms,
            affine: Vec::new(),
            constant: -time_rhs,
            label: format!("time[{l}]"),
        });

        constraints.push(Constraint {
            exp_terms: (0..n_orch)
                .map(|o| ExpTerm::of(1.0, vec![(layout.assoc(l, o), 1.0)]))
                .collect(),
            affine: Vec::new(),
            constant: -(1.0 + (n_orch.saturating_sub(1)) as f64 * floor),
            label: format!("assoc_ub[{l}]"),
        });

        // 1 - sum L(assoc) <= 0, chord per variable over its current bounds.
        // The floor-sized slack keeps the row's interior nonempty (with a
        // single orchestrator the unslacked row pins the variable exactly).
        let mut affine = Vec::with_capacity(n_orch);
        let mut constant = 1.0 - floor;
        for o in 0..n_orch {
            let j = layout.assoc(l, o);
            let (slope, intercept) = underestimator_line(bounds.lo[j], bounds.hi[j]);
            affine.push((j, -slope));
            constant -= intercept;
        }
        constraints.push(Constraint {
            exp_terms: Vec::new(),
            affine,
            constant,
            label: format!("assoc_lb[{l}]"),
        });
        underestimated_rows += 1;

        if n_orch >= 2 {
            let mut pair_terms = Vec::new();
            for i in 0..n_orch - 1 {
                for jj in i + 1..n_orch {
                    pair_terms.push(ExpTerm::of(
                        1.0,
                        vec![(layout.assoc(l, i), 1.0), (layout.assoc(l, jj), 1.0)],
                    ));
                }
            }
            constraints.push(Constraint {
                exp_terms: pair_terms,
                affine: Vec::new(),
                constant: -cfg.epsilon_assoc,
                label: format!("pairwise[{l}]"),
            });
        }
    }

    // Per orchestrator: allocation window. The mass constraint counts only
    // associated pairs, so the rows carry the association factor inside the
    // exponent (`exp(assoc + alloc)`); without it the relaxation can park
    // data mass on floor-level associations for free and the lower bound
    // never tightens. The chord on the `>=` side runs over the sum interval.
    for o in 0..n_orch {
        constraints.push(Constraint {
            exp_terms: (0..n_learn)
                .map(|l| {
                    ExpTerm::of(1.0, vec![(layout.assoc(l, o), 1.0), (layout.alloc(l, o), 1.0)])
                })
                .collect(),
            affine: Vec::new(),
            constant: -(1.0 + n_learn as f64 * floor),
            label: format!("alloc_ub[{o}]"),
        });

        let mut affine = Vec::with_capacity(2 * n_learn);
        let mut constant = 1.0 - floor;
        for l in 0..n_learn {
            let (lam, all) = (layout.assoc(l, o), layout.alloc(l, o));
            let (slope, intercept) = underestimator_line(
                bounds.lo[lam] + bounds.lo[all],
                bounds.hi[lam] + bounds.hi[all],
            );
            affine.push((lam, -slope));
            affine.push((all, -slope));
            constant -= intercept;
        }
        constraints.push(Constraint {
            exp_terms: Vec::new(),
            affine,
            constant,
            label: format!("alloc_lb[{o}]"),
        });
        underestimated_rows += 1;
    }

    Ok(ExpSumProgram {
        dim: layout.dim(),
        objective,
        objective_affine: Vec::new(),
        constraints,
        bounds: bounds.clone(),
        underestimated_rows,
    })
}

/// Map an integer-feasible solution into the transformed box, flooring
/// association/allocation variables so logs stay finite.
pub fn map_solution_to_box(
    sol: &crate::mop::AssignmentSolution,
    inst: &Instance,
    cfg: &SolverConfig,
    bounds: &VarBox,
) -> Vec<f64> {
    let layout = VarLayout::new(inst);
    let mut x = vec![0.0; layout.dim()];
    for l in 0..layout.learners {
        for o in 0..layout.orchestrators {
            let lam = if sol.association[l] == Some(o) { 1.0 } else { cfg.lambda_floor };
            let n = if sol.association[l] == Some(o) {
                sol.allocation[l].max(cfg.lambda_floor)
            } else {
                cfg.lambda_floor
            };
            x[layout.assoc(l, o)] = lam.ln();
            x[layout.alloc(l, o)] = n.ln();
        }
    }
    for o in 0..layout.orchestrators {
        x[layout.tau(o)] = (sol.tau[o] as f64).ln();
        x[layout.cycles(o)] = (sol.cycles[o] as f64).ln();
    }
    for (j, v) in x.iter_mut().enumerate() {
        *v = v.clamp(bounds.lo[j], bounds.hi[j]);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mop::tests::seeded_instance;
    use crate::mop::normalization_constants;
    use approx::assert_relative_eq;

    #[test]
    fn structural_counts() {
        let inst = seeded_instance(2, 5, 1);
        let cfg = SolverConfig::default();
        let norm = normalization_constants(&inst).unwrap();
        let bounds = default_box(&inst, &cfg);
        let prog = build_relaxed_subproblem(&inst, &cfg, &norm, &bounds).unwrap();
        // one chord row per learner and per orchestrator
        assert_eq!(prog.underestimated_rows, 5 + 2);
        // objective: 3 energy terms per pair + 1 proxy term per orchestrator
        assert_eq!(prog.objective.len(), 3 * 5 * 2 + 2);
        // rows: |L| time + |L| assoc_ub + |L| assoc_lb + |L| pairwise + |O| alloc_ub + |O| alloc_lb
        assert_eq!(prog.constraints.len(), 4 * 5 + 2 * 2);
        assert_eq!(prog.dim, 2 * 5 * 2 + 2 * 2);
    }

    #[test]
    fn pure_energy_objective_reduces_to_exponentials() {
        let inst = seeded_instance(1, 1, 2);
        let mut cfg = SolverConfig::default();
        cfg.alpha = 1.0;
        let norm = normalization_constants(&inst).unwrap();
        let bounds = default_box(&inst, &cfg);
        let prog = build_relaxed_subproblem(&inst, &cfg, &norm, &bounds).unwrap();
        assert_eq!(prog.objective.len(), 3);
        assert!(prog.objective.iter().all(|t| t.coef > 0.0));
    }

    #[test]
    fn objective_matches_scalarized_objective_at_mapped_point() {
        // At an integer-feasible point the program objective equals J up to
        // the floored phantom-pair contribution, which is O(floor).
        let inst = seeded_instance(2, 4, 7);
        let cfg = SolverConfig::default();
        let norm = normalization_constants(&inst).unwrap();
        let bounds = default_box(&inst, &cfg);
        let prog = build_relaxed_subproblem(&inst, &cfg, &norm, &bounds).unwrap();
        let (sol, report) = crate::mop::oracle_solve(&inst, &cfg).unwrap();
        let x = map_solution_to_box(&sol, &inst, &cfg, &bounds);
        let relaxed_obj = prog.objective_value(&x);
        assert!(relaxed_obj >= report.objective_j - 1e-9);
        assert_relative_eq!(relaxed_obj, report.objective_j, max_relative = 1e-2);
        // and the mapped point is feasible for the slack-padded constraints
        assert!(
            prog.max_constraint_violation(&x) <= 1e-9,
            "violation {}",
            prog.max_constraint_violation(&x)
        );
    }

    #[test]
    fn box_bisection() {
        let b = VarBox { lo: vec![0.0, -2.0], hi: vec![1.0, 0.0] };
        let (l, r) = b.bisect(1);
        assert_eq!(l.hi[1], -1.0);
        assert_eq!(r.lo[1], -1.0);
        assert_eq!(l.lo[0], 0.0);
        assert!(b.validate().is_ok());
        let bad = VarBox { lo: vec![1.0], hi: vec![0.0] };
        assert!(bad.validate().is_err());
    }
}
