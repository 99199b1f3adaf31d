//! Problem assembly: the scalarized two-objective program, feasibility
//! checking, normalization constants, and the exhaustive reference solver.
//!
//! A solution assigns every learner to exactly one orchestrator, splits each
//! orchestrator's dataset over its learners, and picks an integer training
//! schedule `(tau, g)` per orchestrator. The scalarized objective trades the
//! normalized total energy against the normalized accuracy proxy with
//! weight `alpha`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristics::subproblems::allocate_greedy;
use crate::learning::{u_value, ConvergenceApprox, LearningParams};
use crate::model::SystemTopology;

/// A full problem instance: physical system plus learning-side scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instance {
    pub topo: SystemTopology,
    pub params: LearningParams,
    /// Fitted accuracy proxy, one per orchestrator.
    pub approx: Vec<ConvergenceApprox>,
}

impl Instance {
    pub fn new(topo: SystemTopology, params: LearningParams, approx: Vec<ConvergenceApprox>) -> Result<Self> {
        params.validate()?;
        if approx.len() != topo.orchestrator_count() {
            return Err(Error::domain(format!(
                "need one approximation per orchestrator ({} != {})",
                approx.len(),
                topo.orchestrator_count()
            )));
        }
        for a in &approx {
            a.validate()?;
        }
        Ok(Self { topo, params, approx })
    }

    pub fn orchestrators(&self) -> usize {
        self.topo.orchestrator_count()
    }

    pub fn learners(&self) -> usize {
        self.topo.learner_count()
    }

    /// A learner can sit in a group only if the weight exchange alone fits
    /// the time budget at one global cycle.
    pub fn pair_time_feasible(&self, l: usize, o: usize) -> bool {
        self.topo.coeff(l, o).a0 <= self.params.t_max
    }

    /// Errors when some learner fits no orchestrator even at near-zero
    /// allocation; such instances are reported infeasible, not truncated.
    pub fn feasibility_guard(&self) -> Result<()> {
        for l in 0..self.learners() {
            if !(0..self.orchestrators()).any(|o| self.pair_time_feasible(l, o)) {
                return Err(Error::infeasible(format!(
                    "learner {l} cannot meet the time budget for any orchestrator"
                )));
            }
        }
        Ok(())
    }
}

/// Normalizers making the two objective terms dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub e_max: f64,
    pub u_max: f64,
}

impl Normalization {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_max > 0.0) || !(self.u_max > 0.0) {
            return Err(Error::domain("normalization constants must be strictly positive"));
        }
        Ok(())
    }
}

/// Which solver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Oracle,
    Copt,
    Aat,
    Fba,
    Lfba,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Oracle, Method::Copt, Method::Aat, Method::Fba, Method::Lfba];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Copt => "copt",
            Method::Aat => "aat",
            Method::Fba => "fba",
            Method::Lfba => "lfba",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oracle" => Ok(Method::Oracle),
            "copt" => Ok(Method::Copt),
            "aat" => Ok(Method::Aat),
            "fba" => Ok(Method::Fba),
            "lfba" | "l-fba" => Ok(Method::Lfba),
            other => Err(Error::domain(format!(
                "unknown method `{other}` (expected oracle|copt|aat|fba|lfba)"
            ))),
        }
    }
}

/// Which exponent the accuracy proxy uses inside a solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum C2Mode {
    /// Pin the iteration exponent to 1 (required by the closed-form bounds).
    One,
    /// Use the fitted exponent.
    Fitted,
}

/// Solver options shared by all methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Objective weight: 1 is pure energy, 0 is pure learning proxy.
    pub alpha: f64,
    /// Pairwise association cap in the relaxed program.
    pub epsilon_assoc: f64,
    /// Numeric tolerance (relative branch-and-bound gap, solver residuals).
    pub tol: f64,
    /// Branch-and-bound depth cap.
    pub max_stages: u32,
    pub method: Method,
    /// Strictly positive floor applied to association/allocation variables
    /// before the log-space transform.
    pub lambda_floor: f64,
    /// Branch-and-bound node budget.
    pub max_nodes: usize,
    /// Exponent mode consumed by the decentralized heuristics.
    pub heuristic_c2: C2Mode,
    /// Exponent mode consumed by the centralized solver.
    pub copt_c2: C2Mode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            epsilon_assoc: 1e-3,
            tol: 1e-3,
            max_stages: 30,
            method: Method::Oracle,
            lambda_floor: 1e-4,
            max_nodes: 2000,
            heuristic_c2: C2Mode::One,
            copt_c2: C2Mode::Fitted,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("solver.alpha", "must lie in [0, 1]"));
        }
        if !(self.epsilon_assoc > 0.0) {
            return Err(Error::config("solver.epsilon_assoc", "must be > 0"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("solver.tol", "must be > 0"));
        }
        if !(self.lambda_floor > 0.0) || self.lambda_floor >= 1.0 {
            return Err(Error::config("solver.lambda_floor", "must lie in (0, 1)"));
        }
        if self.max_stages == 0 {
            return Err(Error::config("solver.max_stages", "must be >= 1"));
        }
        if self.max_nodes == 0 {
            return Err(Error::config("solver.max_nodes", "must be >= 1"));
        }
        Ok(())
    }
}

/// Candidate solution: association, allocation and per-orchestrator schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSolution {
    /// Orchestrator index per learner (`None` = unassociated).
    pub association: Vec<Option<usize>>,
    /// Allocation fraction per learner, for its associated orchestrator.
    pub allocation: Vec<f64>,
    /// Local iterations per orchestrator.
    pub tau: Vec<u32>,
    /// Global cycles per orchestrator.
    pub cycles: Vec<u32>,
}

impl AssignmentSolution {
    /// Learners associated with orchestrator `o`, in index order.
    pub fn group(&self, o: usize) -> Vec<usize> {
        self.association
            .iter()
            .enumerate()
            .filter_map(|(l, a)| (*a == Some(o)).then_some(l))
            .collect()
    }
}

/// One broken constraint, with the offending index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// Per-learner training time exceeds the budget.
    TimeBudget { learner: usize, time_s: f64, t_max: f64 },
    /// Learner not associated with any orchestrator.
    Unassociated { learner: usize },
    /// An orchestrator's allocations do not sum to one.
    AllocationSum { orchestrator: usize, sum: f64 },
    /// Local iterations outside `[1, tau_max]`.
    TauRange { orchestrator: usize, tau: u32 },
    /// Global cycles below one.
    CyclesRange { orchestrator: usize, cycles: u32 },
    /// Allocation fraction outside `[0, 1]`.
    AllocationRange { learner: usize, n: f64 },
    /// Solution shape does not match the instance.
    Shape { message: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TimeBudget { learner, time_s, t_max } => {
                write!(f, "learner {learner}: time {time_s:.3}s exceeds budget {t_max:.3}s")
            }
            Violation::Unassociated { learner } => write!(f, "learner {learner}: no association"),
            Violation::AllocationSum { orchestrator, sum } => {
                write!(f, "orchestrator {orchestrator}: allocations sum to {sum:.9}, expected 1")
            }
            Violation::TauRange { orchestrator, tau } => {
                write!(f, "orchestrator {orchestrator}: tau {tau} out of range")
            }
            Violation::CyclesRange { orchestrator, cycles } => {
                write!(f, "orchestrator {orchestrator}: cycles {cycles} out of range")
            }
            Violation::AllocationRange { learner, n } => {
                write!(f, "learner {learner}: allocation {n} outside [0,1]")
            }
            Violation::Shape { message } => write!(f, "shape: {message}"),
        }
    }
}

/// Energy/proxy split of an evaluated objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    /// Scalarized objective value.
    pub j: f64,
    /// Unnormalized total energy in joules.
    pub energy_j: f64,
    /// Unnormalized sum of accuracy proxies.
    pub u_total: f64,
}

/// Statistics of a branch-and-bound run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnbStats {
    pub nodes_expanded: usize,
    pub max_depth: u32,
    pub root_lower_bound: f64,
    pub final_lower_bound: f64,
    /// Relative gap between incumbent and best remaining lower bound.
    pub final_gap: f64,
    pub budget_exhausted: bool,
}

/// Outcome summary attached to every solver result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub method: Method,
    pub objective_j: f64,
    pub energy_j: f64,
    pub u_total: f64,
    pub feasible: bool,
    pub wall_ms: f64,
    pub alpha: f64,
    /// Normalization constants the objective was evaluated with.
    pub e_max: f64,
    pub u_max: f64,
    /// Repair/fallback events that fired during the solve.
    pub flags: Vec<String>,
    pub bnb: Option<BnbStats>,
}

impl SolverReport {
    pub fn new(method: Method, breakdown: ObjectiveBreakdown, cfg: &SolverConfig, norm: &Normalization) -> Self {
        Self {
            method,
            objective_j: breakdown.j,
            energy_j: breakdown.energy_j,
            u_total: breakdown.u_total,
            feasible: true,
            wall_ms: 0.0,
            alpha: cfg.alpha,
            e_max: norm.e_max,
            u_max: norm.u_max,
            flags: Vec::new(),
            bnb: None,
        }
    }
}

/// Evaluate the scalarized objective and its unnormalized split.
///
/// `j = alpha * sum(E) / (e_max |L|) + (1 - alpha) * sum(U) / (u_max |O|)`.
pub fn objective(
    sol: &AssignmentSolution,
    inst: &Instance,
    norm: &Normalization,
    alpha: f64,
) -> Result<ObjectiveBreakdown> {
    let n_orch = inst.orchestrators();
    if sol.tau.len() != n_orch || sol.cycles.len() != n_orch {
        return Err(Error::domain("solution schedule length does not match orchestrator count"));
    }
    if inst.approx.len() != n_orch {
        return Err(Error::domain("missing approximation for an orchestrator"));
    }
    let mut energy = 0.0;
    for (l, assoc) in sol.association.iter().enumerate() {
        if let Some(o) = *assoc {
            if o >= n_orch {
                return Err(Error::domain(format!("learner {l} associated with unknown orchestrator {o}")));
            }
            energy += inst.topo.coeff(l, o).energy(sol.allocation[l], sol.tau[o], sol.cycles[o]);
        }
    }
    let mut u_total = 0.0;
    for o in 0..n_orch {
        u_total += u_value(&inst.approx[o], sol.tau[o], sol.cycles[o]);
    }
    let j = alpha * energy / (norm.e_max * inst.learners() as f64)
        + (1.0 - alpha) * u_total / (norm.u_max * n_orch as f64);
    Ok(ObjectiveBreakdown { j, energy_j: energy, u_total })
}

/// Check every constraint; an empty list means the solution is feasible.
pub fn feasibility_check(sol: &AssignmentSolution, inst: &Instance) -> Vec<Violation> {
    let mut violations = Vec::new();
    let n_orch = inst.orchestrators();
    let n_learn = inst.learners();
    if sol.association.len() != n_learn
        || sol.allocation.len() != n_learn
        || sol.tau.len() != n_orch
        || sol.cycles.len() != n_orch
    {
        violations.push(Violation::Shape {
            message: format!(
                "expected {n_learn} learners / {n_orch} orchestrators, got {}/{} and {}/{}",
                sol.association.len(),
                sol.allocation.len(),
                sol.tau.len(),
                sol.cycles.len()
            ),
        });
        return violations;
    }

    for (o, (&tau, &g)) in sol.tau.iter().zip(&sol.cycles).enumerate() {
        if tau < 1 || tau > inst.params.tau_max {
            violations.push(Violation::TauRange { orchestrator: o, tau });
        }
        if g < 1 {
            violations.push(Violation::CyclesRange { orchestrator: o, cycles: g });
        }
    }

    let mut alloc_sum = vec![0.0f64; n_orch];
    for l in 0..n_learn {
        let n = sol.allocation[l];
        if !(0.0..=1.0).contains(&n) || !n.is_finite() {
            violations.push(Violation::AllocationRange { learner: l, n });
        }
        match sol.association[l] {
            None => violations.push(Violation::Unassociated { learner: l }),
            Some(o) if o >= n_orch => {
                violations.push(Violation::Shape { message: format!("learner {l} -> orchestrator {o}") })
            }
            Some(o) => {
                alloc_sum[o] += n;
                let tau = sol.tau[o].max(1);
                let g = sol.cycles[o].max(1);
                let t = inst.topo.coeff(l, o).time(n.clamp(0.0, 1.0), tau, g);
                if t > inst.params.t_max * (1.0 + 1e-12) {
                    violations.push(Violation::TimeBudget { learner: l, time_s: t, t_max: inst.params.t_max });
                }
            }
        }
    }

    for (o, sum) in alloc_sum.iter().enumerate() {
        if (sum - 1.0).abs() > 1e-9 {
            violations.push(Violation::AllocationSum { orchestrator: o, sum: *sum });
        }
    }
    violations
}

/// Deterministic normalizers: the worst per-pair energy at full allocation,
/// maximum iterations and the largest cycle count fitting the budget; and the
/// largest proxy value (one cycle, one iteration).
pub fn normalization_constants(inst: &Instance) -> Result<Normalization> {
    let t_max = inst.params.t_max;
    let mut e_max: Option<f64> = None;
    for l in 0..inst.learners() {
        for o in 0..inst.orchestrators() {
            let c = inst.topo.coeff(l, o);
            if c.a0 > t_max {
                continue; // pair unusable even at near-zero allocation
            }
            let per_cycle = c.a2 + c.a1 + c.a0;
            let g_cap = ((t_max / per_cycle).floor() as u32).max(1);
            let e = c.energy(1.0, inst.params.tau_max, g_cap);
            e_max = Some(e_max.map_or(e, |m: f64| m.max(e)));
        }
    }
    let e_max = e_max.ok_or_else(|| Error::infeasible("no learner-orchestrator pair fits the time budget"))?;
    let u_max = inst
        .approx
        .iter()
        .map(|a| a.c1)
        .fold(f64::NEG_INFINITY, f64::max);
    let norm = Normalization { e_max, u_max };
    norm.validate()?;
    Ok(norm)
}

/// Best schedule and allocation for one orchestrator's fixed group.
#[derive(Debug, Clone)]
pub(crate) struct GroupPlan {
    pub tau: u32,
    pub cycles: u32,
    /// Allocation per member, aligned with the group's learner order.
    pub alloc: Vec<f64>,
    pub energy: f64,
    pub u: f64,
    /// This orchestrator's share of the scalarized objective.
    pub contribution: f64,
}

/// Exactly optimize one orchestrator given its member set: scan the integer
/// schedule grid, solving the inner allocation program at each point.
pub(crate) fn optimize_group(
    inst: &Instance,
    o: usize,
    group: &[usize],
    alpha: f64,
    norm: &Normalization,
) -> Option<GroupPlan> {
    if group.is_empty() {
        return None;
    }
    let coeffs: Vec<_> = group.iter().map(|&l| *inst.topo.coeff(l, o)).collect();
    let t_max = inst.params.t_max;
    let e_norm = norm.e_max * inst.learners() as f64;
    let u_norm = norm.u_max * inst.orchestrators() as f64;
    let mut best: Option<GroupPlan> = None;
    for tau in 1..=inst.params.tau_max {
        let mut any_feasible_g = false;
        let mut g = 1u32;
        loop {
            // Allocation feasibility shrinks monotonically in g; stop at the
            // first infeasible cycle count.
            let Ok(alloc) = allocate_greedy(&coeffs, tau, g, t_max) else {
                break;
            };
            any_feasible_g = true;
            let energy: f64 = coeffs
                .iter()
                .zip(&alloc)
                .map(|(c, &n)| c.energy(n, tau, g))
                .sum();
            let u = u_value(&inst.approx[o], tau, g);
            let contribution = alpha * energy / e_norm + (1.0 - alpha) * u / u_norm;
            if best.as_ref().is_none_or(|b| contribution < b.contribution) {
                best = Some(GroupPlan { tau, cycles: g, alloc: alloc.clone(), energy, u, contribution });
            }
            g += 1;
        }
        if !any_feasible_g {
            // Caps shrink in tau as well: later iterations cannot recover.
            break;
        }
    }
    best
}

fn group_key(group: &[usize]) -> u64 {
    group.iter().fold(0u64, |m, &l| m | (1u64 << l))
}

/// Exhaustive reference solver: enumerate every association in which each
/// orchestrator keeps at least one learner, exactly optimizing allocation and
/// schedule per orchestrator, and return the global minimizer.
pub fn oracle_solve(inst: &Instance, cfg: &SolverConfig) -> Result<(AssignmentSolution, SolverReport)> {
    cfg.validate()?;
    inst.feasibility_guard()?;
    let started = Instant::now();
    let n_orch = inst.orchestrators();
    let n_learn = inst.learners();
    if n_learn >= 64 || (n_orch as f64).powi(n_learn as i32) > 1e5 {
        return Err(Error::TooLargeForOracle(format!(
            "{n_orch}^{n_learn} associations exceed the 1e5 guard"
        )));
    }
    if n_learn < n_orch {
        return Err(Error::infeasible("fewer learners than orchestrators"));
    }
    let norm = normalization_constants(inst)?;

    let mut memo: HashMap<(usize, u64), Option<GroupPlan>> = HashMap::new();
    let mut assignment = vec![0usize; n_learn];
    let mut best: Option<(f64, AssignmentSolution, ObjectiveBreakdown)> = None;

    // Depth-first product enumeration, pruning branches that cannot cover
    // every orchestrator with the learners still unassigned.
    fn recurse(
        l: usize,
        assignment: &mut Vec<usize>,
        inst: &Instance,
        cfg: &SolverConfig,
        norm: &Normalization,
        memo: &mut HashMap<(usize, u64), Option<GroupPlan>>,
        best: &mut Option<(f64, AssignmentSolution, ObjectiveBreakdown)>,
    ) {
        let n_orch = inst.orchestrators();
        let n_learn = inst.learners();
        if l == n_learn {
            evaluate_assignment(assignment, inst, cfg, norm, memo, best);
            return;
        }
        let mut used = vec![false; n_orch];
        for &a in assignment[..l].iter() {
            used[a] = true;
        }
        let missing = used.iter().filter(|u| !**u).count();
        if missing > n_learn - l {
            return; // cannot fill every orchestrator any more
        }
        for o in 0..n_orch {
            if !inst.pair_time_feasible(l, o) {
                continue;
            }
            assignment[l] = o;
            recurse(l + 1, assignment, inst, cfg, norm, memo, best);
        }
    }

    fn evaluate_assignment(
        assignment: &[usize],
        inst: &Instance,
        cfg: &SolverConfig,
        norm: &Normalization,
        memo: &mut HashMap<(usize, u64), Option<GroupPlan>>,
        best: &mut Option<(f64, AssignmentSolution, ObjectiveBreakdown)>,
    ) {
        let n_orch = inst.orchestrators();
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_orch];
        for (l, &o) in assignment.iter().enumerate() {
            groups[o].push(l);
        }
        if groups.iter().any(|g| g.is_empty()) {
            return;
        }
        let mut j = 0.0;
        let mut energy = 0.0;
        let mut u_total = 0.0;
        let mut plans: Vec<GroupPlan> = Vec::with_capacity(n_orch);
        for (o, group) in groups.iter().enumerate() {
            let key = (o, group_key(group));
            let plan = memo
                .entry(key)
                .or_insert_with(|| optimize_group(inst, o, group, cfg.alpha, norm))
                .clone();
            let Some(plan) = plan else { return };
            j += plan.contribution;
            energy += plan.energy;
            u_total += plan.u;
            plans.push(plan);
        }
        if best.as_ref().is_none_or(|(bj, _, _)| j < *bj) {
            let n_learn = inst.learners();
            let mut sol = AssignmentSolution {
                association: assignment.iter().map(|&o| Some(o)).collect(),
                allocation: vec![0.0; n_learn],
                tau: vec![1; n_orch],
                cycles: vec![1; n_orch],
            };
            for (o, plan) in plans.iter().enumerate() {
                sol.tau[o] = plan.tau;
                sol.cycles[o] = plan.cycles;
                for (slot, &l) in groups[o].iter().enumerate() {
                    sol.allocation[l] = plan.alloc[slot];
                }
            }
            *best = Some((j, sol, ObjectiveBreakdown { j, energy_j: energy, u_total }));
        }
    }

    recurse(0, &mut assignment, inst, cfg, &norm, &mut memo, &mut best);

    let (j, sol, breakdown) = best.ok_or_else(|| {
        Error::infeasible("no association covers every orchestrator within the time budget")
    })?;
    debug_assert!((breakdown.j - j).abs() <= 1e-12);
    let mut report = SolverReport::new(Method::Oracle, breakdown, cfg, &norm);
    report.feasible = feasibility_check(&sol, inst).is_empty();
    report.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok((sol, report))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::learning::fit_default;
    use crate::model::{generate_topology, ChannelModel, LearnerSpec, SystemTopology, TaskSpec};
    use approx::assert_relative_eq;

    pub(crate) fn small_task() -> TaskSpec {
        TaskSpec {
            dataset_size_n: 60_000,
            feature_len_f: 784,
            bits_per_feature_gamma_d: 32,
            bits_per_weight_gamma_w: 32,
            weight_count_sw: 268_800,
            compute_complexity_cw: 537_600,
        }
    }

    pub(crate) fn table1_params() -> LearningParams {
        LearningParams { eta: 0.01, phi: 1e-4, delta: 5.0, beta: 0.5, tau_max: 20, t_max: 660.0 }
    }

    pub(crate) fn seeded_instance(orchestrators: usize, learners: usize, seed: u64) -> Instance {
        let cfg = crate::model::tests::test_config(orchestrators, learners);
        let topo = generate_topology(&cfg, seed).unwrap();
        let params = table1_params();
        let approx = vec![fit_default(&params).unwrap(); orchestrators];
        Instance::new(topo, params, approx).unwrap()
    }

    fn manual_instance(distances: Vec<Vec<f64>>, freqs: Vec<f64>, n_orch: usize) -> Instance {
        let channel = ChannelModel::new(5e6, 0.2, 1e-13, 3.0, 1.0).unwrap();
        let learners = distances
            .into_iter()
            .zip(freqs)
            .map(|(d, f)| LearnerSpec { cpu_freq_f: f, chip_capacitance_mu: 1e-19, distances_m: d })
            .collect();
        let topo =
            SystemTopology::assemble(channel, vec![small_task(); n_orch], learners, None).unwrap();
        let params = table1_params();
        let approx = vec![fit_default(&params).unwrap(); n_orch];
        Instance::new(topo, params, approx).unwrap()
    }

    #[test]
    fn objective_alpha_endpoints() {
        let inst = seeded_instance(2, 4, 9);
        let norm = normalization_constants(&inst).unwrap();
        let sol = AssignmentSolution {
            association: vec![Some(0), Some(0), Some(1), Some(1)],
            allocation: vec![0.5, 0.5, 0.3, 0.7],
            tau: vec![2, 3],
            cycles: vec![2, 2],
        };
        let energy_only = objective(&sol, &inst, &norm, 1.0).unwrap();
        let u_only = objective(&sol, &inst, &norm, 0.0).unwrap();
        assert_relative_eq!(
            energy_only.j,
            energy_only.energy_j / (norm.e_max * 4.0),
            max_relative = 1e-12
        );
        assert_relative_eq!(u_only.j, u_only.u_total / (norm.u_max * 2.0), max_relative = 1e-12);
        // The unnormalized split does not depend on alpha.
        assert_eq!(energy_only.energy_j, u_only.energy_j);
        assert_eq!(energy_only.u_total, u_only.u_total);
    }

    #[test]
    fn objective_single_pair_by_hand() {
        let inst = manual_instance(vec![vec![20.0]], vec![1.2e9], 1);
        let norm = normalization_constants(&inst).unwrap();
        let (tau, g, n) = (3u32, 2u32, 1.0);
        let sol = AssignmentSolution {
            association: vec![Some(0)],
            allocation: vec![n],
            tau: vec![tau],
            cycles: vec![g],
        };
        let alpha = 0.4;
        let got = objective(&sol, &inst, &norm, alpha).unwrap();
        let e = crate::model::train_energy(inst.topo.coeff(0, 0), n, tau, g).unwrap();
        let u = u_value(&inst.approx[0], tau, g);
        let expected = alpha * e / (norm.e_max * 1.0) + (1.0 - alpha) * u / (norm.u_max * 1.0);
        assert_relative_eq!(got.j, expected, max_relative = 1e-12);
        assert_relative_eq!(got.energy_j, e, max_relative = 1e-12);
        assert_relative_eq!(got.u_total, u, max_relative = 1e-12);
    }

    #[test]
    fn objective_permutation_invariant() {
        // Learners 0 and 2 have identical links; swapping their roles inside
        // the same association class cannot change J.
        let inst = manual_instance(
            vec![vec![20.0, 35.0], vec![12.0, 9.0], vec![20.0, 35.0], vec![40.0, 14.0]],
            vec![1.2e9, 0.7e9, 1.2e9, 1.8e9],
            2,
        );
        let norm = normalization_constants(&inst).unwrap();
        let sol = AssignmentSolution {
            association: vec![Some(0), Some(1), Some(0), Some(1)],
            allocation: vec![0.7, 0.45, 0.3, 0.55],
            tau: vec![2, 4],
            cycles: vec![3, 2],
        };
        let mut swapped = sol.clone();
        swapped.allocation.swap(0, 2);
        let j = objective(&sol, &inst, &norm, 0.5).unwrap().j;
        let j_swapped = objective(&swapped, &inst, &norm, 0.5).unwrap().j;
        assert_relative_eq!(j, j_swapped, max_relative = 1e-12);
    }

    #[test]
    fn feasibility_flags_zero_allocation_group() {
        let inst = seeded_instance(2, 4, 3);
        let sol = AssignmentSolution {
            association: vec![Some(0), Some(0), Some(1), Some(1)],
            allocation: vec![0.0, 0.0, 0.5, 0.5],
            tau: vec![1, 1],
            cycles: vec![1, 1],
        };
        let v = feasibility_check(&sol, &inst);
        assert!(v.iter().any(|v| matches!(v, Violation::AllocationSum { orchestrator: 0, .. })), "{v:?}");
    }

    #[test]
    fn feasibility_flags_tau_overflow() {
        let inst = seeded_instance(1, 2, 3);
        let sol = AssignmentSolution {
            association: vec![Some(0), Some(0)],
            allocation: vec![0.5, 0.5],
            tau: vec![inst.params.tau_max + 1],
            cycles: vec![1],
        };
        let v = feasibility_check(&sol, &inst);
        assert!(v.iter().any(|v| matches!(v, Violation::TauRange { orchestrator: 0, .. })), "{v:?}");
    }

    #[test]
    fn feasibility_flags_time_budget() {
        // Construct a schedule whose time lands just above the budget.
        let inst = manual_instance(vec![vec![30.0]], vec![0.5e9], 1);
        let c = *inst.topo.coeff(0, 0);
        let per_cycle = c.a2 + c.a1 + c.a0; // n = 1, tau = 1
        let g = (1.01 * inst.params.t_max / per_cycle).floor().max(1.0) as u32;
        let t = c.time(1.0, 1, g);
        let sol = AssignmentSolution {
            association: vec![Some(0)],
            allocation: vec![1.0],
            tau: vec![1],
            cycles: vec![g],
        };
        let v = feasibility_check(&sol, &inst);
        if t > inst.params.t_max {
            assert!(
                v.iter().any(|v| matches!(v, Violation::TimeBudget { learner: 0, .. })),
                "time {t} vs {} -> {v:?}",
                inst.params.t_max
            );
        }
    }

    #[test]
    fn normalization_single_pair() {
        let inst = manual_instance(vec![vec![25.0]], vec![0.7e9], 1);
        let norm = normalization_constants(&inst).unwrap();
        let c = inst.topo.coeff(0, 0);
        let g_cap = ((inst.params.t_max / (c.a2 + c.a1 + c.a0)).floor() as u32).max(1);
        assert_relative_eq!(
            norm.e_max,
            c.energy(1.0, inst.params.tau_max, g_cap),
            max_relative = 1e-12
        );
        assert_relative_eq!(norm.u_max, inst.approx[0].c1, max_relative = 1e-12);
    }

    #[test]
    fn normalization_matches_exhaustive_scan() {
        let inst = seeded_instance(3, 50, 77);
        let norm = normalization_constants(&inst).unwrap();
        let mut scan: f64 = f64::NEG_INFINITY;
        for l in 0..50 {
            for o in 0..3 {
                let c = inst.topo.coeff(l, o);
                if c.a0 > inst.params.t_max {
                    continue;
                }
                let g_cap = ((inst.params.t_max / (c.a2 + c.a1 + c.a0)).floor() as u32).max(1);
                scan = scan.max(c.energy(1.0, inst.params.tau_max, g_cap));
            }
        }
        assert_relative_eq!(norm.e_max, scan, max_relative = 1e-12);
    }

    #[test]
    fn oracle_single_pair_forced_allocation() {
        let inst = manual_instance(vec![vec![18.0]], vec![1.8e9], 1);
        let cfg = SolverConfig::default();
        let (sol, report) = oracle_solve(&inst, &cfg).unwrap();
        assert_eq!(sol.association, vec![Some(0)]);
        assert_relative_eq!(sol.allocation[0], 1.0, max_relative = 1e-12);
        assert!(report.feasible);
        // The returned schedule is the grid argmin.
        let norm = normalization_constants(&inst).unwrap();
        let plan = optimize_group(&inst, 0, &[0], cfg.alpha, &norm).unwrap();
        assert_eq!((sol.tau[0], sol.cycles[0]), (plan.tau, plan.cycles));
    }

    #[test]
    fn oracle_symmetric_two_by_two() {
        let inst = manual_instance(
            vec![vec![20.0, 20.0], vec![20.0, 20.0]],
            vec![1.2e9, 1.2e9],
            2,
        );
        let cfg = SolverConfig::default();
        let (sol, report) = oracle_solve(&inst, &cfg).unwrap();
        // One learner each; both matchings score identically.
        let groups: Vec<_> = (0..2).map(|o| sol.group(o).len()).collect();
        assert_eq!(groups, vec![1, 1]);
        let norm = normalization_constants(&inst).unwrap();
        let mut mirrored = sol.clone();
        mirrored.association.swap(0, 1);
        mirrored.allocation.swap(0, 1);
        let j_mirrored = objective(&mirrored, &inst, &norm, cfg.alpha).unwrap().j;
        assert_relative_eq!(report.objective_j, j_mirrored, max_relative = 1e-9);
    }

    #[test]
    fn oracle_guard_rejects_large() {
        let inst = seeded_instance(3, 20, 5);
        assert!(matches!(
            oracle_solve(&inst, &SolverConfig::default()),
            Err(Error::TooLargeForOracle(_))
        ));
    }

    #[test]
    fn oracle_t_max_monotone() {
        for seed in [2u64, 13, 31] {
            let mut prev: Option<f64> = None;
            for t_max in [300.0, 660.0, 1000.0] {
                let mut inst = seeded_instance(2, 5, seed);
                inst.params.t_max = t_max;
                let (_, report) = oracle_solve(&inst, &SolverConfig::default()).unwrap();
                if let Some(p) = prev {
                    assert!(
                        report.objective_j <= p + 1e-12,
                        "J grew from {p} to {} at t_max={t_max}",
                        report.objective_j
                    );
                }
                prev = Some(report.objective_j);
            }
        }
    }

    #[test]
    fn oracle_report_objective_recomputes() {
        let inst = seeded_instance(2, 5, 42);
        let cfg = SolverConfig::default();
        let (sol, report) = oracle_solve(&inst, &cfg).unwrap();
        let norm = Normalization { e_max: report.e_max, u_max: report.u_max };
        let b = objective(&sol, &inst, &norm, cfg.alpha).unwrap();
        assert_relative_eq!(b.j, report.objective_j, epsilon = 1e-9);
        assert!(feasibility_check(&sol, &inst).is_empty());
    }
}
