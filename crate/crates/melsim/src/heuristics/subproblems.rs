//! The decomposed sub-problems used by the decentralized solvers.
//!
//! Association ("which learner serves which orchestrator") is a binary
//! minimum-energy cover; allocation ("how much data each learner gets") is a
//! continuous knapsack with per-learner time caps; the training schedule
//! `(tau, g)` is found by exhaustive search over a search box tightened by
//! closed-form upper bounds derived from the bottleneck learner.

use crate::error::{Error, Result};
use crate::model::LinkCoefficients;

/// Minimum-energy association with every orchestrator nonempty.
///
/// The objective is separable per learner, so the optimum decomposes into the
/// per-learner cheapest orchestrator plus a minimum-regret choice of one
/// covering representative per orchestrator. The representative choice is
/// solved exactly by a subset DP over orchestrators, so the result matches
/// full enumeration at any scale.
///
/// `cost[l][o]` is the association energy, `feasible[l][o]` whether the pair
/// meets the time budget at the assumed uniform allocation.
pub fn associate_min_energy(cost: &[Vec<f64>], feasible: &[Vec<bool>]) -> Result<Vec<usize>> {
    let n_learn = cost.len();
    if n_learn == 0 {
        return Err(Error::infeasible("no learners to associate"));
    }
    let n_orch = cost[0].len();
    if n_orch > 20 {
        return Err(Error::domain("exact association supports at most 20 orchestrators"));
    }
    if n_learn < n_orch {
        return Err(Error::infeasible("fewer learners than orchestrators"));
    }

    let mut base_orch = vec![usize::MAX; n_learn];
    let mut base_cost = vec![f64::INFINITY; n_learn];
    for l in 0..n_learn {
        for o in 0..n_orch {
            if feasible[l][o] && cost[l][o] < base_cost[l] {
                base_cost[l] = cost[l][o];
                base_orch[l] = o;
            }
        }
        if base_orch[l] == usize::MAX {
            return Err(Error::infeasible(format!(
                "learner {l} meets the time budget for no orchestrator"
            )));
        }
    }

    // dp[s] = minimum extra regret to cover orchestrator subset `s` using the
    // learners processed so far; choice[l][s] records whether learner l was
    // drafted as a representative (and for whom) on the optimal path.
    let full = (1usize << n_orch) - 1;
    let mut dp = vec![f64::INFINITY; full + 1];
    dp[0] = 0.0;
    let mut choice = vec![vec![usize::MAX; full + 1]; n_learn];
    for l in 0..n_learn {
        let mut next = dp.clone();
        for s in 0..=full {
            if !dp[s].is_finite() {
                continue;
            }
            for o in 0..n_orch {
                let bit = 1usize << o;
                if s & bit != 0 || !feasible[l][o] {
                    continue;
                }
                let cand = dp[s] + (cost[l][o] - base_cost[l]);
                if cand < next[s | bit] {
                    next[s | bit] = cand;
                    choice[l][s | bit] = o;
                }
            }
        }
        dp = next;
    }
    if !dp[full].is_finite() {
        return Err(Error::infeasible("no nonempty-cover assignment meets the time budget"));
    }

    // Walk back through the per-learner choices.
    let mut assignment = base_orch.clone();
    let mut s = full;
    for l in (0..n_learn).rev() {
        let o = choice[l][s];
        if o != usize::MAX {
            assignment[l] = o;
            s &= !(1usize << o);
        }
    }
    debug_assert_eq!(s, 0);
    Ok(assignment)
}

/// Exact continuous-knapsack allocation for one orchestrator.
///
/// Minimizes the allocation-proportional energy at a fixed schedule subject
/// to the mass constraint and per-learner time caps. Optimal by greedy fill
/// in ascending unit-energy order; the returned fractions sum to exactly 1.
pub fn allocate_greedy(coeffs: &[LinkCoefficients], tau: u32, g: u32, t_max: f64) -> Result<Vec<f64>> {
    if coeffs.is_empty() {
        return Err(Error::infeasible("empty group"));
    }
    let budget = t_max / g as f64;
    let mut caps = Vec::with_capacity(coeffs.len());
    let mut total_cap = 0.0;
    for c in coeffs {
        // Even n = 0 costs the weight exchange; a negative cap means the
        // learner cannot sit in this group at this cycle count.
        let cap = (budget - c.a0) / (c.a2 * tau as f64 + c.a1);
        if cap < 0.0 {
            return Err(Error::infeasible(format!(
                "time budget {t_max}s cannot host the weight exchange at g={g}"
            )));
        }
        let cap = cap.min(1.0);
        caps.push(cap);
        total_cap += cap;
    }
    if total_cap < 1.0 {
        return Err(Error::infeasible(format!(
            "time budget cannot host the dataset at tau={tau}, g={g}"
        )));
    }

    let mut order: Vec<usize> = (0..coeffs.len()).collect();
    order.sort_by(|&i, &j| {
        coeffs[i]
            .alloc_energy_rate(tau)
            .partial_cmp(&coeffs[j].alloc_energy_rate(tau))
            .unwrap()
            .then(i.cmp(&j))
    });

    let mut alloc = vec![0.0; coeffs.len()];
    let mut remaining = 1.0f64;
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        let take = caps[i].min(remaining);
        alloc[i] = take;
        remaining -= take;
    }
    if remaining > 1e-12 {
        return Err(Error::infeasible("caps changed during fill")); // unreachable
    }
    // Remove float drift so the mass constraint holds exactly.
    let sum: f64 = alloc.iter().sum();
    if sum > 0.0 && (sum - 1.0).abs() > 0.0 {
        for a in &mut alloc {
            *a /= sum;
        }
    }
    Ok(alloc)
}

/// Relative weights of the two objective terms as they appear in the global
/// scalarized objective: `energy = alpha / (e_max |L|)`,
/// `proxy = (1 - alpha) / (u_max |O|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleWeights {
    pub energy: f64,
    pub proxy: f64,
}

/// Coefficients of the single-orchestrator schedule problem reduced to the
/// bottleneck learner (the group member with the longest training time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleCoefficients {
    /// Weight of the `1/(tau g)` proxy term.
    pub a: f64,
    /// Weight of the `tau g` energy term.
    pub b: f64,
    /// Weight of the `g` energy term.
    pub c: f64,
    /// Bottleneck compute time fraction per (iteration x cycle).
    pub theta: f64,
    /// Bottleneck communication time fraction per cycle.
    pub xi: f64,
    /// Index (within the group) of the bottleneck learner.
    pub bottleneck: usize,
}

impl ScheduleCoefficients {
    /// Build the coefficients for a group with a fixed allocation. `tau_hint`
    /// selects the bottleneck (the time ranking can depend on tau).
    pub fn for_group(
        coeffs: &[LinkCoefficients],
        alloc: &[f64],
        proxy_c1: f64,
        weights: &ScheduleWeights,
        tau_hint: u32,
        t_max: f64,
    ) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() != alloc.len() {
            return Err(Error::domain("group and allocation sizes differ or are empty"));
        }
        let bottleneck = (0..coeffs.len())
            .max_by(|&i, &j| {
                let ti = coeffs[i].time(alloc[i], tau_hint, 1);
                let tj = coeffs[j].time(alloc[j], tau_hint, 1);
                ti.partial_cmp(&tj).unwrap().then(j.cmp(&i))
            })
            .unwrap();
        let star = &coeffs[bottleneck];
        let n_star = alloc[bottleneck];
        let b: f64 = coeffs.iter().zip(alloc).map(|(c, &n)| c.z2 * n).sum::<f64>() * weights.energy;
        let c: f64 = coeffs.iter().zip(alloc).map(|(c, &n)| c.z1 * n + c.z0).sum::<f64>() * weights.energy;
        Ok(Self {
            a: weights.proxy * proxy_c1,
            b,
            c,
            theta: star.a2 * n_star / t_max,
            xi: (star.a1 * n_star + star.a0) / t_max,
            bottleneck,
        })
    }

    /// The single-variable objective along the binding time constraint,
    /// dropping its constant term: `a theta / (1 - xi g) + (c - b xi / theta) g`.
    pub fn binding_objective(&self, g: f64) -> f64 {
        self.a * self.theta / (1.0 - self.xi * g) + (self.c - self.b * self.xi / self.theta) * g
    }

    /// Continuous argmin of the binding objective on `[1, 1/xi)`, defined
    /// when the curvature condition `b xi - theta c > xi a theta^2` holds.
    pub fn closed_form_cycle_argmin(&self) -> Option<f64> {
        let discriminant = self.b * self.xi - self.theta * self.c;
        let curvature = self.xi * self.a * self.theta * self.theta;
        (self.theta > 0.0 && self.xi > 0.0 && discriminant > curvature)
            .then(|| (1.0 - (curvature / discriminant).sqrt()) / self.xi)
    }
}

/// Closed-form upper bounds for the schedule search box.
///
/// Requires the unit proxy exponent. The cycle bound is additionally capped
/// at the one-iteration time cap `1/(theta + xi)` — the region where the
/// binding-time derivation lives — which keeps the full-time inequality
/// `theta tau* g* + xi g* <= 1` valid for the returned pair. When the
/// curvature condition `b xi - theta c > xi a theta^2` fails, falls back to
/// that time cap alone with the full iteration range, which never excludes a
/// feasible point.
pub fn schedule_bounds(k: &ScheduleCoefficients, tau_max: u32) -> (u32, u32, bool) {
    let time_cap = if k.theta + k.xi > 0.0 {
        (1.0 / (k.theta + k.xi)).floor().max(1.0) as u32
    } else {
        1
    };
    if let Some(argmin) = k.closed_form_cycle_argmin() {
        let g_star = (argmin.floor().max(1.0) as u32).min(time_cap);
        let tau_star = if k.xi * (g_star as f64) < 1.0 && k.theta > 0.0 {
            let t = ((1.0 - k.xi * g_star as f64) / (k.theta * g_star as f64)).floor();
            (t.min(tau_max as f64).max(1.0)) as u32
        } else {
            tau_max
        };
        return (g_star, tau_star, false);
    }
    (time_cap, tau_max, true)
}

/// Exhaustive schedule search over `[1, tau_bound] x [1, g_bound]`.
///
/// Skips points where any group member exceeds the time budget; ties resolve
/// to the smaller cycle count, then the smaller iteration count.
pub fn schedule_search(
    coeffs: &[LinkCoefficients],
    alloc: &[f64],
    proxy_c1: f64,
    proxy_c2: f64,
    weights: &ScheduleWeights,
    g_bound: u32,
    tau_bound: u32,
    t_max: f64,
) -> Result<(u32, u32)> {
    if coeffs.is_empty() || coeffs.len() != alloc.len() {
        return Err(Error::domain("group and allocation sizes differ or are empty"));
    }
    // Energy sum collapses to g * (sz2 * tau + srest).
    let sz2: f64 = coeffs.iter().zip(alloc).map(|(c, &n)| c.z2 * n).sum();
    let srest: f64 = coeffs.iter().zip(alloc).map(|(c, &n)| c.z1 * n + c.z0).sum();
    let mut best: Option<(f64, u32, u32)> = None;
    for tau in 1..=tau_bound {
        // Slowest member fixes the largest feasible cycle count at this tau.
        let per_cycle = coeffs
            .iter()
            .zip(alloc)
            .map(|(c, &n)| c.a2 * tau as f64 * n + c.a1 * n + c.a0)
            .fold(0.0f64, f64::max);
        if per_cycle > t_max {
            continue;
        }
        let g_cap = ((t_max / per_cycle).floor() as u32).min(g_bound);
        let u_tau = proxy_c1 / (tau as f64).powf(proxy_c2);
        for g in 1..=g_cap {
            let obj = weights.energy * g as f64 * (sz2 * tau as f64 + srest)
                + weights.proxy * u_tau / g as f64;
            let better = match &best {
                None => true,
                Some((bo, bg, bt)) => {
                    obj < *bo || (obj == *bo && (g, tau) < (*bg, *bt))
                }
            };
            if better {
                best = Some((obj, g, tau));
            }
        }
    }
    best.map(|(_, g, tau)| (tau, g))
        .ok_or_else(|| Error::infeasible("entire schedule grid infeasible (allocation too aggressive)"))
}

/// Normalized compute-to-distance attractiveness of a learner for an
/// orchestrator: `(f / f_max) / (d / d_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationFactor {
    pub value: f64,
    pub learner: usize,
    pub orchestrator: usize,
}

pub fn association_factor(
    learner: usize,
    orchestrator: usize,
    freq: f64,
    dist: f64,
    freq_max: f64,
    dist_max: f64,
) -> Result<AssociationFactor> {
    if !(dist > 0.0) {
        return Err(Error::domain("zero distance in association factor"));
    }
    if !(freq > 0.0) || !(freq_max > 0.0) || !(dist_max > 0.0) {
        return Err(Error::domain("association factor pools must be positive"));
    }
    Ok(AssociationFactor {
        value: (freq / freq_max) / (dist / dist_max),
        learner,
        orchestrator,
    })
}
