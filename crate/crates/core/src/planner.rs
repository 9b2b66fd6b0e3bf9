//! Extended value iteration over Bernstein confidence boxes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::ConfidenceModel;
use crate::mdp::ValueVector;

pub const DEFAULT_ITERATION_CAP: usize = 1_000_000;
/// Smallest stopping precision ever used.
pub const MU_FLOOR: f64 = 1e-9;

/// `μ_VI = 1/(2 t)`, floored at [`MU_FLOOR`].
pub fn default_mu(t: u64) -> f64 {
    (0.5 / t.max(1) as f64).max(MU_FLOOR)
}

/// Indices sorted by ascending value, ties broken by index.
pub fn value_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    order
}

/// Fills `out` with the box point that puts as much mass as possible on the
/// states visited first in `order`, starting from the lower bounds.
/// Returns `Σ out · values` (with `0 · ∞ = 0`).
#[inline]
fn transport(p_hat: &[f64], beta: &[f64], values: &[f64], order: &[usize], out: &mut [f64]) -> f64 {
    let mut remaining = 1.0;
    for j in 0..p_hat.len() {
        let lo = (p_hat[j] - beta[j]).max(0.0);
        out[j] = lo;
        remaining -= lo;
    }
    for &j in order {
        if remaining <= 0.0 {
            break;
        }
        let up = (p_hat[j] + beta[j]).min(1.0);
        let add = (up - out[j]).min(remaining);
        if add > 0.0 {
            out[j] += add;
            remaining -= add;
        }
    }
    let mut dot = 0.0;
    for j in 0..p_hat.len() {
        if out[j] > 0.0 {
            dot += out[j] * values[j];
        }
    }
    dot
}

fn check_row(p_hat: &[f64], beta: &[f64], values: &[f64]) -> Result<()> {
    if p_hat.len() != beta.len() || p_hat.len() != values.len() {
        return Err(Error::Validation(format!(
            "row lengths differ: p̂ {}, β {}, values {}",
            p_hat.len(),
            beta.len(),
            values.len()
        )));
    }
    let up: f64 = p_hat.iter().zip(beta).map(|(p, b)| (p + b).min(1.0)).sum();
    let lo: f64 = p_hat.iter().zip(beta).map(|(p, b)| (p - b).max(0.0)).sum();
    if up < 1.0 - 1e-12 || lo > 1.0 + 1e-12 {
        return Err(Error::Validation(format!(
            "confidence box is infeasible (lower sum {lo}, upper sum {up})"
        )));
    }
    Ok(())
}

/// The distribution in `{p̃ : |p̃ − p̂| ≤ β, p̃ ∈ Δ}` minimizing `p̃ · values`.
pub fn inner_min_distribution(p_hat: &[f64], beta: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    check_row(p_hat, beta, values)?;
    let mut out = vec![0.0; p_hat.len()];
    transport(p_hat, beta, values, &value_order(values), &mut out);
    Ok(out)
}

/// Mirror of [`inner_min_distribution`]: maximizes `p̃ · values`.
pub fn inner_max_distribution(p_hat: &[f64], beta: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    check_row(p_hat, beta, values)?;
    let mut order = value_order(values);
    order.reverse();
    let mut out = vec![0.0; p_hat.len()];
    transport(p_hat, beta, values, &order, &mut out);
    Ok(out)
}

/// Optimistic shortest-path plan.
#[derive(Debug, Clone, Serialize)]
pub struct SspPlan {
    /// Action per state; goal entries hold 0 and are never used.
    pub policy: Vec<usize>,
    pub values: ValueVector,
    pub iterations: usize,
    pub mu: f64,
    pub goals: Vec<usize>,
}

impl SspPlan {
    pub fn action(&self, s: usize) -> usize {
        self.policy[s]
    }
}

/// States that can reach the goal with probability one for some choice of
/// kernel inside the boxes. Everything else has infinite optimistic value.
fn optimistic_reach_set(model: &ConfidenceModel, goal: &[bool]) -> Vec<bool> {
    let (n, a_n) = (model.n_states(), model.n_actions());
    let mut inside = vec![true; n];
    loop {
        let admissible = |s: usize, a: usize, inside: &[bool]| {
            let (p, b) = (model.p_hat_row(s, a), model.beta_row(s, a));
            let mut room = 0.0;
            for j in 0..n {
                if inside[j] {
                    room += (p[j] + b[j]).min(1.0);
                } else if p[j] - b[j] > 0.0 {
                    return false;
                }
            }
            room >= 1.0 - 1e-12
        };
        let mut reach = goal.to_vec();
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..n {
                if reach[s] || !inside[s] {
                    continue;
                }
                let ok = (0..a_n).any(|a| {
                    admissible(s, a, &inside) && {
                        let (p, b) = (model.p_hat_row(s, a), model.beta_row(s, a));
                        (0..n).any(|j| reach[j] && p[j] + b[j] > 0.0)
                    }
                });
                if ok {
                    reach[s] = true;
                    changed = true;
                }
            }
        }
        if reach == inside {
            return inside;
        }
        inside = reach;
    }
}

fn check_plan_inputs(model: &ConfidenceModel, goals: &[usize], costs: &[f64], mu: f64) -> Result<Vec<bool>> {
    let n = model.n_states();
    if goals.is_empty() {
        return Err(Error::param("goals", "goal set is empty"));
    }
    if costs.len() != n * model.n_actions() {
        return Err(Error::Validation(format!(
            "{} costs for {} state-action pairs",
            costs.len(),
            n * model.n_actions()
        )));
    }
    if !(mu > 0.0) {
        return Err(Error::param("mu", format!("{mu} must be positive")));
    }
    let mut goal = vec![false; n];
    for &g in goals {
        if g >= n {
            return Err(Error::Index {
                what: "goal state",
                index: g,
                limit: n,
            });
        }
        goal[g] = true;
    }
    for s in (0..n).filter(|&s| !goal[s]) {
        for a in 0..model.n_actions() {
            let c = costs[s * model.n_actions() + a];
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::param(
                    "costs",
                    format!("cost {c} at (s={s}, a={a}) must be positive and finite"),
                ));
            }
        }
    }
    Ok(goal)
}

/// Best action at `s` against `values`, and its optimistic Q-value.
/// Usable for states outside the goal set as well as for a virtual copy of a goal.
pub fn optimistic_action(model: &ConfidenceModel, s: usize, values: &[f64], costs: &[f64]) -> (usize, f64) {
    let order = value_order(values);
    let mut scratch = vec![0.0; model.n_states()];
    best_action(model, s, values, costs, &order, &mut scratch)
}

#[inline]
fn best_action(
    model: &ConfidenceModel,
    s: usize,
    values: &[f64],
    costs: &[f64],
    order: &[usize],
    scratch: &mut [f64],
) -> (usize, f64) {
    let a_n = model.n_actions();
    let mut best = (0, f64::INFINITY);
    for a in 0..a_n {
        let q = costs[s * a_n + a]
            + transport(model.p_hat_row(s, a), model.beta_row(s, a), values, order, scratch);
        if q < best.1 {
            best = (a, q);
        }
    }
    best
}

/// Smallest change `f64` can resolve at the current value scale. A requested
/// `μ` below it is unreachable once values are large.
fn precision_floor(v: &[f64], active: &[usize]) -> f64 {
    let top = active.iter().map(|&s| v[s]).fold(0.0, f64::max);
    64.0 * f64::EPSILON * top
}

/// Optimistic SSP planning by extended value iteration from `ṽ₀ = 0`.
/// Stops once the sup-norm change is at most `max(μ, 64·ε_mach·‖ṽ‖∞)`.
pub fn evi_ssp(
    model: &ConfidenceModel,
    goals: &[usize],
    costs: &[f64],
    mu: f64,
    iteration_cap: usize,
) -> Result<SspPlan> {
    let goal = check_plan_inputs(model, goals, costs, mu)?;
    let n = model.n_states();
    let reach = optimistic_reach_set(model, &goal);
    let mut v = vec![0.0; n];
    for s in 0..n {
        if !reach[s] {
            v[s] = f64::INFINITY;
        }
    }
    let active: Vec<usize> = (0..n).filter(|&s| reach[s] && !goal[s]).collect();
    let mut next = v.clone();
    let mut policy = vec![0usize; n];
    let mut scratch = vec![0.0; n];
    for iter in 1..=iteration_cap {
        let order = value_order(&v);
        let mut worst = (0usize, 0.0f64);
        for &s in &active {
            let (a, q) = best_action(model, s, &v, costs, &order, &mut scratch);
            policy[s] = a;
            next[s] = q;
            let d = (q - v[s]).abs();
            if d > worst.1 {
                worst = (s, d);
            }
        }
        std::mem::swap(&mut v, &mut next);
        if worst.1 <= mu.max(precision_floor(&v, &active)) {
            return Ok(SspPlan {
                policy,
                values: ValueVector(v),
                iterations: iter,
                mu,
                goals: goals.to_vec(),
            });
        }
        if iter == iteration_cap {
            return Err(Error::Divergence {
                iterations: iter,
                state: worst.0,
                residual: worst.1,
            });
        }
    }
    Err(Error::param("iteration_cap", "must be at least 1"))
}

/// Aperiodicity weight of the damped average-reward operator.
const AVG_DAMPING: f64 = 0.5;

/// Optimistic average-reward planning (UCRL-style extended value iteration).
///
/// Iterates the damped operator `v ← (1−τ)v + τ·max_a{r + max_{p̃} p̃·v}`
/// (τ = 1/2), which has the same greedy policies and a gain scaled by τ but
/// converges on periodic models too. Returns the greedy policy and the gain
/// estimate, the mid-range of the last increment divided by τ.
pub fn evi_avg_reward(
    model: &ConfidenceModel,
    rewards: &[f64],
    span_tol: f64,
    iteration_cap: usize,
) -> Result<(Vec<usize>, f64)> {
    let (n, a_n) = (model.n_states(), model.n_actions());
    if rewards.len() != n * a_n {
        return Err(Error::Validation(format!(
            "{} rewards for {} state-action pairs",
            rewards.len(),
            n * a_n
        )));
    }
    if !(span_tol > 0.0) {
        return Err(Error::param("span_tol", format!("{span_tol} must be positive")));
    }
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut policy = vec![0usize; n];
    let mut scratch = vec![0.0; n];
    for iter in 1..=iteration_cap {
        let mut order = value_order(&v);
        order.reverse();
        for s in 0..n {
            let mut best = (0, f64::NEG_INFINITY);
            for a in 0..a_n {
                let q = rewards[s * a_n + a]
                    + transport(model.p_hat_row(s, a), model.beta_row(s, a), &v, &order, &mut scratch);
                if q > best.1 {
                    best = (a, q);
                }
            }
            policy[s] = best.0;
            next[s] = (1.0 - AVG_DAMPING) * v[s] + AVG_DAMPING * best.1;
        }
        let (mut lo, mut hi, mut arg) = (f64::INFINITY, f64::NEG_INFINITY, 0);
        for s in 0..n {
            let d = next[s] - v[s];
            lo = lo.min(d);
            if d > hi {
                hi = d;
                arg = s;
            }
        }
        // keep values bounded
        let shift = next.iter().copied().fold(f64::INFINITY, f64::min);
        for s in 0..n {
            v[s] = next[s] - shift;
        }
        if (hi - lo) / AVG_DAMPING <= span_tol {
            return Ok((policy, 0.5 * (hi + lo) / AVG_DAMPING));
        }
        if iter == iteration_cap {
            return Err(Error::Divergence {
                iterations: iter,
                state: arg,
                residual: hi - lo,
            });
        }
    }
    Err(Error::param("iteration_cap", "must be at least 1"))
}
