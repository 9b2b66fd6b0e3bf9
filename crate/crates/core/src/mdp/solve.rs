//! Exact solvers for a known model: policy iteration on SSP instances,
//! policy evaluation, diameter, and communication checks.

use serde::Serialize;

use super::{TabularMdp, ValueVector};
use crate::error::{Error, Result};

const MAX_POLICY_ITERATIONS: usize = 10_000;

/// Per-(s, a) cost vector derived from the MDP's state costs, or all ones.
pub fn default_costs(mdp: &TabularMdp) -> Vec<f64> {
    let a_n = mdp.n_actions();
    match mdp.state_costs() {
        Some(c) => c
            .iter()
            .flat_map(|&x| std::iter::repeat(x).take(a_n))
            .collect(),
        None => vec![1.0; mdp.n_states() * a_n],
    }
}

fn goal_mask(n: usize, goals: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &g in goals {
        if g >= n {
            return Err(Error::Index {
                what: "goal state",
                index: g,
                limit: n,
            });
        }
        mask[g] = true;
    }
    if goals.is_empty() {
        return Err(Error::param("goals", "goal set is empty"));
    }
    Ok(mask)
}

fn check_costs(mdp: &TabularMdp, costs: &[f64]) -> Result<()> {
    if costs.len() != mdp.n_states() * mdp.n_actions() {
        return Err(Error::Validation(format!(
            "{} costs for {} state-action pairs",
            costs.len(),
            mdp.n_states() * mdp.n_actions()
        )));
    }
    if let Some(c) = costs.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::Validation(format!("cost {c} is not finite and >= 0")));
    }
    Ok(())
}

/// States from which `goal` can be reached with probability one, given the
/// actions allowed in each state. Returns the set and, per state, an action
/// that makes progress towards the goal (a proper stationary policy on it).
fn almost_sure_set(
    mdp: &TabularMdp,
    goal: &[bool],
    allowed: impl Fn(usize, usize) -> bool,
) -> (Vec<bool>, Vec<usize>) {
    let n = mdp.n_states();
    let mut inside = vec![true; n];
    let mut proper = vec![0usize; n];
    loop {
        // actions whose successors all stay inside
        let safe = |s: usize, a: usize, inside: &[bool]| {
            allowed(s, a) && mdp.support(s, a).iter().all(|&(t, _)| inside[t])
        };
        // backward layering from the goal through safe actions
        let mut reach = goal.to_vec();
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..n {
                if reach[s] || !inside[s] {
                    continue;
                }
                for a in 0..mdp.n_actions() {
                    if safe(s, a, &inside) && mdp.support(s, a).iter().any(|&(t, _)| reach[t]) {
                        reach[s] = true;
                        proper[s] = a;
                        changed = true;
                        break;
                    }
                }
            }
        }
        if reach == inside {
            return (inside, proper);
        }
        inside = reach;
    }
}

/// Solves `(I - P) x = c` in place by Gaussian elimination with partial pivoting.
fn solve_linear(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::Validation("singular policy-evaluation system".into()));
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Ok(x)
}

/// Expected cost to reach `goals` under a stationary deterministic policy.
/// States that do not reach the goal almost surely get `INFINITY`.
pub fn evaluate_policy(
    mdp: &TabularMdp,
    policy: &[usize],
    goals: &[usize],
    costs: &[f64],
) -> Result<ValueVector> {
    let n = mdp.n_states();
    let a_n = mdp.n_actions();
    check_costs(mdp, costs)?;
    if policy.len() != n {
        return Err(Error::Validation(format!(
            "policy has {} entries for {n} states",
            policy.len()
        )));
    }
    if let Some(&a) = policy.iter().find(|&&a| a >= a_n) {
        return Err(Error::Index {
            what: "action",
            index: a,
            limit: a_n,
        });
    }
    let goal = goal_mask(n, goals)?;
    let (inside, _) = almost_sure_set(mdp, &goal, |s, a| policy[s] == a);
    let vars: Vec<usize> = (0..n).filter(|&s| inside[s] && !goal[s]).collect();
    let mut pos = vec![usize::MAX; n];
    for (i, &s) in vars.iter().enumerate() {
        pos[s] = i;
    }
    let k = vars.len();
    let mut m = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for (i, &s) in vars.iter().enumerate() {
        let a = policy[s];
        m[i][i] += 1.0;
        rhs[i] = costs[s * a_n + a];
        for &(t, p) in mdp.support(s, a) {
            if pos[t] != usize::MAX {
                m[i][pos[t]] -= p;
            }
        }
    }
    let x = solve_linear(m, rhs)?;
    let mut v = vec![f64::INFINITY; n];
    for s in 0..n {
        if goal[s] {
            v[s] = 0.0;
        } else if pos[s] != usize::MAX {
            v[s] = x[pos[s]];
        }
    }
    Ok(ValueVector(v))
}

fn q_value(mdp: &TabularMdp, s: usize, a: usize, v: &[f64], costs: &[f64]) -> f64 {
    let mut q = costs[s * mdp.n_actions() + a];
    for &(t, p) in mdp.support(s, a) {
        q += p * v[t];
    }
    q
}

/// Greedy policy with respect to `values`; ties go to the lowest action.
/// Goal states get action 0.
pub fn greedy_policy(
    mdp: &TabularMdp,
    values: &[f64],
    goals: &[usize],
    costs: &[f64],
) -> Result<Vec<usize>> {
    check_costs(mdp, costs)?;
    let goal = goal_mask(mdp.n_states(), goals)?;
    Ok((0..mdp.n_states())
        .map(|s| {
            if goal[s] {
                return 0;
            }
            let mut best = (0, f64::INFINITY);
            for a in 0..mdp.n_actions() {
                let q = q_value(mdp, s, a, values, costs);
                if q < best.1 {
                    best = (a, q);
                }
            }
            best.0
        })
        .collect())
}

/// Optimal SSP values `V*(s → goals)` of a known model, computed exactly by
/// policy iteration started from a proper policy.
pub fn exact_ssp_values(mdp: &TabularMdp, goals: &[usize], costs: &[f64]) -> Result<ValueVector> {
    Ok(exact_ssp_solution(mdp, goals, costs)?.0)
}

pub(crate) fn exact_ssp_solution(
    mdp: &TabularMdp,
    goals: &[usize],
    costs: &[f64],
) -> Result<(ValueVector, Vec<usize>)> {
    check_costs(mdp, costs)?;
    let n = mdp.n_states();
    let goal = goal_mask(n, goals)?;
    let (_, mut policy) = almost_sure_set(mdp, &goal, |_, _| true);
    for iter in 0..MAX_POLICY_ITERATIONS {
        let v = evaluate_policy(mdp, &policy, goals, costs)?;
        let mut stable = true;
        for s in (0..n).filter(|&s| !goal[s] && v[s].is_finite()) {
            let current = q_value(mdp, s, policy[s], &v, costs);
            let tol = 1e-12 * current.abs().max(1.0);
            let mut best = (policy[s], current);
            for a in 0..mdp.n_actions() {
                let q = q_value(mdp, s, a, &v, costs);
                if q < best.1 - tol {
                    best = (a, q);
                }
            }
            if best.0 != policy[s] {
                policy[s] = best.0;
                stable = false;
            }
        }
        if stable {
            return Ok((v, policy));
        }
        if iter + 1 == MAX_POLICY_ITERATIONS {
            return Err(Error::Divergence {
                iterations: MAX_POLICY_ITERATIONS,
                state: 0,
                residual: f64::NAN,
            });
        }
    }
    unreachable!()
}

/// Diameter `D = max_{s ≠ s'} min_π E[τ_π(s → s')]`, a maximizing pair, and
/// the per-target diameters `D_s = max_{s' ≠ s} min_π E[τ_π(s' → s)]`.
/// Entries are `INFINITY` when the MDP is not communicating.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diameter {
    pub value: f64,
    pub from: usize,
    pub to: usize,
    pub per_target: Vec<f64>,
}

pub fn diameter(mdp: &TabularMdp) -> Result<Diameter> {
    let n = mdp.n_states();
    let unit = vec![1.0; n * mdp.n_actions()];
    let mut best = Diameter {
        value: 0.0,
        from: 0,
        to: 0,
        per_target: vec![0.0; n],
    };
    for g in 0..n {
        let v = exact_ssp_values(mdp, &[g], &unit)?;
        for (s, &x) in v.iter().enumerate() {
            if s == g {
                continue;
            }
            best.per_target[g] = best.per_target[g].max(x);
            if x > best.value {
                best.value = x;
                best.from = s;
                best.to = g;
            }
        }
    }
    Ok(best)
}

/// Result of a communication check on the positive-probability graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReachabilityReport {
    pub communicating: bool,
    /// Ordered pairs `(from, to)` with no path from `from` to `to`.
    pub unreachable: Vec<(usize, usize)>,
}

pub fn check_communicating(mdp: &TabularMdp) -> ReachabilityReport {
    let n = mdp.n_states();
    let mut unreachable = Vec::new();
    for src in 0..n {
        let mut seen = vec![false; n];
        seen[src] = true;
        let mut stack = vec![src];
        while let Some(s) = stack.pop() {
            for a in 0..mdp.n_actions() {
                for &(t, _) in mdp.support(s, a) {
                    if !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
        }
        unreachable.extend((0..n).filter(|&t| !seen[t]).map(|t| (src, t)));
    }
    ReachabilityReport {
        communicating: unreachable.is_empty(),
        unreachable,
    }
}
