//! Run metrics: proportion of satisfied states and mean L1 model error.

use crate::estimation::Counters;
use crate::mdp::TabularMdp;
use crate::requirements::RequirementSchedule;

/// `P_t = |{s : ∀a N(s,a) ≥ b(s,a)}| / S`, recomputed from scratch.
pub fn proportion_met(counters: &Counters, schedule: &RequirementSchedule) -> f64 {
    let n = counters.n_states();
    let met = (0..n)
        .filter(|&s| match schedule.scope() {
            crate::requirements::Scope::Pair => {
                (0..counters.n_actions()).all(|a| counters.n(s, a) >= schedule.requirement(s, a))
            }
            crate::requirements::Scope::State => counters.n_state(s) >= schedule.requirement(s, 0),
        })
        .count();
    met as f64 / n as f64
}

/// `‖p̂(·|s,a) − p(·|s,a)‖₁`; an unvisited pair has an all-zero `p̂` row and error 1.
pub fn pair_l1_error(counters: &Counters, mdp: &TabularMdp, s: usize, a: usize) -> f64 {
    let n = counters.n(s, a);
    let row = mdp.row(s, a);
    if n == 0 {
        return row.iter().sum();
    }
    counters
        .next_counts(s, a)
        .iter()
        .zip(row)
        .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
        .sum()
}

/// `E_t = (SA)⁻¹ Σ_{s,a} ‖p̂ − p‖₁`.
pub fn model_error(counters: &Counters, mdp: &TabularMdp) -> f64 {
    let (s_n, a_n) = (mdp.n_states(), mdp.n_actions());
    let mut total = 0.0;
    for s in 0..s_n {
        for a in 0..a_n {
            total += pair_l1_error(counters, mdp, s, a);
        }
    }
    total / (s_n * a_n) as f64
}

/// Largest per-pair L1 error.
pub fn max_pair_error(counters: &Counters, mdp: &TabularMdp) -> f64 {
    let mut worst: f64 = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            worst = worst.max(pair_l1_error(counters, mdp, s, a));
        }
    }
    worst
}
