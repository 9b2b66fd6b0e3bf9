//! Online visit counters, the empirical model, and Bernstein confidence sets.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

/// Visit statistics of one run.
///
/// `attempt_start` is `U_k` (counts frozen when the current attempt or episode
/// began) and `in_attempt` is `ν_k`, so `N = U_k + ν_k` at all times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counters {
    n_states: usize,
    n_actions: usize,
    t: u64,
    n_sa: Vec<u64>,
    n_sas: Vec<u64>,
    n_s: Vec<u64>,
    attempt_start: Vec<u64>,
    in_attempt: Vec<u64>,
}

impl Counters {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            t: 0,
            n_sa: vec![0; n_states * n_actions],
            n_sas: vec![0; n_states * n_actions * n_states],
            n_s: vec![0; n_states],
            attempt_start: vec![0; n_states * n_actions],
            in_attempt: vec![0; n_states * n_actions],
        }
    }

    pub fn for_mdp(mdp: &TabularMdp) -> Self {
        Self::new(mdp.n_states(), mdp.n_actions())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn record_transition(&mut self, s: usize, a: usize, next: usize) -> Result<()> {
        for (what, index, limit) in [
            ("state", s, self.n_states),
            ("action", a, self.n_actions),
            ("next state", next, self.n_states),
        ] {
            if index >= limit {
                return Err(Error::Index { what, index, limit });
            }
        }
        self.record_unchecked(s, a, next);
        Ok(())
    }

    #[inline]
    pub(crate) fn record_unchecked(&mut self, s: usize, a: usize, next: usize) {
        let sa = s * self.n_actions + a;
        self.t += 1;
        self.n_sa[sa] += 1;
        self.n_sas[sa * self.n_states + next] += 1;
        self.n_s[s] += 1;
        self.in_attempt[sa] += 1;
    }

    /// Starts a new attempt: `U ← N`, `ν ← 0`.
    pub fn begin_attempt(&mut self) {
        self.attempt_start.copy_from_slice(&self.n_sa);
        self.in_attempt.iter_mut().for_each(|v| *v = 0);
    }

    #[inline]
    pub fn t(&self) -> u64 {
        self.t
    }

    #[inline]
    pub fn n(&self, s: usize, a: usize) -> u64 {
        self.n_sa[s * self.n_actions + a]
    }

    /// Visits to `s` summed over actions.
    #[inline]
    pub fn n_state(&self, s: usize) -> u64 {
        self.n_s[s]
    }

    #[inline]
    pub fn n_next(&self, s: usize, a: usize, next: usize) -> u64 {
        self.n_sas[(s * self.n_actions + a) * self.n_states + next]
    }

    pub fn next_counts(&self, s: usize, a: usize) -> &[u64] {
        let off = (s * self.n_actions + a) * self.n_states;
        &self.n_sas[off..off + self.n_states]
    }

    #[inline]
    pub fn attempt_start(&self, s: usize, a: usize) -> u64 {
        self.attempt_start[s * self.n_actions + a]
    }

    #[inline]
    pub fn in_attempt(&self, s: usize, a: usize) -> u64 {
        self.in_attempt[s * self.n_actions + a]
    }

    /// Doubling rule: the current attempt must stop once `ν(s,a) > max{U(s,a), 1}`.
    #[inline]
    pub fn doubling_triggered(&self, s: usize, a: usize) -> bool {
        let sa = s * self.n_actions + a;
        self.in_attempt[sa] > self.attempt_start[sa].max(1)
    }

    /// Flat `N(s,a)` table, row-major over `(s, a)`.
    pub fn visit_table(&self) -> &[u64] {
        &self.n_sa
    }

    /// Empirical next-state distribution; all zeros for unvisited pairs.
    pub fn empirical_row(&self, s: usize, a: usize) -> Vec<f64> {
        let n = self.n(s, a);
        let row = self.next_counts(s, a);
        if n == 0 {
            return vec![0.0; self.n_states];
        }
        row.iter().map(|&c| c as f64 / n as f64).collect()
    }
}

/// Bernstein radius `α_p · [2√(σ̂² L / N⁺) + 6 L / N⁺]` with
/// `L = ln(2 S A N⁺ / δ)` and `N⁺ = max{1, N}`.
pub fn bernstein_radius(
    n: u64,
    variance: f64,
    n_states: usize,
    n_actions: usize,
    delta: f64,
    alpha_p: f64,
) -> Result<f64> {
    check_delta(delta)?;
    if !(alpha_p > 0.0 && alpha_p.is_finite()) {
        return Err(Error::param("alpha_p", format!("{alpha_p} must be positive")));
    }
    if !(0.0..=0.25 + 1e-12).contains(&variance) {
        return Err(Error::param(
            "variance",
            format!("{variance} not in [0, 1/4]"),
        ));
    }
    Ok(radius_unchecked(n, variance, n_states, n_actions, delta, alpha_p))
}

#[inline]
fn radius_unchecked(n: u64, var: f64, s: usize, a: usize, delta: f64, alpha_p: f64) -> f64 {
    let n_plus = n.max(1) as f64;
    let l = (2.0 * s as f64 * a as f64 * n_plus / delta).ln();
    alpha_p * (2.0 * (var * l / n_plus).sqrt() + 6.0 * l / n_plus)
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::param("delta", format!("{delta} not in (0,1)")))
    }
}

/// Empirical kernel plus per-entry confidence radii.
///
/// Unvisited pairs have an all-zero `p̂` row and radius at least 1, so their
/// clipped box is `[0, 1]` everywhere.
#[derive(Debug, Clone)]
pub struct ConfidenceModel {
    n_states: usize,
    n_actions: usize,
    p_hat: Vec<f64>,
    beta: Vec<f64>,
    delta: f64,
    alpha_p: f64,
}

impl ConfidenceModel {
    pub fn from_counters(counters: &Counters, delta: f64, alpha_p: f64) -> Result<Self> {
        check_delta(delta)?;
        if !(alpha_p >= 0.0 && alpha_p.is_finite()) {
            return Err(Error::param("alpha_p", format!("{alpha_p} must be >= 0")));
        }
        let (s_n, a_n) = (counters.n_states(), counters.n_actions());
        let mut model = Self {
            n_states: s_n,
            n_actions: a_n,
            p_hat: vec![0.0; s_n * a_n * s_n],
            beta: vec![0.0; s_n * a_n * s_n],
            delta,
            alpha_p,
        };
        for s in 0..s_n {
            for a in 0..a_n {
                model.update_pair(counters, s, a);
            }
        }
        Ok(model)
    }

    /// The true kernel with zero radii (known-dynamics mode).
    pub fn known(mdp: &TabularMdp) -> Self {
        Self {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            p_hat: mdp.kernel().to_vec(),
            beta: vec![0.0; mdp.kernel().len()],
            delta: 0.5,
            alpha_p: 0.0,
        }
    }

    /// Recomputes the row of `(s, a)` from `counters`; the radius of a pair
    /// depends on its own counts only, so this is all a new sample changes.
    pub fn update_pair(&mut self, counters: &Counters, s: usize, a: usize) {
        let n = counters.n(s, a);
        let off = (s * self.n_actions + a) * self.n_states;
        let counts = counters.next_counts(s, a);
        for j in 0..self.n_states {
            let p = if n == 0 {
                0.0
            } else {
                counts[j] as f64 / n as f64
            };
            self.p_hat[off + j] = p;
            let mut b = radius_unchecked(
                n,
                p * (1.0 - p),
                self.n_states,
                self.n_actions,
                self.delta,
                self.alpha_p,
            );
            if n == 0 {
                b = b.max(1.0);
            }
            self.beta[off + j] = b;
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn alpha_p(&self) -> f64 {
        self.alpha_p
    }

    #[inline]
    pub fn p_hat_row(&self, s: usize, a: usize) -> &[f64] {
        let off = (s * self.n_actions + a) * self.n_states;
        &self.p_hat[off..off + self.n_states]
    }

    #[inline]
    pub fn beta_row(&self, s: usize, a: usize) -> &[f64] {
        let off = (s * self.n_actions + a) * self.n_states;
        &self.beta[off..off + self.n_states]
    }

    /// `σ̂(s'|s,a) = √(p̂(1 − p̂))`.
    pub fn sigma_row(&self, s: usize, a: usize) -> Vec<f64> {
        self.p_hat_row(s, a)
            .iter()
            .map(|p| (p * (1.0 - p)).sqrt())
            .collect()
    }

    /// Number of next states with positive empirical probability.
    pub fn support_size(&self, s: usize, a: usize) -> usize {
        self.p_hat_row(s, a).iter().filter(|p| **p > 0.0).count()
    }

    /// Whether every entry of `mdp`'s kernel lies in its clipped box.
    pub fn contains(&self, mdp: &TabularMdp) -> bool {
        mdp.kernel()
            .iter()
            .zip(self.p_hat.iter().zip(&self.beta))
            .all(|(&p, (&ph, &b))| p >= (ph - b).max(0.0) - 1e-15 && p <= (ph + b).min(1.0) + 1e-15)
    }
}
