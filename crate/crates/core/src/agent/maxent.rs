use serde::{Deserialize, Serialize};

use super::ucrl::span_tolerance;
use super::{Agent, Session};
use crate::error::Result;
use crate::planner::{evi_avg_reward, DEFAULT_ITERATION_CAP};

/// Objective whose gradient becomes the episode reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxEntMode {
    /// Entropy of the state-action frequencies.
    Entropy,
    /// Smallest frequency: reward 1 on the least-visited pair only.
    MinFrequency,
    /// Entropy gradient weighted by how uncertain each pair's model still is.
    Weighted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaxEntConfig {
    pub span_tol: Option<f64>,
    pub iteration_cap: usize,
    /// Episodes also end after `⌈epoch_scale·√t_k⌉` steps.
    pub epoch_scale: f64,
}

impl Default for MaxEntConfig {
    fn default() -> Self {
        Self {
            span_tol: None,
            iteration_cap: DEFAULT_ITERATION_CAP,
            epoch_scale: 1.0,
        }
    }
}

/// Frank-Wolfe style frequency shaping: each episode plans, optimistically,
/// for the gradient of the objective at the current smoothed frequencies.
#[derive(Debug, Clone)]
pub struct MaxEnt {
    mode: MaxEntMode,
    cfg: MaxEntConfig,
}

impl MaxEnt {
    pub fn new(mode: MaxEntMode, cfg: MaxEntConfig) -> Self {
        Self { mode, cfg }
    }

    /// `λ̃(s,a) = (N(s,a) + 1/(SA)) / (t + 1)`.
    pub fn smoothed_frequencies(session: &Session<'_>) -> Vec<f64> {
        let counters = session.counters();
        let pairs = counters.visit_table().len() as f64;
        let t = counters.t() as f64;
        counters
            .visit_table()
            .iter()
            .map(|&n| (n as f64 + 1.0 / pairs) / (t + 1.0))
            .collect()
    }

    fn rewards(&self, session: &Session<'_>) -> Vec<f64> {
        let lambda = Self::smoothed_frequencies(session);
        if self.mode == MaxEntMode::MinFrequency {
            let mut best = 0;
            for (i, &l) in lambda.iter().enumerate() {
                if l < lambda[best] {
                    best = i;
                }
            }
            let mut r = vec![0.0; lambda.len()];
            r[best] = 1.0;
            return r;
        }
        let grad: Vec<f64> = lambda.iter().map(|l| -l.ln() - 1.0).collect();
        let lo = grad.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = grad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut r: Vec<f64> = grad
            .iter()
            .map(|g| if hi > lo { (g - lo) / (hi - lo) } else { 1.0 })
            .collect();
        if self.mode == MaxEntMode::Weighted {
            let model = session.model();
            let a_n = model.n_actions();
            for (i, x) in r.iter_mut().enumerate() {
                let (s, a) = (i / a_n, i % a_n);
                let spread: f64 = model.sigma_row(s, a).iter().sum();
                let bonus = model.beta_row(s, a).iter().copied().fold(0.0, f64::max);
                *x *= (spread + bonus).min(1.0);
            }
        }
        r
    }
}

impl Agent for MaxEnt {
    fn name(&self) -> &str {
        match self.mode {
            MaxEntMode::Entropy => "maxent",
            MaxEntMode::MinFrequency => "maxent_min_frequency",
            MaxEntMode::Weighted => "maxent_weighted",
        }
    }

    fn run_session(&self, session: &mut Session<'_>) -> Result<()> {
        'episodes: while !session.finished() {
            let rewards = self.rewards(session);
            let tol = self.cfg.span_tol.unwrap_or_else(|| span_tolerance(session.t()));
            let (policy, _) = evi_avg_reward(session.model(), &rewards, tol, self.cfg.iteration_cap)?;
            let max_len = (self.cfg.epoch_scale * (session.t() as f64).sqrt()).ceil().max(1.0) as u64;
            session.begin_attempt(0);
            for _ in 0..max_len {
                let s = session.state();
                let a = policy[s];
                session.step(a);
                if session.finished() {
                    session.end_attempt(false);
                    break 'episodes;
                }
                if session.counters().doubling_triggered(s, a) {
                    break;
                }
            }
            session.end_attempt(false);
        }
        Ok(())
    }
}
