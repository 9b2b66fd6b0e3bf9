use serde::{Deserialize, Serialize};

use super::{Agent, Session};
use crate::error::Result;
use crate::planner::{evi_avg_reward, DEFAULT_ITERATION_CAP};
use crate::requirements::Scope;

/// Reward synthesized from the requirements at each episode start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UcrlMode {
    /// 1 on under-sampled pairs, 0 elsewhere.
    ZeroOne,
    /// `min{1, ([N − b]⁺)^{-1/2}}`, i.e. 1 up to the requirement, then decaying.
    Zero,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UcrlConfig {
    /// Fixed span tolerance; defaults to `1/√t_k` at each episode.
    pub span_tol: Option<f64>,
    pub iteration_cap: usize,
}

impl Default for UcrlConfig {
    fn default() -> Self {
        Self {
            span_tol: None,
            iteration_cap: DEFAULT_ITERATION_CAP,
        }
    }
}

/// Optimistic average-reward agent with episodes ended by the doubling rule.
#[derive(Debug, Clone)]
pub struct Ucrl {
    mode: UcrlMode,
    cfg: UcrlConfig,
}

impl Ucrl {
    pub fn new(mode: UcrlMode, cfg: UcrlConfig) -> Self {
        Self { mode, cfg }
    }

    fn rewards(&self, session: &Session<'_>) -> Vec<f64> {
        let env = session.env();
        let (s_n, a_n) = (env.n_states(), env.n_actions());
        let counters = session.counters();
        let schedule = session.schedule();
        let mut r = Vec::with_capacity(s_n * a_n);
        for s in 0..s_n {
            for a in 0..a_n {
                let (n, b) = match schedule.scope() {
                    Scope::Pair => (counters.n(s, a), schedule.requirement(s, a)),
                    Scope::State => (counters.n_state(s), schedule.requirement(s, 0)),
                };
                r.push(match self.mode {
                    UcrlMode::ZeroOne => f64::from(u8::from(n < b)),
                    UcrlMode::Zero if n <= b => 1.0,
                    UcrlMode::Zero => ((n - b) as f64).powf(-0.5).min(1.0),
                });
            }
        }
        r
    }
}

pub(crate) fn span_tolerance(t: u64) -> f64 {
    (1.0 / (t.max(1) as f64).sqrt()).max(1e-6)
}

impl Agent for Ucrl {
    fn name(&self) -> &str {
        match self.mode {
            UcrlMode::ZeroOne => "ucrl_zero_one",
            UcrlMode::Zero => "ucrl_zero",
        }
    }

    fn run_session(&self, session: &mut Session<'_>) -> Result<()> {
        'episodes: while !session.finished() {
            let rewards = self.rewards(session);
            let tol = self.cfg.span_tol.unwrap_or_else(|| span_tolerance(session.t()));
            let (policy, _) = evi_avg_reward(session.model(), &rewards, tol, self.cfg.iteration_cap)?;
            session.begin_attempt(0);
            loop {
                let s = session.state();
                let a = policy[s];
                session.step(a);
                if session.finished() {
                    session.end_attempt(false);
                    break 'episodes;
                }
                if session.counters().doubling_triggered(s, a) {
                    session.end_attempt(false);
                    break;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::RunContext;
    use crate::estimation::Counters;
    use crate::mdp::TabularMdp;
    use crate::requirements::RequirementSchedule;

    #[test]
    fn zero_mode_caps_at_requirement() {
        let env = TabularMdp::new(1, 2, vec![1.0, 1.0], 0).unwrap();
        let sched = RequirementSchedule::per_pair(1, 2, vec![2, 2]).unwrap();
        let mut session = Session::new(&env, sched, RunContext::default(), 0, false).unwrap();
        session.step(0);
        session.step(0);
        session.step(1);
        session.step(1);
        session.step(1);
        session.step(1);
        session.step(1);
        let r = Ucrl::new(UcrlMode::Zero, UcrlConfig::default()).rewards(&session);
        assert_eq!(r[0], 1.0);
        assert!((r[1] - 3f64.powf(-0.5)).abs() < 1e-12);
        let r01 = Ucrl::new(UcrlMode::ZeroOne, UcrlConfig::default()).rewards(&session);
        assert_eq!(r01, vec![0.0, 0.0]);
        let _ = Counters::new(1, 1);
    }
}
