use serde::{Deserialize, Serialize};

use super::{Agent, Session};
use crate::error::{Error, Result};
use crate::estimation::Counters;
use crate::planner::{default_mu, evi_ssp, optimistic_action, DEFAULT_ITERATION_CAP};
use crate::requirements::{RequirementSchedule, Scope};

/// Which under-sampled states become goals of an attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalStrategy {
    /// Every under-sampled state.
    AllUndersampled,
    /// The single under-sampled state with the fewest visits.
    LeastSampled,
    /// The single under-sampled state with the best ratio of successful to
    /// attempted attempts (0 when never attempted).
    BestSuccessRatio,
    /// All under-sampled states, except while every state is under-sampled:
    /// then only those with the smallest remaining budget.
    #[serde(alias = "remaining_budget", alias = "max_remaining_budget_initial_phase")]
    RemainingBudgetInitialPhase,
}

/// Per-step costs of the SSP solved at each attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostRule {
    Unit,
    /// The environment's per-state cost annotations (1 when absent).
    StaticStateCosts,
    /// `φ(N(s)) = 1 + (c̄ − 1)·min{1, N(s)/b(s)}`: well-sampled states cost more.
    VisitationPenalty { c_bar: f64 },
}

/// Give up on states that look farther than `l` away.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachLimit {
    pub l: f64,
    #[serde(default = "one")]
    pub alpha: f64,
}

fn one() -> f64 {
    1.0
}

impl ReachLimit {
    /// `Φ(j) = α j L + α j L^{3/2} S² A`.
    pub fn threshold(&self, j: u64, n_states: usize, n_actions: usize) -> f64 {
        let j = j as f64;
        let s = n_states as f64;
        self.alpha * j * self.l + self.alpha * j * self.l.powf(1.5) * s * s * n_actions as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GosprlConfig {
    pub goal_strategy: GoalStrategy,
    pub cost_rule: CostRule,
    /// Plan on the true kernel with zero radii.
    pub known_dynamics: bool,
    /// Fixed VI precision; defaults to `1/(2 t_k)` at each attempt.
    pub mu: Option<f64>,
    pub iteration_cap: usize,
    pub reach_limit: Option<ReachLimit>,
}

impl Default for GosprlConfig {
    fn default() -> Self {
        Self {
            goal_strategy: GoalStrategy::RemainingBudgetInitialPhase,
            cost_rule: CostRule::Unit,
            known_dynamics: false,
            mu: None,
            iteration_cap: DEFAULT_ITERATION_CAP,
            reach_limit: None,
        }
    }
}

/// `G = {s : ∃a, N(s,a) < b(s,a)}` (state scope: `Σ_a N(s,a) < b(s)`),
/// recomputed from scratch.
pub fn compute_goal_set(counters: &Counters, schedule: &RequirementSchedule) -> Vec<usize> {
    (0..counters.n_states())
        .filter(|&s| match schedule.scope() {
            Scope::Pair => (0..counters.n_actions()).any(|a| counters.n(s, a) < schedule.requirement(s, a)),
            Scope::State => counters.n_state(s) < schedule.requirement(s, 0),
        })
        .collect()
}

/// Goal-oriented sample collection: repeatedly plan an optimistic shortest
/// path to the under-sampled states, follow it until a goal is reached (then
/// take an under-sampled action there) or until some pair's visits double.
#[derive(Debug, Clone)]
pub struct Gosprl {
    cfg: GosprlConfig,
    name: String,
}

impl Gosprl {
    pub fn new(cfg: GosprlConfig) -> Result<Self> {
        if let CostRule::VisitationPenalty { c_bar } = cfg.cost_rule {
            if !(c_bar >= 1.0 && c_bar.is_finite()) {
                return Err(Error::param("c_bar", format!("{c_bar} must be finite and >= 1")));
            }
        }
        if let Some(limit) = cfg.reach_limit {
            if !(limit.l >= 1.0) || !(limit.alpha > 0.0) {
                return Err(Error::param("reach_limit", "need L >= 1 and alpha > 0"));
            }
        }
        if let Some(mu) = cfg.mu {
            if !(mu > 0.0) {
                return Err(Error::param("mu", format!("{mu} must be positive")));
            }
        }
        let name = match (cfg.reach_limit.is_some(), cfg.known_dynamics) {
            (true, _) => "gosprl_l",
            (false, true) => "gosprl_known",
            (false, false) => "gosprl",
        };
        Ok(Self {
            cfg,
            name: name.to_string(),
        })
    }

    pub fn config(&self) -> &GosprlConfig {
        &self.cfg
    }

    fn select_goals(&self, session: &Session<'_>, stats: &[(u64, u64)]) -> Vec<usize> {
        let schedule = session.schedule();
        let counters = session.counters();
        let under = schedule.under_sampled_states();
        let argbest = |key: &dyn Fn(usize) -> f64| -> Vec<usize> {
            let mut best = under[0];
            for &s in &under[1..] {
                if key(s) > key(best) {
                    best = s;
                }
            }
            vec![best]
        };
        match self.cfg.goal_strategy {
            GoalStrategy::AllUndersampled => under,
            GoalStrategy::LeastSampled => argbest(&|s| -(counters.n_state(s) as f64)),
            GoalStrategy::BestSuccessRatio => argbest(&|s| {
                let (tried, won) = stats[s];
                if tried == 0 {
                    0.0
                } else {
                    won as f64 / tried as f64
                }
            }),
            GoalStrategy::RemainingBudgetInitialPhase => {
                if under.len() < counters.n_states() {
                    return under;
                }
                let budgets: Vec<u64> = under.iter().map(|&s| schedule.remaining_budget(counters, s)).collect();
                let min = *budgets.iter().min().unwrap();
                under
                    .iter()
                    .zip(&budgets)
                    .filter(|(_, &b)| b == min)
                    .map(|(&s, _)| s)
                    .collect()
            }
        }
    }

    fn costs(&self, session: &Session<'_>) -> Vec<f64> {
        let env = session.env();
        let (s_n, a_n) = (env.n_states(), env.n_actions());
        match self.cfg.cost_rule {
            CostRule::Unit => vec![1.0; s_n * a_n],
            CostRule::StaticStateCosts => crate::mdp::default_costs(env),
            CostRule::VisitationPenalty { c_bar } => {
                let schedule = session.schedule();
                let counters = session.counters();
                let mut c = Vec::with_capacity(s_n * a_n);
                for s in 0..s_n {
                    let b: u64 = match schedule.scope() {
                        Scope::Pair => (0..a_n).map(|a| schedule.requirement(s, a)).sum(),
                        Scope::State => schedule.requirement(s, 0),
                    };
                    let ratio = if b == 0 {
                        1.0
                    } else {
                        (counters.n_state(s) as f64 / b as f64).min(1.0)
                    };
                    let phi = 1.0 + (c_bar - 1.0) * ratio;
                    c.extend(std::iter::repeat(phi).take(a_n));
                }
                c
            }
        }
    }

    fn over_limit(&self, session: &Session<'_>, collected: u64) -> bool {
        match self.cfg.reach_limit {
            Some(limit) => {
                let env = session.env();
                session.t() as f64 > limit.threshold(collected + 1, env.n_states(), env.n_actions())
            }
            None => false,
        }
    }
}

impl Agent for Gosprl {
    fn name(&self) -> &str {
        &self.name
    }

    fn known_dynamics(&self) -> bool {
        self.cfg.known_dynamics
    }

    fn run_session(&self, session: &mut Session<'_>) -> Result<()> {
        let n = session.env().n_states();
        let mut stats = vec![(0u64, 0u64); n];
        let mut collected = 0u64;
        'attempts: while !session.finished() {
            let goals = self.select_goals(session, &stats);
            let costs = self.costs(session);
            let mu = self.cfg.mu.unwrap_or_else(|| default_mu(session.t()));
            let plan = evi_ssp(session.model(), &goals, &costs, mu, self.cfg.iteration_cap)?;
            let mut is_goal = vec![false; n];
            for &g in &goals {
                is_goal[g] = true;
                stats[g].0 += 1;
            }
            session.begin_attempt(goals.len());
            let mut s = session.state();
            let mut first = true;
            loop {
                if is_goal[s] && !first {
                    let success = session.schedule().is_under_sampled(s);
                    if success {
                        let a = session.schedule().under_sampled_action(session.counters(), s);
                        session.step(a);
                        collected += 1;
                        stats[s].1 += 1;
                    }
                    session.end_attempt(true);
                    if self.over_limit(session, collected) {
                        break 'attempts;
                    }
                    break;
                }
                // an under-sampled start state acts as a non-goal copy of itself
                let a = if first && is_goal[s] {
                    optimistic_action(session.model(), s, &plan.values, &costs).0
                } else {
                    plan.policy[s]
                };
                let prev = s;
                s = session.step(a);
                first = false;
                if session.finished() {
                    session.end_attempt(false);
                    break 'attempts;
                }
                if self.over_limit(session, collected) {
                    break 'attempts;
                }
                if session.counters().doubling_triggered(prev, a) {
                    session.end_attempt(false);
                    break;
                }
            }
        }
        if self.cfg.reach_limit.is_some() && !session.schedule().all_met() && session.t() < session.step_cap() {
            session.end_attempt(false);
            session.discarded = Some(session.schedule().under_sampled_states());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::RunContext;
    use crate::mdp::{build_env, EnvSpec, TabularMdp};
    use crate::requirements::{make_requirement, RequirementSpec};

    fn chain() -> TabularMdp {
        TabularMdp::new(2, 1, vec![0.0, 1.0, 0.0, 1.0], 0).unwrap()
    }

    #[test]
    fn deterministic_chain_takes_two_steps() {
        let sched = RequirementSchedule::per_pair(2, 1, vec![0, 1]).unwrap();
        let agent = Gosprl::new(GosprlConfig::default()).unwrap();
        let trace = agent.run(&chain(), sched, &RunContext::default(), 0).unwrap();
        assert_eq!(trace.tau, Some(2));
    }

    #[test]
    fn goal_set_example() {
        let sched = RequirementSchedule::per_pair(3, 1, vec![1, 2, 0]).unwrap();
        let mut c = Counters::new(3, 1);
        c.record_transition(0, 0, 0).unwrap();
        c.record_transition(1, 0, 0).unwrap();
        for _ in 0..5 {
            c.record_transition(2, 0, 0).unwrap();
        }
        assert_eq!(compute_goal_set(&c, &sched), vec![1]);
        let all = RequirementSchedule::per_pair(3, 1, vec![1, 1, 1]).unwrap();
        assert_eq!(compute_goal_set(&Counters::new(3, 1), &all), vec![0, 1, 2]);
        let none = RequirementSchedule::per_pair(3, 1, vec![0, 0, 0]).unwrap();
        assert!(compute_goal_set(&c, &none).is_empty());
    }

    #[test]
    fn reach_limit_threshold() {
        let l = ReachLimit { l: 5.0, alpha: 1.0 };
        assert!((l.threshold(1, 2, 1) - (5.0 + 5f64.powf(1.5) * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn unreachable_requirement_is_discarded() {
        // state 1 can never be entered
        let env = TabularMdp::new(2, 1, vec![1.0, 0.0, 0.0, 1.0], 0).unwrap();
        let sched = RequirementSchedule::per_pair(2, 1, vec![0, 1]).unwrap();
        let cfg = GosprlConfig {
            reach_limit: Some(ReachLimit { l: 5.0, alpha: 1.0 }),
            ..GosprlConfig::default()
        };
        let trace = Gosprl::new(cfg).unwrap().run(&env, sched, &RunContext::default(), 0).unwrap();
        assert_eq!(trace.tau, Some(50));
        assert_eq!(trace.discarded, Some(vec![1]));
    }

    #[test]
    fn every_strategy_and_cost_rule_terminates() {
        let env = build_env(&EnvSpec::Riverswim { n: 5 }).unwrap();
        let strategies = [
            GoalStrategy::AllUndersampled,
            GoalStrategy::LeastSampled,
            GoalStrategy::BestSuccessRatio,
            GoalStrategy::RemainingBudgetInitialPhase,
        ];
        let rules = [CostRule::Unit, CostRule::StaticStateCosts, CostRule::VisitationPenalty { c_bar: 3.0 }];
        for g in strategies {
            for c in rules {
                let cfg = GosprlConfig {
                    goal_strategy: g,
                    cost_rule: c,
                    ..GosprlConfig::default()
                };
                let sched = make_requirement(&RequirementSpec::Treasure { k: 3 }, 5, 2).unwrap();
                let trace = Gosprl::new(cfg).unwrap().run(&env, sched.clone(), &RunContext::default(), 1).unwrap();
                assert!(sched.satisfied_by(&trace.counters), "{g:?} {c:?}");
            }
        }
    }

    #[test]
    fn strategy_aliases() {
        let cfg: GosprlConfig = serde_json::from_str(r#"{"goal_strategy":"max_remaining_budget_initial_phase"}"#).unwrap();
        assert_eq!(cfg.goal_strategy, GoalStrategy::RemainingBudgetInitialPhase);
        let cfg: GosprlConfig = serde_json::from_str(r#"{"cost_rule":{"kind":"visitation_penalty","c_bar":4}}"#).unwrap();
        assert_eq!(cfg.cost_rule, CostRule::VisitationPenalty { c_bar: 4.0 });
    }
}
