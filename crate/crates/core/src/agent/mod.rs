//! Exploration agents behind a common trait, and the registry that builds
//! them by name.

mod gosprl;
mod maxent;
mod random;
mod session;
mod ucrl;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimation::Counters;
use crate::mdp::TabularMdp;
use crate::requirements::RequirementSchedule;

pub use gosprl::{compute_goal_set, CostRule, GoalStrategy, Gosprl, GosprlConfig, ReachLimit};
pub use maxent::{MaxEnt, MaxEntConfig, MaxEntMode};
pub use random::RandomAgent;
pub use session::Session;
pub use ucrl::{Ucrl, UcrlConfig, UcrlMode};

/// Run-level settings shared by every agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunContext {
    pub delta: f64,
    pub alpha_p: f64,
    /// Hard horizon; `None` uses `10·(B̄·S·A + S³·A)` from the requirement envelope.
    pub step_cap: Option<u64>,
    pub log_every: u64,
    /// Also record `E_t` (needs the true kernel; costs `O(S²A)` per log point).
    pub track_model_error: bool,
    /// For model-estimation requirements: halve `η` whenever the current
    /// budget is met, and keep going until the step cap.
    pub eta_halving: bool,
}

impl Default for RunContext {
    fn default() -> Self {
        Self {
            delta: 0.1,
            alpha_p: 1.0,
            step_cap: None,
            log_every: 10,
            track_model_error: false,
            eta_halving: false,
        }
    }
}

impl RunContext {
    pub fn resolved_step_cap(&self, env: &TabularMdp, schedule: &RequirementSchedule) -> u64 {
        self.step_cap.unwrap_or_else(|| {
            let (s, a) = (env.n_states() as u64, env.n_actions() as u64);
            let b: u64 = schedule.envelope().iter().sum();
            10u64.saturating_mul(b.saturating_mul(s * a).saturating_add(s * s * s * a))
        })
    }
}

/// One logged point of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricPoint {
    pub t: u64,
    pub p_t: f64,
    pub e_t: Option<f64>,
    /// Steps taken since the previous point.
    pub visits: u64,
}

/// One attempt (GOSPRL) or episode (baselines).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttemptRecord {
    pub start: u64,
    pub goals: usize,
    pub length: u64,
    /// Ended by reaching a goal (rather than by the doubling rule or the cap).
    pub success: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunTrace {
    pub seed: u64,
    pub algo: String,
    /// Stopping time; `None` when the step cap was hit first.
    pub tau: Option<u64>,
    pub steps: u64,
    pub attempts: Vec<AttemptRecord>,
    pub series: Vec<MetricPoint>,
    pub counters: Counters,
    /// States given up on by the reachability-limited variant.
    pub discarded: Option<Vec<usize>>,
    /// Number of accuracy halvings performed (model estimation only).
    pub halvings: u32,
}

impl RunTrace {
    pub fn capped(&self) -> bool {
        self.tau.is_none()
    }
}

/// A sample-collection strategy.
pub trait Agent: Send + Sync {
    fn name(&self) -> &str;

    /// Plays `session` until its requirements are met or its horizon is hit.
    fn run_session(&self, session: &mut Session<'_>) -> Result<()>;

    /// Known-dynamics agents plan on the true kernel with zero radii.
    fn known_dynamics(&self) -> bool {
        false
    }

    fn run(
        &self,
        env: &TabularMdp,
        schedule: RequirementSchedule,
        ctx: &RunContext,
        seed: u64,
    ) -> Result<RunTrace> {
        let mut session = Session::new(env, schedule, ctx.clone(), seed, self.known_dynamics())?;
        self.run_session(&mut session)?;
        Ok(session.into_trace(self.name()))
    }
}

pub type AgentFactory = fn(&Value) -> Result<Box<dyn Agent>>;

/// Agents by name.
pub struct AgentRegistry {
    factories: BTreeMap<String, AgentFactory>,
}

fn parse_params<T: serde::de::DeserializeOwned + Default>(params: &Value) -> Result<T> {
    if params.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(params.clone()).map_err(|e| Error::Config(format!("bad agent parameters: {e}")))
}

impl AgentRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, factory: AgentFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, name: &str, params: &Value) -> Result<Box<dyn Agent>> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{name}`")))?;
        factory(params)
    }
}

impl Default for AgentRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("gosprl", |p| Ok(Box::new(Gosprl::new(parse_params(p)?)?)));
        r.register("gosprl_known", |p| {
            let cfg = GosprlConfig {
                known_dynamics: true,
                ..parse_params(p)?
            };
            Ok(Box::new(Gosprl::new(cfg)?))
        });
        r.register("gosprl_l", |p| {
            let cfg: GosprlConfig = parse_params(p)?;
            if cfg.reach_limit.is_none() {
                return Err(Error::Config("gosprl_l needs a `reach_limit`".into()));
            }
            Ok(Box::new(Gosprl::new(cfg)?))
        });
        r.register("random", |_| Ok(Box::new(RandomAgent)));
        r.register("ucrl_zero_one", |p| Ok(Box::new(Ucrl::new(UcrlMode::ZeroOne, parse_params(p)?))));
        r.register("ucrl_zero", |p| Ok(Box::new(Ucrl::new(UcrlMode::Zero, parse_params(p)?))));
        r.register("maxent", |p| Ok(Box::new(MaxEnt::new(MaxEntMode::Entropy, parse_params(p)?))));
        r.register("maxent_min_frequency", |p| {
            Ok(Box::new(MaxEnt::new(MaxEntMode::MinFrequency, parse_params(p)?)))
        });
        r.register("maxent_weighted", |p| {
            Ok(Box::new(MaxEnt::new(MaxEntMode::Weighted, parse_params(p)?)))
        });
        r
    }
}
