use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, Gosprl, GosprlConfig, RunContext, Session};
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::requirements::RequirementSchedule;

const REWARD_STREAM: u64 = 2;

/// Per-state reward distributions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "means", rename_all = "snake_case")]
pub enum StateRewards {
    Deterministic(Vec<f64>),
    Bernoulli(Vec<f64>),
}

impl StateRewards {
    fn means(&self) -> &[f64] {
        match self {
            StateRewards::Deterministic(m) | StateRewards::Bernoulli(m) => m,
        }
    }

    fn sample(&self, s: usize, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            StateRewards::Deterministic(m) => m[s],
            StateRewards::Bernoulli(m) => f64::from(u8::from(rng.gen_bool(m[s]))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BestStateConfig {
    pub delta: f64,
    pub alpha_p: f64,
    pub step_cap: u64,
    pub gosprl: GosprlConfig,
}

impl Default for BestStateConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            alpha_p: 1.0,
            step_cap: 10_000_000,
            gosprl: GosprlConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BestStateOutcome {
    pub best: usize,
    /// Rejected states in rejection order.
    pub rejected: Vec<usize>,
    /// Reward samples drawn per state.
    pub pulls: Vec<u64>,
    pub steps: u64,
    /// False when the step cap interrupted a phase.
    pub complete: bool,
}

/// Successive-Rejects phase ends `n_1, …, n_{S−1}` with
/// `n_k = ⌈(n − S)/(loḡ(S)(S + 1 − k))⌉`.
pub fn phase_lengths(n_states: usize, budget: u64) -> Vec<u64> {
    let log_bar = 0.5 + (1..=n_states).map(|i| 1.0 / i as f64).sum::<f64>();
    let free = budget.saturating_sub(n_states as u64) as f64;
    (1..n_states)
        .map(|k| (free / (log_bar * (n_states + 1 - k) as f64)).ceil() as u64)
        .collect()
}

/// Identifies the state with the highest mean reward using Successive
/// Rejects, with GOSPRL travelling to the states whose samples are requested.
pub fn best_state_identification(
    env: &TabularMdp,
    rewards: &StateRewards,
    budget: u64,
    cfg: &BestStateConfig,
    seed: u64,
) -> Result<BestStateOutcome> {
    let (n, a_n) = (env.n_states(), env.n_actions());
    let means = rewards.means();
    if means.len() != n {
        return Err(Error::Validation(format!("{} reward means for {n} states", means.len())));
    }
    if means.iter().any(|m| !(0.0..=1.0).contains(m)) {
        return Err(Error::Validation("reward means must lie in [0, 1]".into()));
    }
    if budget < n as u64 {
        return Err(Error::param("budget", format!("{budget} is smaller than S = {n}")));
    }
    let ctx = RunContext {
        delta: cfg.delta,
        alpha_p: cfg.alpha_p,
        step_cap: Some(cfg.step_cap),
        ..RunContext::default()
    };
    let agent = Gosprl::new(cfg.gosprl.clone())?;
    let mut session = Session::new(env, RequirementSchedule::per_state(n, a_n, vec![0; n])?, ctx, seed, false)?;
    let mut reward_rng = ChaCha8Rng::seed_from_u64(seed);
    reward_rng.set_stream(REWARD_STREAM);

    let mut alive: Vec<usize> = (0..n).collect();
    let mut sums = vec![0.0; n];
    let mut pulls = vec![0u64; n];
    let mut rejected = Vec::new();
    let mut previous = 0;
    let mut complete = true;
    for n_k in phase_lengths(n, budget) {
        let extra = n_k - previous;
        previous = n_k;
        let mut b = vec![0; n];
        for &s in &alive {
            b[s] = session.counters().n_state(s) + extra;
        }
        session.replace_schedule(RequirementSchedule::per_state(n, a_n, b)?);
        agent.run_session(&mut session)?;
        if !session.schedule().all_met() {
            complete = false;
            break;
        }
        for &s in &alive {
            for _ in 0..extra {
                sums[s] += rewards.sample(s, &mut reward_rng);
            }
            pulls[s] += extra;
        }
        let mean = |s: usize| if pulls[s] == 0 { 0.0 } else { sums[s] / pulls[s] as f64 };
        let (idx, _) = alive
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &s)| if mean(s) < acc.1 { (i, mean(s)) } else { acc });
        rejected.push(alive.remove(idx));
    }
    let best = if complete {
        alive[0]
    } else {
        let mean = |s: usize| if pulls[s] == 0 { 0.0 } else { sums[s] / pulls[s] as f64 };
        alive.iter().copied().fold(alive[0], |b, s| if mean(s) > mean(b) { s } else { b })
    };
    Ok(BestStateOutcome {
        best,
        rejected,
        pulls,
        steps: session.t(),
        complete,
    })
}
