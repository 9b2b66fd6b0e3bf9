use serde::{Deserialize, Serialize};

use crate::agent::{Agent, Gosprl, GosprlConfig, RunContext, Session};
use crate::error::{Error, Result};
use crate::estimation::Counters;
use crate::mdp::TabularMdp;
use crate::planner::{evi_ssp, DEFAULT_ITERATION_CAP};
use crate::requirements::{make_requirement, Norm, RequirementSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiameterConfig {
    pub delta: f64,
    pub alpha_p: f64,
    /// Multiplies the model-estimation budgets. 1 is the theoretical value.
    pub budget_scale: f64,
    /// Total step budget across all rounds.
    pub step_cap: u64,
    pub max_rounds: u32,
    pub gosprl: GosprlConfig,
}

impl Default for DiameterConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            alpha_p: 1.0,
            budget_scale: 1.0,
            step_cap: 10_000_000,
            max_rounds: 40,
            gosprl: GosprlConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiameterEstimate {
    /// `D̂ = (1 + 2η‖ṽ‖)‖ṽ‖`.
    pub estimate: f64,
    /// Largest optimistic hitting time `‖ṽ‖` of the last round.
    pub v_max: f64,
    pub eta: f64,
    pub rounds: u32,
    pub steps: u64,
    /// False when the step cap or the round limit ended the loop early.
    pub complete: bool,
    pub counters: Counters,
}

/// Doubling search for the diameter: at scale `W`, estimate the model to
/// accuracy `ε/(2W)` and compute optimistic hitting times to every state;
/// stop once they all fit under `W`.
pub fn estimate_diameter(env: &TabularMdp, eps: f64, cfg: &DiameterConfig, seed: u64) -> Result<DiameterEstimate> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", format!("{eps} must be positive")));
    }
    if !(cfg.budget_scale > 0.0) {
        return Err(Error::param("budget_scale", "must be positive"));
    }
    let (n, a_n) = (env.n_states(), env.n_actions());
    if n == 1 {
        return Ok(DiameterEstimate {
            estimate: 0.0,
            v_max: 0.0,
            eta: eps,
            rounds: 0,
            steps: 0,
            complete: true,
            counters: Counters::for_mdp(env),
        });
    }
    let ctx = RunContext {
        delta: cfg.delta,
        alpha_p: cfg.alpha_p,
        step_cap: Some(cfg.step_cap),
        ..RunContext::default()
    };
    let agent = Gosprl::new(GosprlConfig {
        known_dynamics: false,
        ..cfg.gosprl.clone()
    })?;
    let requirement = |eta: f64| RequirementSpec::ModEst {
        eta: eta / 2.0,
        delta: cfg.delta,
        norm: Norm::L1,
        scale: cfg.budget_scale,
    };
    let mut session = Session::new(env, make_requirement(&requirement(eps), n, a_n)?, ctx, seed, false)?;
    let unit = vec![1.0; n * a_n];
    let mu = eps.min(1.0) / 2.0;
    let mut w = 0.5;
    let mut v_max = 1.0;
    let mut eta = eps;
    let mut rounds = 0;
    let mut complete = true;
    while v_max > w {
        if rounds == cfg.max_rounds || session.capped() {
            complete = false;
            break;
        }
        rounds += 1;
        w *= 2.0;
        eta = eps / w;
        session.replace_schedule(make_requirement(&requirement(eta), n, a_n)?);
        agent.run_session(&mut session)?;
        if !session.schedule().all_met() {
            complete = false;
        }
        v_max = 0.0;
        for goal in 0..n {
            let plan = evi_ssp(session.model(), &[goal], &unit, mu, DEFAULT_ITERATION_CAP)?;
            v_max = plan.values.0.iter().copied().fold(v_max, f64::max);
        }
        if !complete {
            break;
        }
    }
    Ok(DiameterEstimate {
        estimate: (1.0 + 2.0 * eta * v_max) * v_max,
        v_max,
        eta,
        rounds,
        steps: session.t(),
        complete,
        counters: session.counters().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::diameter;

    #[test]
    fn single_state_is_zero() {
        let env = TabularMdp::new(1, 2, vec![1.0, 1.0], 0).unwrap();
        let est = estimate_diameter(&env, 0.5, &DiameterConfig::default(), 0).unwrap();
        assert_eq!(est.estimate, 0.0);
        assert_eq!(est.steps, 0);
    }

    #[test]
    fn deterministic_cycle_sandwich() {
        // s -> s+1 mod 3 under the only action, D = 2
        let env = TabularMdp::new(3, 1, vec![0., 1., 0., 0., 0., 1., 1., 0., 0.], 0).unwrap();
        let d = diameter(&env).unwrap().value;
        assert!((d - 2.0).abs() < 1e-9);
        let cfg = DiameterConfig {
            budget_scale: 0.01,
            ..DiameterConfig::default()
        };
        let est = estimate_diameter(&env, 0.5, &cfg, 1).unwrap();
        assert!(est.complete);
        assert!(est.estimate >= d - 1e-9 && est.estimate <= 7.5, "{}", est.estimate);
        assert!(f64::from(est.rounds) <= (d * 1.5).log2() + 1.0 + 1e-9);
    }

    #[test]
    fn rejects_bad_eps() {
        let env = TabularMdp::new(1, 1, vec![1.0], 0).unwrap();
        assert!(estimate_diameter(&env, 0.0, &DiameterConfig::default(), 0).is_err());
    }
}
