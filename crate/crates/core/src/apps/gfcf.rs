use crate::error::{Error, Result};
use crate::estimation::Counters;
use crate::mdp::{exact_ssp_values, greedy_policy, TabularMdp};
use crate::requirements::{gfcf_phi, GfcfParams};

/// Uniform per-pair requirement `⌈α·φ(D̂, ω)⌉` at empirical support `Γ̂`.
pub fn gfcf_requirements(params: &GfcfParams, gamma: usize, n_states: usize, n_actions: usize) -> Result<Vec<u64>> {
    check(params)?;
    let v = gfcf_phi(
        params.diameter,
        params.omega(),
        gamma.max(1) as f64,
        n_states,
        n_actions,
        params.eps,
        params.delta,
        params.alpha,
    )
    .ceil() as u64;
    Ok(vec![v; n_states * n_actions])
}

fn check(params: &GfcfParams) -> Result<()> {
    if params.c_min == 0.0 && params.theta.is_infinite() {
        return Err(Error::param("theta", "c_min = 0 requires a finite theta"));
    }
    if !(params.eps > 0.0 && params.eps <= 1.0) {
        return Err(Error::param("eps", format!("{} not in (0,1]", params.eps)));
    }
    Ok(())
}

/// The maximum-likelihood model. Unvisited pairs become self-loops.
pub fn empirical_mdp(counters: &Counters, start: usize) -> Result<TabularMdp> {
    let (n, a_n) = (counters.n_states(), counters.n_actions());
    let mut kernel = Vec::with_capacity(n * a_n * n);
    for s in 0..n {
        for a in 0..a_n {
            if counters.n(s, a) == 0 {
                kernel.extend((0..n).map(|j| f64::from(u8::from(j == s))));
            } else {
                kernel.extend(counters.empirical_row(s, a));
            }
        }
    }
    TabularMdp::new(n, a_n, kernel, start)
}

/// Greedy optimal policy of the empirical model for goal `goal` and
/// per-pair costs `costs`, after lifting costs to at least `ω`
/// (or adding `ε/(θD̂)` when `c_min = 0`).
pub fn gfcf_plan(counters: &Counters, goal: usize, costs: &[f64], params: &GfcfParams) -> Result<Vec<usize>> {
    check(params)?;
    let model = empirical_mdp(counters, 0)?;
    let shaped: Vec<f64> = if params.c_min == 0.0 {
        let bump = params.eps / (params.theta * params.diameter.max(f64::MIN_POSITIVE));
        costs.iter().map(|c| c + bump).collect()
    } else {
        let omega = params.omega();
        costs.iter().map(|c| c.max(omega)).collect()
    };
    let values = exact_ssp_values(&model, &[goal], &shaped)?;
    greedy_policy(&model, &values.0, &[goal], &shaped)
}
