//! Sampling requirements `b_t`, static and adaptive.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{check_delta, Counters};

/// Norm targeted by the model-estimation budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L1,
    Linf,
}

/// Requirement descriptor, as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RequirementSpec {
    /// `k` samples of every state-action pair.
    Treasure { k: u64 },
    /// Explicit per-pair matrix, rows = states.
    Static { matrix: Vec<Vec<u64>> },
    /// Per-pair matrix read from a CSV file (rows = states, columns = actions).
    Csv { path: PathBuf },
    /// Per-state totals: `s` is satisfied once `Σ_a N(s,a) ≥ b(s)`.
    StateOnly { counts: Vec<u64> },
    /// Integer requirements drawn uniformly from `[low, high]`.
    Random {
        low: u64,
        high: u64,
        seed: u64,
    },
    ModEst {
        eta: f64,
        delta: f64,
        #[serde(default = "default_norm")]
        norm: Norm,
        #[serde(default = "one")]
        scale: f64,
    },
    Gfcf(GfcfParams),
    RewardEst { eps: f64, delta: f64 },
}

fn default_norm() -> Norm {
    Norm::L1
}

fn one() -> f64 {
    1.0
}

fn default_theta() -> f64 {
    f64::INFINITY
}

/// Parameters of the goal-free cost-free allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GfcfParams {
    /// Diameter estimate `D̂`.
    pub diameter: f64,
    pub eps: f64,
    pub delta: f64,
    pub c_min: f64,
    /// Cost-perturbation level; `+∞` disables the perturbation.
    #[serde(default = "default_theta", with = "inf_as_null")]
    pub theta: f64,
    #[serde(default = "one")]
    pub alpha: f64,
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl GfcfParams {
    fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::param("eps", format!("{} not in (0,1]", self.eps)));
        }
        if !(self.diameter >= 0.0 && self.diameter.is_finite()) {
            return Err(Error::param("diameter", format!("{} invalid", self.diameter)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::param("alpha", format!("{} must be positive", self.alpha)));
        }
        if !(self.c_min >= 0.0) || !(self.theta > 0.0) {
            return Err(Error::param("c_min", "need c_min >= 0 and theta > 0"));
        }
        if self.c_min == 0.0 && self.theta.is_infinite() {
            return Err(Error::param(
                "theta",
                "c_min = 0 requires a finite theta (cost perturbation)",
            ));
        }
        Ok(())
    }

    /// `ω = max{c_min, ε/(θ D̂)}`.
    pub fn omega(&self) -> f64 {
        let pert = if self.theta.is_infinite() {
            0.0
        } else {
            self.eps / (self.theta * self.diameter.max(f64::MIN_POSITIVE))
        };
        self.c_min.max(pert)
    }
}

impl RequirementSpec {
    pub fn label(&self) -> String {
        match self {
            RequirementSpec::Treasure { k } => format!("treasure{k}"),
            RequirementSpec::Static { .. } => "static".into(),
            RequirementSpec::Csv { path } => format!("csv:{}", path.display()),
            RequirementSpec::StateOnly { .. } => "state_only".into(),
            RequirementSpec::Random { low, high, seed } => format!("random{low}-{high}-s{seed}"),
            RequirementSpec::ModEst { eta, norm, .. } => format!("modest-{norm:?}-eta{eta}").to_lowercase(),
            RequirementSpec::Gfcf(p) => format!("gfcf-eps{}", p.eps),
            RequirementSpec::RewardEst { eps, .. } => format!("reward_est-eps{eps}"),
        }
    }
}

/// Whether a requirement counts per pair or per state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Pair,
    State,
}

#[derive(Debug, Clone)]
enum Rule {
    Fixed,
    ModEst {
        eta: f64,
        delta: f64,
        norm: Norm,
        scale: f64,
    },
    Gfcf(GfcfParams),
}

/// A (possibly adaptive) requirement `b_t` with a cached view of which states
/// are still under-sampled.
///
/// Call [`RequirementSchedule::sync`] once on the counters a run starts from
/// and [`RequirementSchedule::observe`] after every recorded transition.
#[derive(Debug, Clone)]
pub struct RequirementSchedule {
    n_states: usize,
    n_actions: usize,
    scope: Scope,
    b: Vec<u64>,
    envelope: Vec<u64>,
    rule: Rule,
    unmet_pairs: Vec<u32>,
    unmet_states: usize,
    gamma: usize,
}

/// Model-estimation budget
/// `⌈57 X²/η² ln²(8e X² √(2SA)/(√δ η)) + 24 Y/η ln(24 Y S A/(δ η))⌉`.
///
/// Log arguments are clamped to at least 1, which keeps the budget monotone in
/// `X` when `X` is small.
pub fn modest_phi(x: f64, y: f64, n_states: usize, n_actions: usize, eta: f64, delta: f64) -> f64 {
    let sa = (n_states * n_actions) as f64;
    let l1 = (8.0 * std::f64::consts::E * x * x * (2.0 * sa).sqrt() / (delta.sqrt() * eta))
        .max(1.0)
        .ln();
    let l2 = (24.0 * y * sa / (delta * eta)).max(1.0).ln();
    57.0 * x * x / (eta * eta) * l1 * l1 + 24.0 * y / eta * l2
}

/// `(X, Y)` of one pair under `norm`, from the empirical standard deviations.
fn modest_xy(sigma: impl Iterator<Item = f64>, norm: Norm, n_states: usize) -> (f64, f64) {
    match norm {
        Norm::L1 => (sigma.sum(), n_states as f64),
        Norm::Linf => (sigma.fold(0.0, f64::max), 1.0),
    }
}

/// Per-pair model-estimation budget at the current empirical variances.
pub fn modest_budget(
    counters: &Counters,
    s: usize,
    a: usize,
    eta: f64,
    delta: f64,
    norm: Norm,
    scale: f64,
) -> u64 {
    let n = counters.n(s, a);
    let sigma = counters.next_counts(s, a).iter().map(move |&c| {
        if n == 0 {
            0.0
        } else {
            let p = c as f64 / n as f64;
            (p * (1.0 - p)).sqrt()
        }
    });
    let (x, y) = modest_xy(sigma, norm, counters.n_states());
    (scale * modest_phi(x, y, counters.n_states(), counters.n_actions(), eta, delta)).ceil() as u64
}

/// Goal-free cost-free allocation `α·φ(X, y)` with
/// `φ = X³Γ/(yε²) ln(XSA/(yεδ)) + X²S/(yε) ln(XSA/(yεδ)) + X²Γ/y² ln²(XSA/(yδ))`.
pub fn gfcf_phi(
    x: f64,
    y: f64,
    gamma: f64,
    n_states: usize,
    n_actions: usize,
    eps: f64,
    delta: f64,
    alpha: f64,
) -> f64 {
    let sa = (n_states * n_actions) as f64;
    let la = (x * sa / (y * eps * delta)).max(1.0).ln();
    let lb = (x * sa / (y * delta)).max(1.0).ln();
    alpha
        * (x.powi(3) * gamma / (y * eps * eps) * la
            + x * x * n_states as f64 / (y * eps) * la
            + x * x * gamma / (y * y) * lb * lb)
}

/// `⌈ln(2SA/δ)/(2ε²)⌉` samples per pair for ε-accurate mean rewards.
pub fn reward_estimation_count(n_states: usize, n_actions: usize, eps: f64, delta: f64) -> Result<u64> {
    check_delta(delta)?;
    if !(eps > 0.0) {
        return Err(Error::param("eps", format!("{eps} must be positive")));
    }
    Ok(((2.0 * (n_states * n_actions) as f64 / delta).ln() / (2.0 * eps * eps)).ceil() as u64)
}

fn read_csv_matrix(path: &PathBuf) -> Result<Vec<Vec<u64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.clone(), e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|x| {
                    x.trim().parse::<u64>().map_err(|_| {
                        Error::Config(format!("{}: bad requirement entry `{x}`", path.display()))
                    })
                })
                .collect()
        })
        .collect()
}

/// Builds the schedule described by `spec` for an `n_states × n_actions` MDP.
pub fn make_requirement(spec: &RequirementSpec, n_states: usize, n_actions: usize) -> Result<RequirementSchedule> {
    let pairs = n_states * n_actions;
    let from_matrix = |m: &[Vec<u64>]| -> Result<Vec<u64>> {
        if m.len() != n_states || m.iter().any(|r| r.len() != n_actions) {
            return Err(Error::Validation(format!(
                "requirement matrix must be {n_states} x {n_actions}"
            )));
        }
        Ok(m.iter().flatten().copied().collect())
    };
    let (scope, b, rule) = match spec {
        RequirementSpec::Treasure { k } => (Scope::Pair, vec![*k; pairs], Rule::Fixed),
        RequirementSpec::Static { matrix } => (Scope::Pair, from_matrix(matrix)?, Rule::Fixed),
        RequirementSpec::Csv { path } => (Scope::Pair, from_matrix(&read_csv_matrix(path)?)?, Rule::Fixed),
        RequirementSpec::StateOnly { counts } => {
            if counts.len() != n_states {
                return Err(Error::Validation(format!(
                    "{} state requirements for {n_states} states",
                    counts.len()
                )));
            }
            (Scope::State, counts.clone(), Rule::Fixed)
        }
        RequirementSpec::Random { low, high, seed } => {
            if low > high {
                return Err(Error::param("low", format!("{low} > {high}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let b = (0..pairs).map(|_| rng.gen_range(*low..=*high)).collect();
            (Scope::Pair, b, Rule::Fixed)
        }
        RequirementSpec::ModEst {
            eta,
            delta,
            norm,
            scale,
        } => {
            check_delta(*delta)?;
            if !(*eta > 0.0) {
                return Err(Error::param("eta", format!("{eta} must be positive")));
            }
            if !(*scale > 0.0) {
                return Err(Error::param("scale", format!("{scale} must be positive")));
            }
            let rule = Rule::ModEst {
                eta: *eta,
                delta: *delta,
                norm: *norm,
                scale: *scale,
            };
            (Scope::Pair, vec![0; pairs], rule)
        }
        RequirementSpec::Gfcf(p) => {
            p.validate()?;
            (Scope::Pair, vec![0; pairs], Rule::Gfcf(*p))
        }
        RequirementSpec::RewardEst { eps, delta } => {
            let k = reward_estimation_count(n_states, n_actions, *eps, *delta)?;
            (Scope::Pair, vec![k; pairs], Rule::Fixed)
        }
    };
    let mut schedule = RequirementSchedule {
        n_states,
        n_actions,
        scope,
        envelope: b.clone(),
        b,
        rule,
        unmet_pairs: vec![0; n_states],
        unmet_states: 0,
        gamma: 1,
    };
    schedule.envelope = schedule.compute_envelope();
    schedule.sync(&Counters::new(n_states, n_actions));
    Ok(schedule)
}

impl RequirementSchedule {
    /// A fixed per-pair requirement from a flat `S·A` table.
    pub fn per_pair(n_states: usize, n_actions: usize, b: Vec<u64>) -> Result<Self> {
        let m: Vec<Vec<u64>> = b.chunks(n_actions.max(1)).map(|c| c.to_vec()).collect();
        if b.len() != n_states * n_actions {
            return Err(Error::Validation(format!(
                "{} requirements for {} pairs",
                b.len(),
                n_states * n_actions
            )));
        }
        make_requirement(&RequirementSpec::Static { matrix: m }, n_states, n_actions)
    }

    pub fn per_state(n_states: usize, n_actions: usize, b: Vec<u64>) -> Result<Self> {
        make_requirement(&RequirementSpec::StateOnly { counts: b }, n_states, n_actions)
    }

    fn compute_envelope(&self) -> Vec<u64> {
        match self.rule {
            Rule::Fixed => self.b.clone(),
            Rule::ModEst {
                eta,
                delta,
                norm,
                scale,
            } => {
                let (x, y) = match norm {
                    Norm::L1 => (self.n_states as f64 / 2.0, self.n_states as f64),
                    Norm::Linf => (0.5, 1.0),
                };
                let top = (scale * modest_phi(x, y, self.n_states, self.n_actions, eta, delta)).ceil() as u64;
                vec![top; self.b.len()]
            }
            Rule::Gfcf(p) => {
                let top = self.gfcf_value(p, self.n_states);
                vec![top; self.b.len()]
            }
        }
    }

    fn gfcf_value(&self, p: GfcfParams, gamma: usize) -> u64 {
        gfcf_phi(
            p.diameter,
            p.omega(),
            gamma.max(1) as f64,
            self.n_states,
            self.n_actions,
            p.eps,
            p.delta,
            p.alpha,
        )
        .ceil() as u64
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Current requirement table (`S·A` entries for pair scope, `S` for state scope).
    pub fn table(&self) -> &[u64] {
        &self.b
    }

    /// Upper envelope `b̄` of the table over all times.
    pub fn envelope(&self) -> &[u64] {
        &self.envelope
    }

    /// `B = Σ b`.
    pub fn total(&self) -> u64 {
        self.b.iter().sum()
    }

    pub fn is_adaptive(&self) -> bool {
        !matches!(self.rule, Rule::Fixed)
    }

    /// Current accuracy of a model-estimation schedule.
    pub fn eta(&self) -> Option<f64> {
        match self.rule {
            Rule::ModEst { eta, .. } => Some(eta),
            _ => None,
        }
    }

    /// Changes the accuracy of a model-estimation schedule and resynchronizes.
    pub fn set_eta(&mut self, new_eta: f64, counters: &Counters) -> Result<()> {
        if !(new_eta > 0.0) {
            return Err(Error::param("eta", format!("{new_eta} must be positive")));
        }
        match &mut self.rule {
            Rule::ModEst { eta, .. } => *eta = new_eta,
            _ => return Err(Error::Config("set_eta on a non-adaptive schedule".into())),
        }
        self.envelope = self.compute_envelope();
        self.sync(counters);
        Ok(())
    }

    /// Adds `extra` samples to the requirement of state `s` (state scope only).
    pub fn add_state_requirement(&mut self, s: usize, extra: u64, counters: &Counters) -> Result<()> {
        if self.scope != Scope::State {
            return Err(Error::Config("add_state_requirement needs a state-scope schedule".into()));
        }
        self.b[s] += extra;
        self.envelope[s] = self.envelope[s].max(self.b[s]);
        self.refresh_state(counters, s);
        Ok(())
    }

    /// Recomputes every entry and the under-sampled cache from `counters`.
    pub fn sync(&mut self, counters: &Counters) {
        if let Rule::Gfcf(_) = self.rule {
            self.gamma = 1;
            for s in 0..self.n_states {
                for a in 0..self.n_actions {
                    self.gamma = self.gamma.max(support_size(counters, s, a));
                }
            }
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                self.update_entry(counters, s, a);
            }
        }
        self.unmet_states = 0;
        for s in 0..self.n_states {
            self.unmet_pairs[s] = 0;
            self.refresh_state(counters, s);
        }
    }

    fn update_entry(&mut self, counters: &Counters, s: usize, a: usize) {
        let idx = s * self.n_actions + a;
        match self.rule {
            Rule::Fixed => {}
            Rule::ModEst {
                eta,
                delta,
                norm,
                scale,
            } => self.b[idx] = modest_budget(counters, s, a, eta, delta, norm, scale),
            Rule::Gfcf(p) => self.b[idx] = self.gfcf_value(p, self.gamma),
        }
    }

    fn refresh_state(&mut self, counters: &Counters, s: usize) {
        let before = self.unmet_pairs[s] > 0;
        self.unmet_pairs[s] = match self.scope {
            Scope::Pair => (0..self.n_actions)
                .filter(|&a| counters.n(s, a) < self.b[s * self.n_actions + a])
                .count() as u32,
            Scope::State => u32::from(counters.n_state(s) < self.b[s]),
        };
        let after = self.unmet_pairs[s] > 0;
        match (before, after) {
            (false, true) => self.unmet_states += 1,
            (true, false) => self.unmet_states -= 1,
            _ => {}
        }
    }

    /// Updates the schedule after a transition from `(s, a)` was recorded.
    pub fn observe(&mut self, counters: &Counters, s: usize, a: usize) {
        if let Rule::Gfcf(_) = self.rule {
            let k = support_size(counters, s, a);
            if k > self.gamma {
                self.gamma = k;
                let v = self.gfcf_value(match self.rule {
                    Rule::Gfcf(p) => p,
                    _ => unreachable!(),
                }, k);
                self.b.iter_mut().for_each(|x| *x = v);
                self.unmet_states = 0;
                for t in 0..self.n_states {
                    self.unmet_pairs[t] = 0;
                    self.refresh_state(counters, t);
                }
                return;
            }
        }
        self.update_entry(counters, s, a);
        self.refresh_state(counters, s);
    }

    pub fn all_met(&self) -> bool {
        self.unmet_states == 0
    }

    pub fn unmet_state_count(&self) -> usize {
        self.unmet_states
    }

    #[inline]
    pub fn is_under_sampled(&self, s: usize) -> bool {
        self.unmet_pairs[s] > 0
    }

    pub fn under_sampled_states(&self) -> Vec<usize> {
        (0..self.n_states).filter(|&s| self.is_under_sampled(s)).collect()
    }

    /// Whether `counters` meets every requirement, recomputed from scratch.
    pub fn satisfied_by(&self, counters: &Counters) -> bool {
        (0..self.n_states).all(|s| match self.scope {
            Scope::Pair => (0..self.n_actions).all(|a| counters.n(s, a) >= self.b[s * self.n_actions + a]),
            Scope::State => counters.n_state(s) >= self.b[s],
        })
    }

    /// `b(s,a)` for pair scope; for state scope, the state total `b(s)`.
    pub fn requirement(&self, s: usize, a: usize) -> u64 {
        match self.scope {
            Scope::Pair => self.b[s * self.n_actions + a],
            Scope::State => self.b[s],
        }
    }

    /// `Σ_a max{b(s,a) − N(s,a), 0}` (state scope: `max{b(s) − N(s), 0}`).
    pub fn remaining_budget(&self, counters: &Counters, s: usize) -> u64 {
        match self.scope {
            Scope::Pair => (0..self.n_actions)
                .map(|a| self.b[s * self.n_actions + a].saturating_sub(counters.n(s, a)))
                .sum(),
            Scope::State => self.b[s].saturating_sub(counters.n_state(s)),
        }
    }

    /// The action to execute at an under-sampled state: the largest gap
    /// `b − N` for pair scope, the least-sampled action for state scope.
    /// Ties go to the lowest action.
    pub fn under_sampled_action(&self, counters: &Counters, s: usize) -> usize {
        let mut best = (0usize, i128::MIN);
        for a in 0..self.n_actions {
            let score = match self.scope {
                Scope::Pair => self.b[s * self.n_actions + a] as i128 - counters.n(s, a) as i128,
                Scope::State => -(counters.n(s, a) as i128),
            };
            if score > best.1 {
                best = (a, score);
            }
        }
        best.0
    }

    /// Fraction of states whose requirements are all met.
    pub fn proportion_met(&self) -> f64 {
        (self.n_states - self.unmet_states) as f64 / self.n_states as f64
    }
}

fn support_size(counters: &Counters, s: usize, a: usize) -> usize {
    counters.next_counts(s, a).iter().filter(|&&c| c > 0).count()
}
