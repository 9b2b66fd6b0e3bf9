use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{bundled_layout, GridSpec};
use super::TabularMdp;
use crate::error::{Error, Result};

/// Probability mass every garnet row sends to the anchor state.
pub const GARNET_ANCHOR_MASS: f64 = 0.001;

/// Environment descriptor, as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    /// Reward-free RiverSwim chain; action 0 swims left, action 1 swims right.
    Riverswim { n: usize },
    /// Gridworld from a bundled layout name, a layout file, or inline text.
    Gridworld {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layout: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
        #[serde(default = "default_fail_prob")]
        fail_prob: f64,
        #[serde(default = "default_trap_cost")]
        trap_cost: f64,
    },
    /// Random garnet `G(S, A, β)` with anchor mixing onto state 0.
    Garnet {
        states: usize,
        actions: usize,
        branching: usize,
        seed: u64,
    },
    /// Hub-and-spokes lower-bound construction: hub 0 with one action per spoke.
    Wheel {
        spokes: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<Vec<f64>>,
    },
    /// Three-state domain; its diameter is `1/ν` for small `ν`.
    ThreeStateToy { nu: f64 },
    /// Two-state chain `x → y` w.p. `q`, `y → x` w.p. 1.
    TwoState { q: f64 },
    Explicit {
        kernel: Vec<Vec<Vec<f64>>>,
        #[serde(default)]
        start: usize,
    },
}

fn default_fail_prob() -> f64 {
    0.1
}

fn default_trap_cost() -> f64 {
    10.0
}

impl EnvSpec {
    /// Short human-readable name used in result files.
    pub fn label(&self) -> String {
        match self {
            EnvSpec::Riverswim { n } => format!("riverswim{n}"),
            EnvSpec::Gridworld {
                layout, path, text, ..
            } => match (layout, path, text) {
                (Some(name), _, _) => name.clone(),
                (None, Some(p), _) => p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "gridworld".into()),
                _ => "gridworld".into(),
            },
            EnvSpec::Garnet {
                states,
                actions,
                branching,
                seed,
            } => format!("garnet{states}-{actions}-{branching}-s{seed}"),
            EnvSpec::Wheel { spokes, .. } => format!("wheel{spokes}"),
            EnvSpec::ThreeStateToy { nu } => format!("toy-nu{nu}"),
            EnvSpec::TwoState { q } => format!("two-state-q{q}"),
            EnvSpec::Explicit { kernel, .. } => format!("explicit{}", kernel.len()),
        }
    }
}

/// Parses either a JSON descriptor or the compact `kind:args` form, e.g.
/// `riverswim:6`, `grid:corridor24`, `gridfile:maze.txt`, `garnet:10,5,5,42`,
/// `wheel:4` or `wheel:4,0.5`, `toy:0.1`, `two_state:0.2`.
impl FromStr for EnvSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s)
                .map_err(|e| Error::Config(format!("bad environment descriptor: {e}")));
        }
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = |n: usize| -> Result<Vec<f64>> {
            let v = args
                .split(',')
                .filter(|x| !x.trim().is_empty())
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad number `{x}` in `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if v.len() < n {
                return Err(Error::Config(format!(
                    "`{s}`: expected at least {n} arguments"
                )));
            }
            Ok(v)
        };
        Ok(match kind {
            "riverswim" => EnvSpec::Riverswim {
                n: nums(1)?[0] as usize,
            },
            "grid" | "gridworld" => EnvSpec::Gridworld {
                layout: Some(args.to_string()),
                path: None,
                text: None,
                fail_prob: default_fail_prob(),
                trap_cost: default_trap_cost(),
            },
            "gridfile" => EnvSpec::Gridworld {
                layout: None,
                path: Some(PathBuf::from(args)),
                text: None,
                fail_prob: default_fail_prob(),
                trap_cost: default_trap_cost(),
            },
            "garnet" => {
                let v = nums(4)?;
                EnvSpec::Garnet {
                    states: v[0] as usize,
                    actions: v[1] as usize,
                    branching: v[2] as usize,
                    seed: v[3] as u64,
                }
            }
            "wheel" => {
                let v = nums(1)?;
                EnvSpec::Wheel {
                    spokes: v[0] as usize,
                    eps: (v.len() > 1).then(|| vec![v[1]; v[0] as usize]),
                }
            }
            "toy" | "three_state_toy" => EnvSpec::ThreeStateToy { nu: nums(1)?[0] },
            "two_state" => EnvSpec::TwoState { q: nums(1)?[0] },
            other => return Err(Error::Config(format!("unknown environment kind `{other}`"))),
        })
    }
}

/// Builds the MDP described by `spec`.
pub fn build_env(spec: &EnvSpec) -> Result<TabularMdp> {
    match spec {
        EnvSpec::Riverswim { n } => riverswim(*n),
        EnvSpec::Gridworld {
            layout,
            path,
            text,
            fail_prob,
            trap_cost,
        } => {
            let source = match (layout, path, text) {
                (Some(name), None, None) => bundled_layout(name)
                    .ok_or_else(|| Error::Config(format!("unknown bundled layout `{name}`")))?
                    .to_string(),
                (None, Some(p), None) => {
                    std::fs::read_to_string(p).map_err(|e| Error::io(p.clone(), e))?
                }
                (None, None, Some(t)) => t.clone(),
                _ => {
                    return Err(Error::Config(
                        "gridworld needs exactly one of `layout`, `path`, `text`".into(),
                    ))
                }
            };
            let mut grid = GridSpec::parse(&source)?;
            grid.fail_prob = *fail_prob;
            grid.trap_cost = *trap_cost;
            grid.to_mdp()
        }
        EnvSpec::Garnet {
            states,
            actions,
            branching,
            seed,
        } => garnet(*states, *actions, *branching, *seed),
        EnvSpec::Wheel { spokes, eps } => {
            let eps = eps.clone().unwrap_or_else(|| vec![0.5; *spokes]);
            wheel(*spokes, &eps)
        }
        EnvSpec::ThreeStateToy { nu } => three_state_toy(*nu),
        EnvSpec::TwoState { q } => two_state(*q),
        EnvSpec::Explicit { kernel, start } => TabularMdp::from_rows(kernel, *start),
    }
}

fn riverswim(n: usize) -> Result<TabularMdp> {
    if n < 2 {
        return Err(Error::param("n", "riverswim needs at least 2 states"));
    }
    let mut k = vec![0.0; n * 2 * n];
    let idx = |s: usize, a: usize, t: usize| (s * 2 + a) * n + t;
    for s in 0..n {
        k[idx(s, 0, s.saturating_sub(1))] = 1.0;
        if s == 0 {
            k[idx(s, 1, 0)] = 0.4;
            k[idx(s, 1, 1)] = 0.6;
        } else if s == n - 1 {
            k[idx(s, 1, s - 1)] = 0.4;
            k[idx(s, 1, s)] = 0.6;
        } else {
            k[idx(s, 1, s - 1)] = 0.05;
            k[idx(s, 1, s)] = 0.6;
            k[idx(s, 1, s + 1)] = 0.35;
        }
    }
    let labels = (1..=n).map(|i| format!("s{i}")).collect();
    TabularMdp::new(n, 2, k, 0)?.with_labels(labels)
}

fn garnet(states: usize, actions: usize, branching: usize, seed: u64) -> Result<TabularMdp> {
    if states == 0 || actions == 0 {
        return Err(Error::param("states", "garnet needs S >= 1 and A >= 1"));
    }
    if branching == 0 || branching > states {
        return Err(Error::param(
            "branching",
            format!("need 1 <= β <= S, got β = {branching}, S = {states}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = vec![0.0; states * actions * states];
    for row in k.chunks_exact_mut(states) {
        let targets = sample(&mut rng, states, branching);
        // uniform on (0, 1]
        let weights: Vec<f64> = (0..branching).map(|_| 1.0 - rng.gen::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        for (t, w) in targets.iter().zip(&weights) {
            row[t] = (1.0 - GARNET_ANCHOR_MASS) * w / total;
        }
        row[0] += GARNET_ANCHOR_MASS;
        renormalize(row);
    }
    TabularMdp::new(states, actions, k, 0)
}

fn wheel(spokes: usize, eps: &[f64]) -> Result<TabularMdp> {
    if spokes == 0 {
        return Err(Error::param("spokes", "wheel needs at least one spoke"));
    }
    if eps.len() != spokes {
        return Err(Error::param(
            "eps",
            format!("{} values for {spokes} spokes", eps.len()),
        ));
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Error::param("eps", format!("{e} not in (0,1)")));
    }
    let n = spokes + 1;
    let a_n = spokes;
    let mut k = vec![0.0; n * a_n * n];
    let idx = |s: usize, a: usize, t: usize| (s * a_n + a) * n + t;
    for (i, &e) in eps.iter().enumerate() {
        k[idx(0, i, i + 1)] = e;
        k[idx(0, i, 0)] = 1.0 - e;
    }
    for s in 1..n {
        for a in 0..a_n {
            k[idx(s, a, 0)] = 1.0;
        }
    }
    TabularMdp::new(n, a_n, k, 0)
}

fn three_state_toy(nu: f64) -> Result<TabularMdp> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::param("nu", format!("{nu} not in (0,1)")));
    }
    // s0 and s1 have a single real action, mirrored onto a1.
    let rows = vec![
        vec![vec![0.0, nu, 1.0 - nu], vec![0.0, nu, 1.0 - nu]],
        vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]],
        vec![vec![1.0 - nu, nu, 0.0], vec![0.0, 0.0, 1.0]],
    ];
    TabularMdp::from_rows(&rows, 0)?.with_labels(vec!["s0".into(), "s1".into(), "s2".into()])
}

fn two_state(q: f64) -> Result<TabularMdp> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param("q", format!("{q} not in (0,1)")));
    }
    TabularMdp::new(2, 1, vec![1.0 - q, q, 1.0, 0.0], 0)
}

fn renormalize(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= total);
}
