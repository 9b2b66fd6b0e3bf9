//! Tabular MDPs, the environment zoo, and exact known-model solvers.

mod envs;
mod grid;
mod solve;

use rand::Rng;

use crate::error::{Error, Result};

pub use envs::{build_env, EnvSpec};
pub use grid::{bundled_layout, GridSpec, BUNDLED_LAYOUTS};
pub use solve::{
    check_communicating, default_costs, diameter, evaluate_policy, exact_ssp_values, greedy_policy, Diameter,
    ReachabilityReport,
};

/// Tolerance on row sums of a transition kernel.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// An immutable finite MDP without rewards.
///
/// The kernel is stored densely (`[s][a][s']`, row-major) together with a
/// sparse copy of every row, which the simulator and the exact solvers use.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    kernel: Vec<f64>,
    support: Vec<Vec<(usize, f64)>>,
    start: usize,
    state_costs: Option<Vec<f64>>,
    labels: Option<Vec<String>>,
}

impl TabularMdp {
    /// Builds an MDP from a dense `n_states * n_actions * n_states` kernel.
    pub fn new(n_states: usize, n_actions: usize, kernel: Vec<f64>, start: usize) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Validation(
                "an MDP needs at least one state and one action".into(),
            ));
        }
        if kernel.len() != n_states * n_actions * n_states {
            return Err(Error::Validation(format!(
                "kernel has {} entries, expected {}",
                kernel.len(),
                n_states * n_actions * n_states
            )));
        }
        if start >= n_states {
            return Err(Error::Validation(format!(
                "start state {start} out of range for {n_states} states"
            )));
        }
        let mut support = Vec::with_capacity(n_states * n_actions);
        for (idx, row) in kernel.chunks_exact(n_states).enumerate() {
            let (s, a) = (idx / n_actions, idx % n_actions);
            if let Some(bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::Validation(format!(
                    "kernel entry {bad} outside [0,1] in row (s={s}, a={a})"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Validation(format!(
                    "row (s={s}, a={a}) sums to {sum}, not 1"
                )));
            }
            support.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(j, &p)| (j, p))
                    .collect(),
            );
        }
        Ok(Self {
            n_states,
            n_actions,
            kernel,
            support,
            start,
            state_costs: None,
            labels: None,
        })
    }

    /// Builds an MDP from nested `[s][a][s']` rows.
    pub fn from_rows(rows: &[Vec<Vec<f64>>], start: usize) -> Result<Self> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        let mut kernel = Vec::with_capacity(n_states * n_actions * n_states);
        for (s, per_action) in rows.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(Error::Validation(format!(
                    "state {s} has {} actions, expected {n_actions}",
                    per_action.len()
                )));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::Validation(format!(
                        "row (s={s}, a={a}) has length {}, expected {n_states}",
                        row.len()
                    )));
                }
                kernel.extend_from_slice(row);
            }
        }
        Self::new(n_states, n_actions, kernel, start)
    }

    /// Attaches per-state SSP cost weights; every weight must lie in `[1, c̄]` for a finite `c̄`.
    pub fn with_state_costs(mut self, costs: Vec<f64>) -> Result<Self> {
        if costs.len() != self.n_states {
            return Err(Error::Validation(format!(
                "{} state costs for {} states",
                costs.len(),
                self.n_states
            )));
        }
        if let Some(c) = costs.iter().find(|c| !c.is_finite() || **c < 1.0) {
            return Err(Error::Validation(format!(
                "state cost {c} outside [1, c_max]"
            )));
        }
        self.state_costs = Some(costs);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_states {
            return Err(Error::Validation(format!(
                "{} labels for {} states",
                labels.len(),
                self.n_states
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_start(mut self, start: usize) -> Result<Self> {
        if start >= self.n_states {
            return Err(Error::Validation(format!(
                "start state {start} out of range for {} states",
                self.n_states
            )));
        }
        self.start = start;
        Ok(self)
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn start_state(&self) -> usize {
        self.start
    }

    pub fn state_costs(&self) -> Option<&[f64]> {
        self.state_costs.as_deref()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Dense next-state distribution of `(s, a)`.
    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let off = (s * self.n_actions + a) * self.n_states;
        &self.kernel[off..off + self.n_states]
    }

    /// Nonzero entries of the next-state distribution of `(s, a)`.
    #[inline]
    pub fn support(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.support[s * self.n_actions + a]
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.row(s, a)[next]
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// Draws a next state from `kernel(s, a, ·)`.
    ///
    /// Consumes exactly one uniform draw from `rng`, so a fixed seed and call
    /// sequence always yields the same trajectory.
    pub fn sample_step<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Result<usize> {
        if s >= self.n_states {
            return Err(Error::Index {
                what: "state",
                index: s,
                limit: self.n_states,
            });
        }
        if a >= self.n_actions {
            return Err(Error::Index {
                what: "action",
                index: a,
                limit: self.n_actions,
            });
        }
        Ok(self.step_unchecked(s, a, rng))
    }

    #[inline]
    pub(crate) fn step_unchecked<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let support = self.support(s, a);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(next, p) in support {
            acc += p;
            if u < acc {
                return next;
            }
        }
        // Rounding can leave `acc` a hair below 1.
        support.last().map(|&(next, _)| next).unwrap_or(s)
    }
}

/// Per-state expected cost-to-go; goal entries are exactly 0 and unreachable
/// entries carry `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ValueVector(pub Vec<f64>);

impl ValueVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Largest entry, `INFINITY` if any entry is infinite; 0 for an empty vector.
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Deref for ValueVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}
