use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AttemptRecord, MetricPoint, RunContext, RunTrace};
use crate::error::Result;
use crate::estimation::{ConfidenceModel, Counters};
use crate::mdp::TabularMdp;
use crate::metrics::model_error;
use crate::requirements::RequirementSchedule;

const ENV_STREAM: u64 = 0;
const AGENT_STREAM: u64 = 1;

/// Interaction state of one run: environment position, counters, the
/// confidence model, the requirement schedule and the metric log.
///
/// A session can be handed to several agents or drivers in turn; they all
/// continue the same trajectory.
pub struct Session<'a> {
    env: &'a TabularMdp,
    pub(crate) counters: Counters,
    pub(crate) model: ConfidenceModel,
    known: bool,
    pub(crate) schedule: RequirementSchedule,
    state: usize,
    env_rng: ChaCha8Rng,
    pub(crate) agent_rng: ChaCha8Rng,
    ctx: RunContext,
    step_cap: u64,
    seed: u64,
    series: Vec<MetricPoint>,
    last_logged: u64,
    attempts: Vec<AttemptRecord>,
    open_attempt: Option<(u64, usize)>,
    halvings: u32,
    pub(crate) discarded: Option<Vec<usize>>,
}

impl<'a> Session<'a> {
    pub fn new(
        env: &'a TabularMdp,
        mut schedule: RequirementSchedule,
        ctx: RunContext,
        seed: u64,
        known_dynamics: bool,
    ) -> Result<Self> {
        let counters = Counters::for_mdp(env);
        let model = if known_dynamics {
            ConfidenceModel::known(env)
        } else {
            ConfidenceModel::from_counters(&counters, ctx.delta, ctx.alpha_p)?
        };
        schedule.sync(&counters);
        let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
        env_rng.set_stream(ENV_STREAM);
        let mut agent_rng = ChaCha8Rng::seed_from_u64(seed);
        agent_rng.set_stream(AGENT_STREAM);
        let step_cap = ctx.resolved_step_cap(env, &schedule);
        let mut s = Self {
            env,
            counters,
            model,
            known: known_dynamics,
            schedule,
            state: env.start_state(),
            env_rng,
            agent_rng,
            ctx,
            step_cap,
            seed,
            series: Vec::new(),
            last_logged: 0,
            attempts: Vec::new(),
            open_attempt: None,
            halvings: 0,
            discarded: None,
        };
        s.log_point();
        Ok(s)
    }

    pub fn env(&self) -> &'a TabularMdp {
        self.env
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn t(&self) -> u64 {
        self.counters.t()
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn model(&self) -> &ConfidenceModel {
        &self.model
    }

    pub fn schedule(&self) -> &RequirementSchedule {
        &self.schedule
    }

    pub fn context(&self) -> &RunContext {
        &self.ctx
    }

    pub fn step_cap(&self) -> u64 {
        self.step_cap
    }

    pub fn set_step_cap(&mut self, cap: u64) {
        self.step_cap = cap;
    }

    pub fn is_known_dynamics(&self) -> bool {
        self.known
    }

    /// Swaps in a new requirement schedule, synchronized to the current counters.
    pub fn replace_schedule(&mut self, mut schedule: RequirementSchedule) {
        schedule.sync(&self.counters);
        self.schedule = schedule;
    }

    /// Executes `a` in the current state and returns the next state.
    pub fn step(&mut self, a: usize) -> usize {
        let s = self.state;
        let next = self.env.step_unchecked(s, a, &mut self.env_rng);
        self.counters.record_unchecked(s, a, next);
        if !self.known {
            self.model.update_pair(&self.counters, s, a);
        }
        self.schedule.observe(&self.counters, s, a);
        self.state = next;
        if self.t() % self.ctx.log_every.max(1) == 0 {
            self.log_point();
        }
        next
    }

    fn log_point(&mut self) {
        let t = self.t();
        if t == self.last_logged && !self.series.is_empty() {
            return;
        }
        let e_t = self
            .ctx
            .track_model_error
            .then(|| model_error(&self.counters, self.env));
        self.series.push(MetricPoint {
            t,
            p_t: self.schedule.proportion_met(),
            e_t,
            visits: t - self.last_logged,
        });
        self.last_logged = t;
    }

    pub fn capped(&self) -> bool {
        self.t() >= self.step_cap
    }

    /// Whether the run should stop. With accuracy halving enabled, meeting a
    /// model-estimation budget halves `η` instead of stopping.
    pub fn finished(&mut self) -> bool {
        while self.schedule.all_met() {
            match self.schedule.eta() {
                Some(eta) if self.ctx.eta_halving && !self.capped() => {
                    self.schedule
                        .set_eta(eta / 2.0, &self.counters)
                        .expect("halving a positive accuracy");
                    self.halvings += 1;
                }
                _ => return true,
            }
        }
        self.capped()
    }

    /// Starts an attempt or episode: freezes `U ← N` and opens a log record.
    pub fn begin_attempt(&mut self, goals: usize) {
        self.close_attempt(false);
        self.counters.begin_attempt();
        self.open_attempt = Some((self.t(), goals));
    }

    pub fn end_attempt(&mut self, success: bool) {
        self.close_attempt(success);
    }

    fn close_attempt(&mut self, success: bool) {
        if let Some((start, goals)) = self.open_attempt.take() {
            self.attempts.push(AttemptRecord {
                start,
                goals,
                length: self.t() - start,
                success,
            });
        }
    }

    pub fn into_trace(mut self, algo: &str) -> RunTrace {
        self.close_attempt(false);
        self.log_point();
        let stopped = self.schedule.all_met() || self.discarded.is_some();
        let tau = stopped.then(|| self.t());
        RunTrace {
            seed: self.seed,
            algo: algo.to_string(),
            tau,
            steps: self.t(),
            attempts: self.attempts,
            series: self.series,
            counters: self.counters,
            discarded: self.discarded,
            halvings: self.halvings,
        }
    }
}
