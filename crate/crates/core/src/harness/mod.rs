//! Experiment orchestration: configs, seed fans, result files.

mod config;
mod results;
mod stats;

pub use config::{AlgorithmSpec, ExperimentConfig};
pub use results::{read_runs_csv, summarize_rows, write_results, CsvRow, TauSummary, RUNS_HEADER};
pub use stats::{mean, quantile, std_dev};

use rayon::prelude::*;
use serde::Serialize;

use crate::agent::{AgentRegistry, RunContext, RunTrace};
use crate::error::{Error, Result};
use crate::mdp::build_env;
use crate::requirements::make_requirement;

/// Environment variable that shifts every seed of an experiment.
pub const SEED_OFFSET_VAR: &str = "GOSPRL_SEED_OFFSET";

/// Reads [`SEED_OFFSET_VAR`]; unset means 0.
pub fn seed_offset_from_env() -> Result<u64> {
    match std::env::var(SEED_OFFSET_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_OFFSET_VAR}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
    pub seed_offset: u64,
}

/// All traces of one experiment, ordered by algorithm then seed.
#[derive(Debug, Clone, Serialize)]
pub struct ResultSet {
    pub config: ExperimentConfig,
    pub env: String,
    pub requirement: String,
    pub traces: Vec<RunTrace>,
}

impl ResultSet {
    pub fn empty(config: ExperimentConfig) -> Self {
        Self {
            env: config.environment.label(),
            requirement: config.requirement.label(),
            config,
            traces: Vec::new(),
        }
    }

    pub fn traces_for<'a>(&'a self, algo: &'a str) -> impl Iterator<Item = &'a RunTrace> + 'a {
        self.traces.iter().filter(move |t| t.algo == algo)
    }
}

/// Runs every (algorithm, seed) cell. Ids and descriptors are checked
/// before anything runs.
pub fn run_experiment(cfg: &ExperimentConfig, registry: &AgentRegistry, opts: RunOptions) -> Result<ResultSet> {
    cfg.validate(registry)?;
    let env = build_env(&cfg.environment)?;
    let schedule = make_requirement(&cfg.requirement, env.n_states(), env.n_actions())?;
    let agents = cfg
        .algorithms
        .iter()
        .map(|spec| registry.create(&spec.id, &spec.params).map(|a| (spec.id.clone(), a)))
        .collect::<Result<Vec<_>>>()?;
    let ctx = RunContext {
        delta: cfg.delta,
        alpha_p: cfg.alpha_p,
        step_cap: cfg.step_cap,
        log_every: cfg.log_every,
        track_model_error: cfg.track_model_error,
        eta_halving: cfg.eta_halving,
    };
    let cells: Vec<(usize, u64)> = (0..agents.len())
        .flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let run_cell = |&(i, seed): &(usize, u64)| -> Result<RunTrace> {
        let (id, agent) = &agents[i];
        let mut trace = agent.run(&env, schedule.clone(), &ctx, seed.wrapping_add(opts.seed_offset))?;
        trace.algo = id.clone();
        Ok(trace)
    };
    let traces = match opts.workers {
        Some(1) => cells.iter().map(run_cell).collect::<Result<Vec<_>>>()?,
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?
            .install(|| cells.par_iter().map(run_cell).collect::<Result<Vec<_>>>())?,
        None => cells.par_iter().map(run_cell).collect::<Result<Vec<_>>>()?,
    };
    Ok(ResultSet {
        traces,
        ..ResultSet::empty(cfg.clone())
    })
}
