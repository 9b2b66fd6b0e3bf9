use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gosprl::agent::AgentRegistry;
use gosprl::apps::{estimate_diameter, DiameterConfig};
use gosprl::harness::{read_runs_csv, run_experiment, seed_offset_from_env, summarize_rows, write_results, ExperimentConfig, RunOptions};
use gosprl::mdp::{build_env, check_communicating, diameter, EnvSpec};

#[derive(Parser)]
#[command(name = "gosprl", version, about = "Goal-based sample collection in tabular MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write runs.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output` field.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Estimate the diameter online and compare with the exact value.
    Diameter {
        #[arg(long)]
        env: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiplier on the model-estimation budgets (1 = theoretical).
        #[arg(long, default_value_t = 1.0)]
        budget_scale: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 10_000_000)]
        step_cap: u64,
    },
    /// Print S, A, the diameter and the per-target diameters.
    EnvInfo {
        #[arg(long)]
        env: String,
    },
    /// Recompute stopping-time statistics from a runs.csv file.
    Metrics {
        #[arg(long)]
        csv: PathBuf,
    },
}

fn parse_env(text: &str) -> Result<EnvSpec> {
    text.parse().with_context(|| format!("environment `{text}`"))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, out, workers } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let Some(out) = out.or_else(|| cfg.output.clone()) else {
                bail!("no output directory: pass --out or set `output` in the config");
            };
            let opts = RunOptions {
                workers,
                seed_offset: seed_offset_from_env()?,
            };
            let rs = run_experiment(&cfg, &AgentRegistry::default(), opts)?;
            write_results(&rs, &out)?;
            let capped = rs.traces.iter().filter(|t| t.capped()).count();
            println!("{} runs ({capped} capped) -> {}", rs.traces.len(), out.display());
        }
        Command::Diameter {
            env,
            eps,
            seed,
            budget_scale,
            delta,
            step_cap,
        } => {
            let mdp = build_env(&parse_env(&env)?)?;
            let cfg = DiameterConfig {
                budget_scale,
                delta,
                step_cap,
                ..DiameterConfig::default()
            };
            let est = estimate_diameter(&mdp, eps, &cfg, seed)?;
            let exact = diameter(&mdp)?;
            println!("estimate  {:.4}", est.estimate);
            println!("exact     {:.4}", exact.value);
            println!("rounds    {}", est.rounds);
            println!("steps     {}", est.steps);
            if !est.complete {
                println!("warning: stopped early (step cap or round limit)");
            }
        }
        Command::EnvInfo { env } => {
            let mdp = build_env(&parse_env(&env)?)?;
            let d = diameter(&mdp)?;
            println!("S  {}", mdp.n_states());
            println!("A  {}", mdp.n_actions());
            println!("D  {:.4}  (from {} to {})", d.value, d.from, d.to);
            let ds: Vec<String> = d.per_target.iter().map(|x| format!("{x:.4}")).collect();
            println!("D_s  {}", ds.join(" "));
            let reach = check_communicating(&mdp);
            if !reach.communicating {
                println!("not communicating: {} unreachable pairs", reach.unreachable.len());
            }
        }
        Command::Metrics { csv } => {
            let rows = read_runs_csv(&csv)?;
            println!("algo,runs,completed,capped,mean,std,median");
            let fmt = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
            for (algo, s) in summarize_rows(&rows) {
                println!(
                    "{algo},{},{},{},{},{},{}",
                    s.runs,
                    s.completed,
                    s.capped,
                    fmt(s.mean),
                    fmt(s.std),
                    fmt(s.median)
                );
            }
        }
    }
    Ok(())
}
