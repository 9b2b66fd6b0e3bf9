use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha1::{Digest, Sha1};

use super::stats::{mean, quantile, std_dev};
use super::ResultSet;
use crate::agent::RunTrace;
use crate::error::{Error, Result};

pub const RUNS_HEADER: [&str; 7] = ["seed", "algo", "env", "requirement", "t", "metric", "value"];

/// One line of `runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub seed: u64,
    pub algo: String,
    pub env: String,
    pub requirement: String,
    pub t: u64,
    pub metric: String,
    pub value: f64,
}

/// Stopping-time statistics of one algorithm. Capped runs are counted but
/// excluded from the statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSummary {
    pub runs: usize,
    pub completed: usize,
    pub capped: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub q25: Option<f64>,
    pub median: Option<f64>,
    pub q75: Option<f64>,
    pub max: Option<f64>,
}

impl TauSummary {
    pub fn from_values(mut taus: Vec<f64>, capped: usize) -> Self {
        taus.sort_by(f64::total_cmp);
        let stat = |f: &dyn Fn(&[f64]) -> f64| (!taus.is_empty()).then(|| f(&taus));
        Self {
            runs: taus.len() + capped,
            completed: taus.len(),
            capped,
            mean: stat(&mean),
            std: stat(&std_dev),
            min: stat(&|v| v[0]),
            q25: stat(&|v| quantile(v, 0.25)),
            median: stat(&|v| quantile(v, 0.5)),
            q75: stat(&|v| quantile(v, 0.75)),
            max: stat(&|v| v[v.len() - 1]),
        }
    }
}

fn trace_rows(rs: &ResultSet, trace: &RunTrace) -> Vec<CsvRow> {
    let row = |t: u64, metric: &str, value: f64| CsvRow {
        seed: trace.seed,
        algo: trace.algo.clone(),
        env: rs.env.clone(),
        requirement: rs.requirement.clone(),
        t,
        metric: metric.to_string(),
        value,
    };
    let mut out = Vec::with_capacity(trace.series.len() * 3 + 1);
    for p in &trace.series {
        out.push(row(p.t, "P_t", p.p_t));
        if let Some(e) = p.e_t {
            out.push(row(p.t, "E_t", e));
        }
        out.push(row(p.t, "visits", p.visits as f64));
    }
    match trace.tau {
        Some(tau) => out.push(row(trace.steps, "tau", tau as f64)),
        None => out.push(row(trace.steps, "capped", trace.steps as f64)),
    }
    out
}

/// `t ↦ mean over traces` of a series, each trace held at its last value
/// after it stops.
fn averaged_curve(traces: &[&RunTrace], pick: impl Fn(&crate::agent::MetricPoint) -> Option<f64>) -> Vec<(u64, f64)> {
    let mut grid: Vec<u64> = traces.iter().flat_map(|t| t.series.iter().map(|p| p.t)).collect();
    grid.sort_unstable();
    grid.dedup();
    let mut cursors = vec![0usize; traces.len()];
    let mut curve = Vec::with_capacity(grid.len());
    for &t in &grid {
        let mut sum = 0.0;
        let mut k = 0;
        for (trace, c) in traces.iter().zip(cursors.iter_mut()) {
            while *c + 1 < trace.series.len() && trace.series[*c + 1].t <= t {
                *c += 1;
            }
            if let Some(v) = trace.series.get(*c).and_then(&pick) {
                sum += v;
                k += 1;
            }
        }
        if k > 0 {
            curve.push((t, sum / k as f64));
        }
    }
    curve
}

/// Git blob id of `bytes`: `sha1("blob <len>\0" ++ bytes)`.
fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `runs.csv` and `summary.json` into `dir`, creating it if needed.
pub fn write_results(rs: &ResultSet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("runs.csv");
    let csv_err = |e: csv::Error| Error::Config(format!("{}: {e}", csv_path.display()));
    // header written by hand so an empty result still gets one
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&csv_path).map_err(csv_err)?;
    w.write_record(RUNS_HEADER).map_err(csv_err)?;
    for trace in &rs.traces {
        for row in trace_rows(rs, trace) {
            w.serialize(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let config_text = serde_json::to_string_pretty(&rs.config).expect("config serializes");
    let mut algorithms = Vec::new();
    for spec in &rs.config.algorithms {
        let traces: Vec<&RunTrace> = rs.traces_for(&spec.id).collect();
        let taus: Vec<f64> = traces.iter().filter_map(|t| t.tau.map(|x| x as f64)).collect();
        let capped = traces.iter().filter(|t| t.capped()).count();
        let p_curve = averaged_curve(&traces, |p| Some(p.p_t));
        let e_curve = averaged_curve(&traces, |p| p.e_t);
        algorithms.push(json!({
            "algo": spec.id,
            "params": spec.params,
            "tau": TauSummary::from_values(taus, capped),
            "curve": {
                "t": p_curve.iter().map(|x| x.0).collect::<Vec<_>>(),
                "P_t": p_curve.iter().map(|x| x.1).collect::<Vec<_>>(),
                "E_t_t": e_curve.iter().map(|x| x.0).collect::<Vec<_>>(),
                "E_t": e_curve.iter().map(|x| x.1).collect::<Vec<_>>(),
            },
        }));
    }
    let summary = json!({
        "env": rs.env,
        "requirement": rs.requirement,
        "runs": rs.traces.len(),
        "capped": rs.traces.iter().filter(|t| t.capped()).count(),
        "algorithms": algorithms,
        "config_hash": blob_hash(config_text.as_bytes()),
        "config": serde_json::to_value(&rs.config).expect("config serializes"),
    });
    let summary_path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&summary_path, text + "\n").map_err(|e| Error::io(&summary_path, e))
}

/// Reads a `runs.csv` file back.
pub fn read_runs_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<CsvRow>, _>>()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Per-algorithm stopping-time statistics recomputed from CSV rows.
pub fn summarize_rows(rows: &[CsvRow]) -> BTreeMap<String, TauSummary> {
    let mut by_algo: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for row in rows {
        match row.metric.as_str() {
            "tau" => by_algo.entry(row.algo.clone()).or_default().0.push(row.value),
            "capped" => by_algo.entry(row.algo.clone()).or_default().1 += 1,
            _ => {}
        }
    }
    by_algo
        .into_iter()
        .map(|(algo, (taus, capped))| (algo, TauSummary::from_values(taus, capped)))
        .collect()
}
