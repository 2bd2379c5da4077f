use std::path::Path;

use flowlearn::orchestrator::metrics::PredictionError;
use flowlearn::orchestrator::{plan_mutual_information, run_with, RunConfig, RunLog, RunOptions, Scenario};
use flowlearn::planner::Metric;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Lattice sizes run by the lattice metric, one independent experiment each.
pub const LATTICE_SIZES: std::ops::RangeInclusive<usize> = 4..=10;

pub const CURVES_FILE: &str = "curves.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const WORKERS_ENV: &str = "FLOWLEARN_WORKERS";

pub const CURVES_HEADER: [&str; 8] = ["metric", "lattice", "seed", "k", "e_u", "e_v", "e_i", "e"];
pub const SUMMARY_HEADER: [&str; 9] =
    ["metric", "lattice", "seeds", "measurements", "mean_e_u", "mean_e_v", "mean_e_i", "mean_e", "mean_e_at_k"];

pub fn parse_metric(name: &str) -> CliResult<Metric> {
    match name.trim() {
        "entropy" => Ok(Metric::Entropy),
        "mi" | "mutual_information" => Ok(Metric::MutualInformation),
        "lattice" => Ok(Metric::Lattice),
        other => Err(CliError::Config(format!("unknown metric '{other}' (expected entropy, mi or lattice)"))),
    }
}

pub fn parse_metrics(list: &str) -> CliResult<Vec<Metric>> {
    let mut out = Vec::new();
    for m in list.split(',').filter(|s| !s.trim().is_empty()) {
        let m = parse_metric(m)?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(CliError::Config("no metric given".into()));
    }
    Ok(out)
}

/// Worker count from the environment, else the available parallelism.
pub fn worker_count() -> CliResult<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub metric: Metric,
    pub lattice: Option<usize>,
    pub seed: u64,
    pub k: usize,
    pub e_u: f64,
    pub e_v: f64,
    pub e_i: f64,
    pub e: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub metric: Metric,
    pub lattice: Option<usize>,
    pub seeds: usize,
    pub measurements: f64,
    pub mean_e_u: f64,
    pub mean_e_v: f64,
    pub mean_e_i: f64,
    pub mean_e: f64,
    /// Mean error after `report_k` measurements, where every run reached it.
    pub mean_e_at_k: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CompareOutcome {
    pub curves: Vec<CurveRow>,
    pub summary: Vec<SummaryRow>,
    pub logs: Vec<(Metric, Option<usize>, RunLog)>,
}

#[derive(Clone, Copy, Debug)]
struct Job {
    metric: Metric,
    lattice: Option<usize>,
    seed: u64,
}

fn job_config(base: &RunConfig, job: Job) -> RunConfig {
    let mut cfg = base.clone();
    cfg.seed = job.seed;
    cfg.planner.metric = job.metric;
    if let Some(n) = job.lattice {
        cfg.planner.lattice = [n, n];
        cfg.planner.max_measurements = n * n;
        cfg.planner.exploration = cfg.planner.exploration.min(n * n);
    }
    cfg
}

/// Error curve of one run: the prior at `k = 0`, then every step from the end of
/// the exploration batch on. A lattice run contributes its final error only.
fn curve(job: Job, log: &RunLog, e_0: PredictionError) -> Vec<CurveRow> {
    let row = |k: usize, e: &PredictionError| CurveRow {
        metric: job.metric,
        lattice: job.lattice,
        seed: job.seed,
        k,
        e_u: e.e_u,
        e_v: e.e_v,
        e_i: e.e_i,
        e: e.e,
    };
    if job.lattice.is_some() {
        return vec![row(log.measurements(), &log.evaluation.e_final)];
    }
    let explored = log.steps.iter().filter(|s| s.exploration).count();
    let mut out = vec![row(0, &e_0)];
    out.extend(log.steps.iter().filter(|s| s.k >= explored.max(1)).map(|s| row(s.k, &s.error)));
    out
}

/// Run every metric on `seeds` seeds with the convergence stop disabled.
pub fn run_compare(base: &RunConfig, metrics: &[Metric], seeds: u64, report_k: usize, workers: usize) -> CliResult<CompareOutcome> {
    let scenario = Scenario::build(base)?;
    let schedule = if metrics.contains(&Metric::MutualInformation) {
        let mut cfg = base.clone();
        cfg.planner.metric = Metric::MutualInformation;
        Some(plan_mutual_information(&cfg, &scenario)?)
    } else {
        None
    };
    let mut jobs = Vec::new();
    for &metric in metrics {
        let sizes: Vec<Option<usize>> =
            if metric == Metric::Lattice { LATTICE_SIZES.map(Some).collect() } else { vec![None] };
        for lattice in sizes {
            jobs.extend((0..seeds).map(|s| Job { metric, lattice, seed: base.seed + s }));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let results: Vec<CliResult<RunLog>> = pool.install(|| {
        jobs.par_iter()
            .map(|&job| {
                let cfg = job_config(base, job);
                let options = RunOptions { stop_on_convergence: false, mi_schedule: schedule.as_deref() };
                run_with(&cfg, &scenario, options).map_err(|e| {
                    CliError::Runtime(format!("{} seed {}: {e}", job.metric.name(), job.seed))
                })
            })
            .collect()
    });

    let mut curves = Vec::new();
    let mut logs = Vec::with_capacity(jobs.len());
    for (job, log) in jobs.iter().zip(results) {
        let log = log?;
        curves.extend(curve(*job, &log, log.evaluation.e_0));
        logs.push((job.metric, job.lattice, log));
    }

    let mut summary = Vec::new();
    for chunk in logs.chunks(seeds.max(1) as usize) {
        let (metric, lattice, _) = &chunk[0];
        let n = chunk.len() as f64;
        let mean = |f: &dyn Fn(&RunLog) -> f64| chunk.iter().map(|(_, _, l)| f(l)).sum::<f64>() / n;
        let at_k: Option<Vec<f64>> = chunk
            .iter()
            .map(|(_, _, l)| {
                let explored = l.steps.iter().filter(|s| s.exploration).count();
                l.steps.iter().find(|s| s.k == report_k && s.k >= explored).map(|s| s.error.e)
            })
            .collect();
        summary.push(SummaryRow {
            metric: *metric,
            lattice: *lattice,
            seeds: chunk.len(),
            measurements: mean(&|l| l.measurements() as f64),
            mean_e_u: mean(&|l| l.evaluation.e_final.e_u),
            mean_e_v: mean(&|l| l.evaluation.e_final.e_v),
            mean_e_i: mean(&|l| l.evaluation.e_final.e_i),
            mean_e: mean(&|l| l.evaluation.e_final.e),
            mean_e_at_k: if lattice.is_some() { None } else { at_k.map(|v| v.iter().sum::<f64>() / n) },
        });
    }
    Ok(CompareOutcome { curves, summary, logs })
}

fn lattice_label(l: Option<usize>) -> String {
    l.map_or_else(String::new, |n| format!("{n}x{n}"))
}

pub fn write_compare(dir: &Path, outcome: &CompareOutcome) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(CURVES_FILE))?;
    w.write_record(CURVES_HEADER)?;
    for r in &outcome.curves {
        w.write_record([
            r.metric.name().to_string(),
            lattice_label(r.lattice),
            r.seed.to_string(),
            r.k.to_string(),
            r.e_u.to_string(),
            r.e_v.to_string(),
            r.e_i.to_string(),
            r.e.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join(SUMMARY_FILE))?;
    w.write_record(SUMMARY_HEADER)?;
    for r in &outcome.summary {
        w.write_record([
            r.metric.name().to_string(),
            lattice_label(r.lattice),
            r.seeds.to_string(),
            r.measurements.to_string(),
            r.mean_e_u.to_string(),
            r.mean_e_v.to_string(),
            r.mean_e_i.to_string(),
            r.mean_e.to_string(),
            r.mean_e_at_k.map_or_else(String::new, |x| x.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text summary table.
pub fn format_summary(rows: &[SummaryRow], report_k: usize) -> String {
    let mut s = format!("{:<20} {:>7} {:>5} {:>6} {:>9} {:>9}\n", "metric", "lattice", "seeds", "m", "mean e", format!("e at {report_k}"));
    for r in rows {
        s.push_str(&format!(
            "{:<20} {:>7} {:>5} {:>6.1} {:>9.5} {:>9}\n",
            r.metric.name(),
            lattice_label(r.lattice),
            r.seeds,
            r.measurements,
            r.mean_e,
            r.mean_e_at_k.map_or_else(|| "-".to_string(), |x| format!("{x:.5}"))
        ));
    }
    s
}
