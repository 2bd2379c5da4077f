use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use flowlearn::orchestrator::RunLog;

use crate::error::CliResult;

pub const RUNLOG_FILE: &str = "runlog.json";
pub const MEASUREMENTS_FILE: &str = "measurements.csv";
pub const POSTERIOR_FILE: &str = "posterior_fields.csv";
pub const MODEL_PROBS_FILE: &str = "model_probs.csv";
pub const WAYPOINTS_FILE: &str = "waypoints.csv";

pub const MEASUREMENTS_HEADER: [&str; 18] = [
    "k", "candidate", "x", "y", "heading", "n", "y_u", "y_v", "y_i", "sigma2_u", "sigma2_v", "sigma2_i", "t_star",
    "t_star_truncated", "intensity_clamped", "warnings", "dropped", "exploration",
];
pub const POSTERIOR_HEADER: [&str; 8] = ["x", "y", "mean_u", "mean_v", "mean_i", "std_u", "std_v", "std_i"];
/// Long format; `k = 0` holds the prior probabilities.
pub const MODEL_PROBS_HEADER: [&str; 3] = ["k", "model", "probability"];
pub const WAYPOINTS_HEADER: [&str; 13] =
    ["k", "candidate", "x", "y", "exploration", "gain", "travel", "relaxed", "d_k", "e_u", "e_v", "e_i", "e"];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn writer(dir: &Path, name: &str, header: &[&str]) -> CliResult<csv::Writer<File>> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    w.write_record(header)?;
    Ok(w)
}

/// Write the five run outputs into `dir`, creating it if needed.
pub fn write_run(dir: &Path, log: &RunLog) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;

    let mut json = BufWriter::new(File::create(dir.join(RUNLOG_FILE))?);
    serde_json::to_writer_pretty(&mut json, log).map_err(std::io::Error::from)?;
    json.write_all(b"\n")?;
    json.flush()?;

    let mut w = writer(dir, MEASUREMENTS_FILE, &MEASUREMENTS_HEADER)?;
    for s in &log.steps {
        let m = &s.measurement;
        w.write_record([
            s.k.to_string(),
            s.candidate.to_string(),
            m.x.to_string(),
            m.y.to_string(),
            m.heading.to_string(),
            m.n.to_string(),
            m.y_u.to_string(),
            m.y_v.to_string(),
            m.y_i.to_string(),
            m.sigma2_u.to_string(),
            m.sigma2_v.to_string(),
            m.sigma2_i.to_string(),
            m.t_star.to_string(),
            m.t_star_truncated.to_string(),
            m.intensity_clamped.to_string(),
            m.warnings.to_string(),
            m.dropped.to_string(),
            s.exploration.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(dir, POSTERIOR_FILE, &POSTERIOR_HEADER)?;
    let g = &log.posterior;
    for (q, p) in g.points.iter().enumerate() {
        let mut row = vec![p[0].to_string(), p[1].to_string()];
        row.extend((0..3).map(|k| g.mean[k][q].to_string()));
        row.extend((0..3).map(|k| g.std[k][q].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = writer(dir, MODEL_PROBS_FILE, &MODEL_PROBS_HEADER)?;
    let mut probs = |k: usize, p: &[f64]| -> CliResult<()> {
        for (id, v) in log.model_ids.iter().zip(p) {
            w.write_record([k.to_string(), id.clone(), v.to_string()])?;
        }
        Ok(())
    };
    probs(0, &log.initial_probabilities)?;
    for s in &log.steps {
        probs(s.k, &s.probabilities)?;
    }
    w.flush()?;

    let mut w = writer(dir, WAYPOINTS_FILE, &WAYPOINTS_HEADER)?;
    for s in &log.steps {
        let m = &s.measurement;
        let e = &s.error;
        w.write_record([
            s.k.to_string(),
            s.candidate.to_string(),
            m.x.to_string(),
            m.y.to_string(),
            s.exploration.to_string(),
            opt(s.gain),
            s.travel.to_string(),
            s.relaxed.to_string(),
            opt(s.d_k),
            e.e_u.to_string(),
            e.e_v.to_string(),
            e.e_i.to_string(),
            e.e.to_string(),
        ])?;
    }
    w.flush()?;

    Ok([RUNLOG_FILE, MEASUREMENTS_FILE, POSTERIOR_FILE, MODEL_PROBS_FILE, WAYPOINTS_FILE].iter().map(|f| dir.join(f)).collect())
}
