use std::path::{Path, PathBuf};

use flowlearn::orchestrator::config::{
    EvaluationConfig, KernelConfig, ModelSpec, NoiseConfig, PlannerConfig, SamplingConfig, ScenarioConfig,
};
use flowlearn::orchestrator::RunConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Where results go when `--out` is not given.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// On-disk experiment description. Every run setting is optional and falls back
/// to the built-in default; absent fields inside a section do the same.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub schema_version: u32,
    #[serde(default)]
    pub output: OutputSection,
    pub seed: Option<u64>,
    pub scenario: Option<ScenarioConfig>,
    pub models: Option<Vec<ModelSpec>>,
    pub kernel: Option<KernelConfig>,
    pub noise: Option<NoiseConfig>,
    pub sampling: Option<SamplingConfig>,
    pub planner: Option<PlannerConfig>,
    pub evaluation: Option<EvaluationConfig>,
}

impl ExperimentFile {
    pub fn run_config(&self) -> RunConfig {
        let d = RunConfig::default();
        RunConfig {
            seed: self.seed.unwrap_or(d.seed),
            scenario: self.scenario.clone().unwrap_or(d.scenario),
            models: self.models.clone().unwrap_or(d.models),
            kernel: self.kernel.unwrap_or(d.kernel),
            noise: self.noise.unwrap_or(d.noise),
            sampling: self.sampling.unwrap_or(d.sampling),
            planner: self.planner.clone().unwrap_or(d.planner),
            evaluation: self.evaluation.unwrap_or(d.evaluation),
        }
    }
}

/// A parsed and validated experiment file.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub path: PathBuf,
    pub file: ExperimentFile,
    pub config: RunConfig,
}

impl Experiment {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: cannot read config: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    /// Parse `text`; errors name `origin` and the offending line.
    pub fn parse(text: &str, origin: &Path) -> CliResult<Self> {
        let name = origin.display();
        let file: ExperimentFile = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            let msg = e.message().trim().to_string();
            CliError::Config(match line {
                Some(l) => format!("{name}:{l}: {msg}"),
                None => format!("{name}: {msg}"),
            })
        })?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                anchor(text, &name.to_string(), "schema_version"),
                file.schema_version
            )));
        }
        let config = file.run_config();
        if let Err(e) = config.validate() {
            return Err(match e {
                flowlearn::Error::Config { key, message } => {
                    CliError::Config(format!("{}: {key}: {message}", anchor(text, &name.to_string(), &key)))
                }
                other => CliError::Config(format!("{name}: {other}")),
            });
        }
        Ok(Self { path: origin.to_path_buf(), file, config })
    }

    /// Output directory from the flag, else from the file.
    pub fn output_dir(&self, flag: Option<&Path>) -> CliResult<PathBuf> {
        flag.map(Path::to_path_buf).or_else(|| self.file.output.dir.clone()).ok_or_else(|| {
            CliError::Config(format!("{}: no output directory; pass --out or set output.dir", self.path.display()))
        })
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn anchor(text: &str, name: &str, key: &str) -> String {
    match locate_key(text, key) {
        Some(l) => format!("{name}:{l}"),
        None => format!("{name}: (default value)"),
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn normalise(path: &str) -> String {
    path.split('.').map(|s| s.trim().trim_matches('"')).collect::<Vec<_>>().join(".")
}

/// 1-based line that sets `key`, written as a dotted path where array tables carry
/// an index (`models[2].sigma_velocity`). Falls back to the line that opens the
/// closest enclosing table.
pub fn locate_key(text: &str, key: &str) -> Option<usize> {
    let mut table = String::new();
    let mut counts: Vec<(String, usize)> = Vec::new();
    let mut best: Option<(usize, usize)> = None;
    let consider = |full: &str, line: usize, best: &mut Option<(usize, usize)>| {
        if full == key {
            *best = Some((usize::MAX, line));
        } else if key.starts_with(full) && key[full.len()..].starts_with(['.', '[']) {
            if best.is_none_or(|(len, _)| full.len() > len) {
                *best = Some((full.len(), line));
            }
        }
    };
    for (n, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if let Some(name) = line.strip_prefix("[[").and_then(|l| l.strip_suffix("]]")) {
            let name = normalise(name);
            let idx = match counts.iter_mut().find(|(k, _)| *k == name) {
                Some((_, c)) => {
                    *c += 1;
                    *c - 1
                }
                None => {
                    counts.push((name.clone(), 1));
                    0
                }
            };
            table = format!("{name}[{idx}]");
            consider(&table, n + 1, &mut best);
        } else if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = normalise(name);
            consider(&table, n + 1, &mut best);
        } else if let Some((lhs, _)) = line.split_once('=') {
            let lhs = normalise(lhs);
            let full = if table.is_empty() { lhs } else { format!("{table}.{lhs}") };
            consider(&full, n + 1, &mut best);
        }
        if matches!(best, Some((usize::MAX, _))) {
            break;
        }
    }
    best.map(|(_, l)| l)
}
