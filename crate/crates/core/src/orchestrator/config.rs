use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::Metric;

/// Everything a run needs. Defaults describe the desk-scale scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub models: Vec<ModelSpec>,
    pub kernel: KernelConfig,
    pub noise: NoiseConfig,
    pub sampling: SamplingConfig,
    pub planner: PlannerConfig,
    pub evaluation: EvaluationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub width: f64,
    pub height: f64,
    /// Rectangular obstacles as `[min_x, min_y, max_x, max_y]`.
    pub obstacles: Vec<[f64; 4]>,
    pub flow: FlowSpec,
    /// Reference speed normalising the intensity (m/s).
    pub q_ref: f64,
    /// Integral time scale of the fluctuations (s).
    pub timescale: f64,
    pub truth: TruthSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntensitySpec {
    pub base: f64,
    pub peak: f64,
    pub center: [f64; 2],
    pub width: f64,
}

impl Default for IntensitySpec {
    fn default() -> Self {
        Self { base: 0.07, peak: 0.08, center: [1.9, 0.3], width: 0.45 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexSpec {
    pub center: [f64; 2],
    /// Circulation (m^2/s), positive is counter-clockwise.
    pub circulation: f64,
    pub core_radius: f64,
}

/// Reference mean flow the ensemble members are derived from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowSpec {
    /// Stream past a central body with a room-scale recirculation.
    Desk {
        speed: f64,
        angle_deg: f64,
        body_center: [f64; 2],
        body_radius: f64,
        recirculation: VortexSpec,
        intensity: IntensitySpec,
    },
    Channel {
        speed: f64,
        angle_deg: f64,
        intensity: IntensitySpec,
    },
    VortexPair {
        center: [f64; 2],
        separation: f64,
        circulation: f64,
        core_radius: f64,
        intensity: IntensitySpec,
    },
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec::Desk {
            speed: 0.24,
            angle_deg: 180.0,
            body_center: [1.1, 1.1],
            body_radius: 0.25,
            recirculation: VortexSpec { center: [1.1, 1.1], circulation: 2.4, core_radius: 0.7 },
            intensity: IntensitySpec::default(),
        }
    }
}

/// How the simulated world differs from the reference flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruthSpec {
    /// 1-based ensemble member the truth starts from; the reference flow when absent.
    pub model: Option<usize>,
    /// Extra vortex that no ensemble member contains.
    pub discrepancy: Option<VortexSpec>,
    pub intensity_offset: f64,
}

impl Default for TruthSpec {
    fn default() -> Self {
        Self {
            model: None,
            discrepancy: Some(VortexSpec { center: [0.45, 1.75], circulation: -0.24, core_radius: 0.3 }),
            intensity_offset: 0.015,
        }
    }
}

/// One candidate prior model: a distortion of the reference flow with its
/// confidence stds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub id: String,
    pub description: String,
    pub amplitude: f64,
    pub rotation_deg: f64,
    pub shift: [f64; 2],
    pub intensity_scale: f64,
    pub intensity_offset: f64,
    pub sigma_velocity: f64,
    pub sigma_intensity: f64,
    /// Unnormalised prior weight.
    pub prior_weight: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            id: String::new(),
            description: String::new(),
            amplitude: 1.0,
            rotation_deg: 0.0,
            shift: [0.0, 0.0],
            intensity_scale: 1.0,
            intensity_offset: 0.0,
            sigma_velocity: 0.2,
            sigma_intensity: 0.1,
            prior_weight: 1.0,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn spec(id: &str, description: &str, amplitude: f64, rotation_deg: f64, shift: [f64; 2], intensity_scale: f64, sv: f64, si: f64) -> ModelSpec {
    ModelSpec {
        id: id.into(),
        description: description.into(),
        amplitude,
        rotation_deg,
        shift,
        intensity_scale,
        sigma_velocity: sv,
        sigma_intensity: si,
        ..ModelSpec::default()
    }
}

/// Twelve candidate models. Member 7 is the undistorted reference flow.
pub fn default_models() -> Vec<ModelSpec> {
    vec![
        spec("1", "k-epsilon, uniform inlet, i_in 0.02", 0.62, -18.0, [0.15, 0.0], 0.55, 0.10, 0.05),
        spec("2", "RSM, uniform inlet, i_in 0.02", 0.75, 14.0, [0.0, 0.12], 0.6, 0.20, 0.10),
        spec("3", "k-omega, uniform inlet, i_in 0.02", 0.55, -28.0, [0.0, 0.0], 0.55, 0.20, 0.10),
        spec("4", "k-epsilon, inlet profile, i_in 0.02", 0.68, -22.0, [0.2, 0.1], 0.6, 0.14, 0.07),
        spec("5", "RSM, inlet profile, i_in 0.02", 0.8, 18.0, [0.0, 0.0], 0.6, 0.20, 0.10),
        spec("6", "k-omega, inlet profile, i_in 0.02", 0.6, -12.0, [-0.15, 0.1], 0.6, 0.20, 0.10),
        spec("7", "RSM, inlet profile, i_in 0.05", 1.0, 0.0, [0.0, 0.0], 1.0, 0.14, 0.07),
        spec("8", "RSM, inlet profile, i_in 0.03", 0.85, 10.0, [0.0, 0.15], 0.75, 0.20, 0.10),
        spec("9", "RSM, inlet profile, i_in 0.01", 0.8, -6.0, [0.0, 0.0], 0.45, 0.20, 0.10),
        spec("10", "RSM, inlet profile, i_in 0.04", 0.85, -10.0, [0.1, 0.0], 0.85, 0.20, 0.10),
        spec("11", "RSM, inlet 0.76 m/s, i_in 0.03", 0.72, 6.0, [0.0, -0.1], 0.7, 0.20, 0.10),
        spec("12", "RSM, inlet 0.80 m/s, i_in 0.03", 1.3, 14.0, [0.0, 0.0], 0.75, 0.14, 0.07),
    ]
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            width: 2.2,
            height: 2.2,
            obstacles: vec![[0.85, 0.85, 1.35, 1.35]],
            flow: FlowSpec::default(),
            q_ref: 0.78,
            timescale: 0.26,
            truth: TruthSpec::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    /// Correlation length (m).
    pub length: f64,
    /// Nominal number of samples behind the prior fluctuation term.
    pub n0: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { length: 0.35, n0: 200.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Sensor full-scale error (m/s); the per-reading noise std is a third of it.
    pub full_scale_error: f64,
    /// Heading error std (degrees).
    pub gamma_beta_deg: f64,
    /// Location error std per axis (m).
    pub gamma_x: f64,
    pub srom_size: usize,
    pub sensors: usize,
    pub accurate_deg: f64,
    pub cutoff_deg: f64,
    pub range_max: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            full_scale_error: 0.05,
            gamma_beta_deg: 5.0,
            gamma_x: 0.025,
            srom_size: 5,
            sensors: 8,
            accurate_deg: 55.0,
            cutoff_deg: 75.0,
            range_max: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    /// Decorrelated samples per measurement.
    pub samples: usize,
    /// Rig sampling frequency (Hz).
    pub frequency: f64,
    /// Upper guess of the integral time scale used to size the raw record (s).
    pub timescale_guess: f64,
    pub bootstrap: usize,
    pub max_lag: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { samples: 200, frequency: 67.0, timescale_guess: 0.3, bootstrap: 200, max_lag: 400 }
    }
}

impl SamplingConfig {
    pub fn raw_length(&self) -> usize {
        let stride = (2.0 * self.timescale_guess * self.frequency).ceil().max(1.0) as usize;
        self.samples * stride
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    pub metric: Metric,
    /// Maximum number of measurements m.
    pub max_measurements: usize,
    /// Exploration measurements taken on a lattice before greedy planning.
    pub exploration: usize,
    /// Convergence tolerance on the posterior change (m/s).
    pub tol: f64,
    /// Largest geodesic distance between consecutive waypoints (m).
    pub max_travel: Option<f64>,
    pub travel_penalty: f64,
    pub candidate_spacing: f64,
    pub clearance: f64,
    /// Lattice size for the lattice metric.
    pub lattice: [usize; 2],
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            metric: Metric::Entropy,
            max_measurements: 120,
            exploration: 9,
            tol: 2e-4,
            max_travel: Some(1.0),
            travel_penalty: 0.0,
            candidate_spacing: 0.0625,
            clearance: 0.05,
            lattice: [9, 9],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub test_points: usize,
    /// Also simulate fresh measurements at the test points.
    pub fresh_measurements: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { test_points: 100, fresh_measurements: true }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenario: ScenarioConfig::default(),
            models: default_models(),
            kernel: KernelConfig::default(),
            noise: NoiseConfig::default(),
            sampling: SamplingConfig::default(),
            planner: PlannerConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.into(), message: message.into() }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be a finite value >= 0, got {v}")))
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be a finite value > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        positive("scenario.width", s.width)?;
        positive("scenario.height", s.height)?;
        positive("scenario.q_ref", s.q_ref)?;
        positive("scenario.timescale", s.timescale)?;
        if !s.truth.intensity_offset.is_finite() {
            return Err(bad("scenario.truth.intensity_offset", "must be finite"));
        }
        if let Some(m) = s.truth.model {
            if m == 0 || m > self.models.len() {
                return Err(bad("scenario.truth.model", format!("must name a model between 1 and {}, got {m}", self.models.len())));
            }
        }
        if self.models.is_empty() {
            return Err(bad("models", "at least one model is required"));
        }
        for (j, m) in self.models.iter().enumerate() {
            let key = |f: &str| format!("models[{j}].{f}");
            non_negative(&key("sigma_velocity"), m.sigma_velocity)?;
            non_negative(&key("sigma_intensity"), m.sigma_intensity)?;
            non_negative(&key("intensity_scale"), m.intensity_scale)?;
            non_negative(&key("prior_weight"), m.prior_weight)?;
        }
        if self.models.iter().all(|m| m.prior_weight == 0.0) {
            return Err(bad("models", "at least one model needs a positive prior_weight"));
        }
        positive("kernel.length", self.kernel.length)?;
        positive("kernel.n0", self.kernel.n0)?;
        let n = &self.noise;
        non_negative("noise.full_scale_error", n.full_scale_error)?;
        non_negative("noise.gamma_beta_deg", n.gamma_beta_deg)?;
        non_negative("noise.gamma_x", n.gamma_x)?;
        if n.srom_size == 0 || (n.srom_size > 1 && n.srom_size < 4) {
            return Err(bad("noise.srom_size", format!("must be 1 or at least 4, got {}", n.srom_size)));
        }
        if n.sensors < 3 {
            return Err(bad("noise.sensors", "at least 3 sensors are needed"));
        }
        if !(n.accurate_deg > 0.0 && n.accurate_deg < n.cutoff_deg) {
            return Err(bad("noise.accurate_deg", "must be positive and below noise.cutoff_deg"));
        }
        positive("noise.range_max", n.range_max)?;
        let sm = &self.sampling;
        if sm.samples < 2 {
            return Err(bad("sampling.samples", "at least 2 samples are needed"));
        }
        positive("sampling.frequency", sm.frequency)?;
        positive("sampling.timescale_guess", sm.timescale_guess)?;
        if sm.bootstrap < 2 {
            return Err(bad("sampling.bootstrap", "at least 2 bootstrap resamples are needed"));
        }
        if sm.max_lag < 1 {
            return Err(bad("sampling.max_lag", "must be at least 1"));
        }
        let p = &self.planner;
        if p.max_measurements == 0 {
            return Err(bad("planner.max_measurements", "must be at least 1"));
        }
        if p.exploration > p.max_measurements {
            return Err(bad(
                "planner.exploration",
                format!("exploration count {} exceeds max_measurements {}", p.exploration, p.max_measurements),
            ));
        }
        if p.exploration == 1 {
            return Err(bad("planner.exploration", "must be 0 or at least 2"));
        }
        if !(p.tol > 0.0) {
            return Err(bad("planner.tol", format!("must be > 0, got {}", p.tol)));
        }
        if let Some(t) = p.max_travel {
            positive("planner.max_travel", t)?;
        }
        non_negative("planner.travel_penalty", p.travel_penalty)?;
        positive("planner.candidate_spacing", p.candidate_spacing)?;
        non_negative("planner.clearance", p.clearance)?;
        if p.lattice[0] < 2 || p.lattice[1] < 2 {
            return Err(bad("planner.lattice", "lattice needs at least 2x2 points"));
        }
        if self.evaluation.test_points == 0 {
            return Err(bad("evaluation.test_points", "at least one test point is needed"));
        }
        Ok(())
    }
}
