use std::sync::Arc;

use crate::ensemble::PriorModel;
use crate::error::{Error, Result};
use crate::field::FlowField;
use crate::flowsim::{AnalyticFlow, CorruptedFlow, Corruption, FlowGroundTruth, FlowPreset, IntensityProfile, Vortex};
use crate::geometry::{Domain2D, Point2, Rect};
use crate::orchestrator::config::{FlowSpec, IntensitySpec, ModelSpec, RunConfig, VortexSpec};
use crate::rig::RigConfig;

/// Truth flow: a base flow plus a vortex and an intensity offset no model has.
struct PerturbedFlow {
    base: Arc<dyn FlowField<f64>>,
    vortex: Option<Vortex<f64>>,
    intensity_offset: f64,
}

impl FlowField<f64> for PerturbedFlow {
    fn mean_velocity(&self, p: Point2<f64>) -> (f64, f64) {
        let (u, v) = self.base.mean_velocity(p);
        let w = self.vortex.map_or(Point2::default(), |vx| vx.velocity(p));
        (u + w.x, v + w.y)
    }

    fn intensity(&self, p: Point2<f64>) -> f64 {
        (self.base.intensity(p) + self.intensity_offset).max(0.0)
    }
}

fn point(a: [f64; 2]) -> Point2<f64> {
    Point2::new(a[0], a[1])
}

fn vortex(v: &VortexSpec) -> Vortex<f64> {
    Vortex { center: point(v.center), circulation: v.circulation, core_radius: v.core_radius }
}

fn intensity(s: &IntensitySpec) -> IntensityProfile<f64> {
    IntensityProfile { base: s.base, peak: s.peak, center: point(s.center), width: s.width }
}

/// The reference mean flow described by `spec`.
pub fn reference_flow(spec: &FlowSpec) -> Arc<dyn FlowField<f64>> {
    let (preset, profile) = match spec {
        FlowSpec::Desk { speed, angle_deg, body_center, body_radius, recirculation, intensity: i } => (
            FlowPreset::Obstacle {
                speed: *speed,
                angle: angle_deg.to_radians(),
                body_center: point(*body_center),
                body_radius: *body_radius,
                recirculation: vortex(recirculation),
            },
            intensity(i),
        ),
        FlowSpec::Channel { speed, angle_deg, intensity: i } => {
            (FlowPreset::Channel { speed: *speed, angle: angle_deg.to_radians() }, intensity(i))
        }
        FlowSpec::VortexPair { center, separation, circulation, core_radius, intensity: i } => (
            FlowPreset::VortexPair {
                center: point(*center),
                separation: *separation,
                circulation: *circulation,
                core_radius: *core_radius,
            },
            intensity(i),
        ),
    };
    Arc::new(AnalyticFlow { preset, intensity: profile })
}

pub fn model_flow(reference: &Arc<dyn FlowField<f64>>, m: &ModelSpec) -> Arc<dyn FlowField<f64>> {
    let c = Corruption {
        amplitude: m.amplitude,
        rotation: m.rotation_deg.to_radians(),
        shift: point(m.shift),
        intensity_scale: m.intensity_scale,
        intensity_offset: m.intensity_offset,
    };
    if c == Corruption::default() {
        return reference.clone();
    }
    Arc::new(CorruptedFlow::new(reference.clone(), c))
}

/// World, ensemble and candidate set built from a config.
#[derive(Clone)]
pub struct Scenario {
    pub domain: Domain2D<f64>,
    pub truth: FlowGroundTruth<f64>,
    pub models: Vec<PriorModel<f64>>,
    /// Normalised prior model probabilities.
    pub priors: Vec<f64>,
    pub candidates: Vec<Point2<f64>>,
    pub rig: RigConfig<f64>,
}

impl Scenario {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let s = &cfg.scenario;
        let obstacles = s
            .obstacles
            .iter()
            .enumerate()
            .map(|(k, o)| {
                Rect::new(Point2::new(o[0], o[1]), Point2::new(o[2], o[3]))
                    .map_err(|e| Error::Config { key: format!("scenario.obstacles[{k}]"), message: e.to_string() })
            })
            .collect::<Result<Vec<_>>>()?;
        let domain = Domain2D::new(s.width, s.height, obstacles)?;
        let reference = reference_flow(&s.flow);
        let models: Vec<PriorModel<f64>> = cfg
            .models
            .iter()
            .map(|m| PriorModel {
                id: m.id.clone(),
                flow: model_flow(&reference, m),
                sigma_velocity: m.sigma_velocity,
                sigma_intensity: m.sigma_intensity,
                description: m.description.clone(),
            })
            .collect();
        let total: f64 = cfg.models.iter().map(|m| m.prior_weight).sum();
        let priors = cfg.models.iter().map(|m| m.prior_weight / total).collect();
        let base = match s.truth.model {
            Some(j) => models[j - 1].flow.clone(),
            None => reference,
        };
        let flow: Arc<dyn FlowField<f64>> = if s.truth.discrepancy.is_none() && s.truth.intensity_offset == 0.0 {
            base
        } else {
            Arc::new(PerturbedFlow { base, vortex: s.truth.discrepancy.as_ref().map(vortex), intensity_offset: s.truth.intensity_offset })
        };
        let truth = FlowGroundTruth::new(domain.clone(), flow, s.q_ref, s.timescale)?;
        let p = &cfg.planner;
        let candidates = domain.grid(p.candidate_spacing, p.clearance)?;
        if candidates.is_empty() {
            return Err(Error::Config { key: "planner.candidate_spacing".into(), message: "no free candidate locations".into() });
        }
        let n = &cfg.noise;
        let rig = RigConfig::new(n.sensors, n.accurate_deg.to_radians(), n.cutoff_deg.to_radians(), n.full_scale_error, n.range_max)
            .map_err(|e| Error::Config { key: "noise".into(), message: e.to_string() })?;
        Ok(Self { domain, truth, models, priors, candidates, rig })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_has_desk_scale_candidates() {
        let s = Scenario::build(&RunConfig::default()).unwrap();
        assert_eq!(s.models.len(), 12);
        assert!(s.candidates.len() > 1100 && s.candidates.len() < 1300, "{}", s.candidates.len());
        assert!((s.priors.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truth_can_be_an_ensemble_member() {
        let mut cfg = RunConfig::default();
        cfg.scenario.truth.model = Some(3);
        cfg.scenario.truth.discrepancy = None;
        cfg.scenario.truth.intensity_offset = 0.0;
        let s = Scenario::build(&cfg).unwrap();
        let x = Point2::new(0.4, 0.3);
        assert_eq!(s.truth.flow.mean_velocity(x), s.models[2].flow.mean_velocity(x));
        assert_eq!(s.truth.flow.intensity(x), s.models[2].flow.intensity(x));
    }
}
