//! Synthetic turbulent ground truth.
//!
//! The instantaneous velocity at a point is the analytic mean field plus a
//! stationary fluctuation. Each in-plane component fluctuates as an independent
//! Ornstein-Uhlenbeck process with relaxation time equal to the local integral
//! time scale and variance `(q_ref * i(x))^2`, so the three-component intensity
//! definition recovers `i(x)` when the unobserved component has the same variance.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{FlowField, ScalarField};
use crate::geometry::{Domain2D, Point2};
use crate::scalar::Real;

/// Gaussian bump on top of a uniform background intensity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntensityProfile<T> {
    pub base: T,
    pub peak: T,
    pub center: Point2<T>,
    pub width: T,
}

impl<T: Real> IntensityProfile<T> {
    pub fn uniform(base: T) -> Self {
        Self { base, peak: T::zero(), center: Point2::default(), width: T::one() }
    }

    pub fn value(&self, p: Point2<T>) -> T {
        let bump = if self.peak == T::zero() {
            T::zero()
        } else {
            let w2 = self.width * self.width;
            self.peak * (-(p.dist2(self.center)) / (T::lit(2.0) * w2)).exp()
        };
        (self.base + bump).max(T::zero())
    }
}

/// Regularised point vortex (Lamb-Oseen profile).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vortex<T> {
    pub center: Point2<T>,
    /// Circulation (m^2/s), positive is counter-clockwise.
    pub circulation: T,
    pub core_radius: T,
}

impl<T: Real> Vortex<T> {
    pub fn velocity(&self, p: Point2<T>) -> Point2<T> {
        let r = p - self.center;
        let r2 = r.dot(r);
        if r2 == T::zero() {
            return Point2::default();
        }
        let rc2 = self.core_radius * self.core_radius;
        let factor = self.circulation / (T::lit(2.0) * T::PI() * r2) * (T::one() - (-r2 / rc2).exp());
        Point2::new(-r.y * factor, r.x * factor)
    }
}

/// Analytic mean-flow presets.
#[derive(Clone, Debug, PartialEq)]
pub enum FlowPreset<T> {
    /// Potential flow past a circular body (free stream `speed` at `angle`) blended
    /// with a recirculation vortex.
    Obstacle {
        speed: T,
        angle: T,
        body_center: Point2<T>,
        body_radius: T,
        recirculation: Vortex<T>,
    },
    /// Two co-rotating vortices placed symmetrically about `center`.
    VortexPair {
        center: Point2<T>,
        separation: T,
        circulation: T,
        core_radius: T,
    },
    /// Uniform stream.
    Channel { speed: T, angle: T },
}

impl<T: Real> FlowPreset<T> {
    pub fn velocity(&self, p: Point2<T>) -> Point2<T> {
        match self {
            FlowPreset::Obstacle { speed, angle, body_center, body_radius, recirculation } => {
                let z = (p - *body_center).rotated(-*angle);
                let r2 = z.dot(z);
                let local = if r2 == T::zero() {
                    Point2::default()
                } else {
                    let a2 = *body_radius * *body_radius;
                    let r4 = r2 * r2;
                    Point2::new(
                        *speed * (T::one() - a2 * (z.x * z.x - z.y * z.y) / r4),
                        -*speed * T::lit(2.0) * a2 * z.x * z.y / r4,
                    )
                };
                local.rotated(*angle) + recirculation.velocity(p)
            }
            FlowPreset::VortexPair { center, separation, circulation, core_radius } => {
                // evaluate in centred coordinates so the pair is exactly symmetric
                let half = Point2::new(*separation * T::lit(0.5), T::zero());
                let d = p - *center;
                let a = Vortex { center: half, circulation: *circulation, core_radius: *core_radius };
                let b = Vortex { center: Point2::default() - half, circulation: *circulation, core_radius: *core_radius };
                a.velocity(d) + b.velocity(d)
            }
            FlowPreset::Channel { speed, angle } => Point2::new(*speed * angle.cos(), *speed * angle.sin()),
        }
    }
}

/// Analytic flow: a mean-velocity preset plus an intensity profile.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticFlow<T> {
    pub preset: FlowPreset<T>,
    pub intensity: IntensityProfile<T>,
}

impl<T: Real> FlowField<T> for AnalyticFlow<T> {
    fn mean_velocity(&self, p: Point2<T>) -> (T, T) {
        let v = self.preset.velocity(p);
        (v.x, v.y)
    }

    fn intensity(&self, p: Point2<T>) -> T {
        self.intensity.value(p)
    }
}

/// Systematic distortion applied to a reference flow, used to build biased
/// candidate models that play the role of inconsistent numerical solutions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Corruption<T> {
    pub amplitude: T,
    /// Rotation of the velocity vectors (rad).
    pub rotation: T,
    /// Spatial shift of the whole pattern (m).
    pub shift: Point2<T>,
    pub intensity_scale: T,
    pub intensity_offset: T,
}

impl<T: Real> Default for Corruption<T> {
    fn default() -> Self {
        Self {
            amplitude: T::one(),
            rotation: T::zero(),
            shift: Point2::default(),
            intensity_scale: T::one(),
            intensity_offset: T::zero(),
        }
    }
}

pub struct CorruptedFlow<T: Real> {
    base: Arc<dyn FlowField<T>>,
    corruption: Corruption<T>,
}

impl<T: Real> CorruptedFlow<T> {
    pub fn new(base: Arc<dyn FlowField<T>>, corruption: Corruption<T>) -> Self {
        Self { base, corruption }
    }
}

impl<T: Real> FlowField<T> for CorruptedFlow<T> {
    fn mean_velocity(&self, p: Point2<T>) -> (T, T) {
        let c = &self.corruption;
        let (u, v) = self.base.mean_velocity(p - c.shift);
        let w = Point2::new(u, v).rotated(c.rotation) * c.amplitude;
        (w.x, w.y)
    }

    fn intensity(&self, p: Point2<T>) -> T {
        let c = &self.corruption;
        (c.intensity_scale * self.base.intensity(p - c.shift) + c.intensity_offset).max(T::zero())
    }
}

/// The "real world" the simulated robot samples.
#[derive(Clone)]
pub struct FlowGroundTruth<T: Real> {
    pub domain: Domain2D<T>,
    pub flow: Arc<dyn FlowField<T>>,
    /// Reference speed normalising the intensity (m/s).
    pub q_ref: T,
    /// Integral time scale t*(x) of the fluctuations (s).
    pub timescale: Arc<dyn ScalarField<T>>,
}

impl<T: Real> FlowGroundTruth<T> {
    pub fn new(domain: Domain2D<T>, flow: Arc<dyn FlowField<T>>, q_ref: T, timescale: T) -> Result<Self> {
        if !(q_ref > T::zero()) {
            return Err(Error::Argument(format!("q_ref must be positive, got {q_ref}")));
        }
        if !(timescale > T::zero()) {
            return Err(Error::Argument(format!("integral time scale must be positive, got {timescale}")));
        }
        Ok(Self { domain, flow, q_ref, timescale: Arc::new(move |_p: Point2<T>| timescale) })
    }

    pub fn with_timescale_field(mut self, field: Arc<dyn ScalarField<T>>) -> Self {
        self.timescale = field;
        self
    }

    /// Standard deviation of each simulated in-plane fluctuation component.
    pub fn fluctuation_std(&self, p: Point2<T>) -> T {
        self.q_ref * self.flow.intensity(p)
    }
}

/// Exact ground-truth `(mean_u, mean_v, intensity)` at `x`.
pub fn field_query<T: Real>(gt: &FlowGroundTruth<T>, x: Point2<T>) -> Result<(T, T, T)> {
    gt.domain.check_inside(x)?;
    let (u, v) = gt.flow.mean_velocity(x);
    Ok((u, v, gt.flow.intensity(x)))
}

/// Independent per-component Ornstein-Uhlenbeck fluctuations at one location.
#[derive(Clone, Debug)]
pub struct FluctuationProcess<T> {
    state: [T; 2],
    relaxation: T,
    std: T,
}

impl<T: Real> FluctuationProcess<T> {
    /// Starts from the stationary distribution.
    pub fn stationary<R: Rng + ?Sized>(relaxation: T, std: T, rng: &mut R) -> Self {
        let state = [std * T::standard_normal(rng), std * T::standard_normal(rng)];
        Self { state, relaxation, std }
    }

    pub fn current(&self) -> (T, T) {
        (self.state[0], self.state[1])
    }

    /// Exact OU transition over `dt`.
    pub fn advance<R: Rng + ?Sized>(&mut self, dt: T, rng: &mut R) -> (T, T) {
        if self.std == T::zero() {
            self.state = [T::zero(), T::zero()];
            return (T::zero(), T::zero());
        }
        let a = (-dt / self.relaxation).exp();
        let kick = self.std * (T::one() - a * a).max(T::zero()).sqrt();
        for s in &mut self.state {
            *s = a * *s + kick * T::standard_normal(rng);
        }
        self.current()
    }
}

/// Instantaneous velocity series at a fixed location.
#[derive(Clone, Debug, PartialEq)]
pub struct InstantaneousSeries<T> {
    pub t: Vec<T>,
    pub u: Vec<T>,
    pub v: Vec<T>,
}

/// Check that `t_grid` is strictly increasing with a uniform step; returns the step.
pub fn uniform_step<T: Real>(t_grid: &[T]) -> Result<T> {
    if t_grid.len() < 2 {
        return Ok(T::zero());
    }
    let dt = t_grid[1] - t_grid[0];
    if !(dt > T::zero()) {
        return Err(Error::Argument("time grid must be strictly increasing".into()));
    }
    // rounding in the grid values grows with the largest time
    let last = t_grid[t_grid.len() - 1].abs().max(t_grid[0].abs());
    let tol = (dt * T::lit(1e-6)).max(T::epsilon() * T::lit(8.0) * last);
    for w in t_grid.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > tol {
            return Err(Error::Argument("time grid is not uniform".into()));
        }
    }
    Ok(dt)
}

/// Mean field plus a stationary OU path, drawing from `rng`.
pub fn sample_instantaneous_with<T: Real, R: Rng + ?Sized>(
    gt: &FlowGroundTruth<T>,
    x: Point2<T>,
    t_grid: &[T],
    rng: &mut R,
) -> Result<InstantaneousSeries<T>> {
    gt.domain.check_free(x)?;
    let dt = uniform_step(t_grid)?;
    let (mu, mv) = gt.flow.mean_velocity(x);
    let mut process = FluctuationProcess::stationary(gt.timescale.value(x), gt.fluctuation_std(x), rng);
    let n = t_grid.len();
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for k in 0..n {
        let (eu, ev) = if k == 0 { process.current() } else { process.advance(dt, rng) };
        u.push(mu + eu);
        v.push(mv + ev);
    }
    Ok(InstantaneousSeries { t: t_grid.to_vec(), u, v })
}

/// Deterministic in `seed`.
pub fn sample_instantaneous<T: Real>(
    gt: &FlowGroundTruth<T>,
    x: Point2<T>,
    t_grid: &[T],
    seed: u64,
) -> Result<InstantaneousSeries<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_instantaneous_with(gt, x, t_grid, &mut rng)
}

/// `n` uniform sample times starting at zero.
pub fn time_grid<T: Real>(n: usize, dt: T) -> Vec<T> {
    (0..n).map(|k| dt * T::from_usize_lossy(k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    fn domain() -> Domain2D<f64> {
        let obs = Rect::new(Point2::new(0.9, 0.9), Point2::new(1.3, 1.3)).unwrap();
        Domain2D::new(2.2, 2.2, vec![obs]).unwrap()
    }

    fn channel(intensity: f64) -> FlowGroundTruth<f64> {
        let flow = AnalyticFlow {
            preset: FlowPreset::Channel { speed: 0.78, angle: 0.0 },
            intensity: IntensityProfile::uniform(intensity),
        };
        FlowGroundTruth::new(domain(), Arc::new(flow), 0.78, 0.26).unwrap()
    }

    #[test]
    fn zero_intensity_series_is_constant() {
        let gt = channel(0.0);
        let t = time_grid(500, 1.0 / 67.0);
        let s = sample_instantaneous(&gt, Point2::new(0.3, 0.3), &t, 7).unwrap();
        assert!(s.u.iter().all(|&u| u == 0.78));
        assert!(s.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn channel_speed_far_from_obstacle() {
        let gt = channel(0.1);
        let (u, v, i) = field_query(&gt, Point2::new(0.2, 2.0)).unwrap();
        assert_eq!(u.hypot(v), 0.78);
        assert!(i >= 0.0);
    }

    #[test]
    fn vortex_pair_center_is_stagnation_point() {
        let c = Point2::new(1.1, 1.1);
        let flow = AnalyticFlow {
            preset: FlowPreset::VortexPair { center: c, separation: 0.8, circulation: 0.6, core_radius: 0.2 },
            intensity: IntensityProfile::uniform(0.1),
        };
        let gt = FlowGroundTruth::new(Domain2D::new(2.2, 2.2, vec![]).unwrap(), Arc::new(flow), 0.78, 0.26).unwrap();
        let (u, v, _) = field_query(&gt, c).unwrap();
        assert_eq!((u, v), (0.0, 0.0));
    }

    #[test]
    fn query_and_sampling_errors() {
        let gt = channel(0.1);
        assert!(matches!(field_query(&gt, Point2::new(-0.1, 0.5)), Err(Error::Domain(_))));
        let t = time_grid(10, 0.1);
        assert!(matches!(sample_instantaneous(&gt, Point2::new(1.0, 1.0), &t, 1), Err(Error::Domain(_))));
        let bad = vec![0.0, 0.1, 0.25];
        assert!(matches!(sample_instantaneous(&gt, Point2::new(0.5, 0.5), &bad, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn identical_seeds_identical_series() {
        let gt = channel(0.2);
        let t = time_grid(1000, 1.0 / 67.0);
        let a = sample_instantaneous(&gt, Point2::new(0.4, 0.4), &t, 99).unwrap();
        let b = sample_instantaneous(&gt, Point2::new(0.4, 0.4), &t, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn obstacle_preset_is_finite_outside_body() {
        let flow = AnalyticFlow {
            preset: FlowPreset::Obstacle {
                speed: 0.35,
                angle: 0.3,
                body_center: Point2::new(1.1, 1.1),
                body_radius: 0.2,
                recirculation: Vortex { center: Point2::new(0.6, 1.6), circulation: 0.5, core_radius: 0.25 },
            },
            intensity: IntensityProfile { base: 0.1, peak: 0.1, center: Point2::new(0.6, 1.0), width: 0.3 },
        };
        let d = domain();
        for p in d.grid(0.05, 0.0).unwrap() {
            let (u, v) = flow.mean_velocity(p);
            assert!(u.is_finite() && v.is_finite());
            assert!(flow.intensity(p) >= 0.0);
        }
    }

    #[test]
    fn corruption_identity_is_exact() {
        let base: Arc<dyn FlowField<f64>> = Arc::new(AnalyticFlow {
            preset: FlowPreset::Channel { speed: 0.5, angle: 0.4 },
            intensity: IntensityProfile::uniform(0.1),
        });
        let c = CorruptedFlow::new(base.clone(), Corruption::default());
        let p = Point2::new(0.3, 0.7);
        assert_eq!(c.mean_velocity(p), base.mean_velocity(p));
        assert_eq!(c.intensity(p), base.intensity(p));
    }
}
