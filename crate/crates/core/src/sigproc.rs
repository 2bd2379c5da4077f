//! From raw rig samples to one measurement: autocorrelation and integral time
//! scale, decorrelation, sample moments, the intensity estimator with its
//! bootstrap variance, and the measurement-noise budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::rig::{reconstruct_velocity, sensor_noise_variances, simulate_reading_with, RigConfig};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    U,
    V,
}

/// Per-sample warnings raised while reconstructing the velocity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SampleFlags {
    pub non_adjacent: bool,
    pub outside_arc: bool,
    pub saturated: bool,
}

impl SampleFlags {
    pub fn any(&self) -> bool {
        self.non_adjacent || self.outside_arc || self.saturated
    }
}

/// Reconstructed instantaneous velocities at one location, with the linearised
/// sensor-noise variance of every sample.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VelocitySampleSeries<T> {
    pub t: Vec<T>,
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub noise_u: Vec<T>,
    pub noise_v: Vec<T>,
    pub warnings: Vec<SampleFlags>,
}

impl<T: Real> VelocitySampleSeries<T> {
    /// Series without sensor noise or warnings.
    pub fn from_velocities(t: Vec<T>, u: Vec<T>, v: Vec<T>) -> Result<Self> {
        let n = t.len();
        let s = Self { t, u, v, noise_u: vec![T::zero(); n], noise_v: vec![T::zero(); n], warnings: vec![SampleFlags::default(); n] };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn component(&self, axis: Axis) -> &[T] {
        match axis {
            Axis::U => &self.u,
            Axis::V => &self.v,
        }
    }

    /// Sampling step of the rig; see [`sampling_step`].
    pub fn dt(&self) -> Result<T> {
        sampling_step(&self.t)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.t.len();
        if [self.u.len(), self.v.len(), self.noise_u.len(), self.noise_v.len(), self.warnings.len()]
            .iter()
            .any(|&m| m != n)
        {
            return Err(Error::Argument("series columns have different lengths".into()));
        }
        if self.u.iter().chain(&self.v).any(|x| !x.is_finite()) {
            return Err(Error::Argument("series contains non-finite values".into()));
        }
        sampling_step(&self.t).map(|_| ())
    }

    /// Keep every `stride`-th sample starting with the first.
    pub fn subsample(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let pick = |c: &Vec<T>| c.iter().step_by(stride).copied().collect::<Vec<T>>();
        Self {
            t: pick(&self.t),
            u: pick(&self.u),
            v: pick(&self.v),
            noise_u: pick(&self.noise_u),
            noise_v: pick(&self.noise_v),
            warnings: self.warnings.iter().step_by(stride).copied().collect(),
        }
    }

    pub fn warning_count(&self) -> usize {
        self.warnings.iter().filter(|w| w.any()).count()
    }
}

/// Step of a strictly increasing time grid whose gaps (dropped samples) are whole
/// multiples of the smallest step. Lags are counted in retained samples, so the
/// gaps are ignored by the estimators.
pub fn sampling_step<T: Real>(t: &[T]) -> Result<T> {
    if t.len() < 2 {
        return Ok(T::zero());
    }
    let mut dt = T::infinity();
    for w in t.windows(2) {
        let d = w[1] - w[0];
        if !(d > T::zero()) {
            return Err(Error::Argument("time grid must be strictly increasing".into()));
        }
        dt = dt.min(d);
    }
    let last = t[t.len() - 1].abs().max(t[0].abs());
    let tol = T::lit(1e-3).max(T::epsilon() * T::lit(8.0) * last / dt);
    for w in t.windows(2) {
        let r = (w[1] - w[0]) / dt;
        if (r - r.round()).abs() > tol {
            return Err(Error::Argument("time grid gaps are not whole sampling steps".into()));
        }
    }
    Ok(dt)
}

/// Run the rig over a true velocity series. The readings are generated with the
/// true heading but interpreted with the nominal one; samples where the flow is
/// undetectable are dropped and counted.
pub fn acquire<T: Real, R: Rng + ?Sized>(
    rig: &RigConfig<T>,
    t: &[T],
    true_u: &[T],
    true_v: &[T],
    true_heading: T,
    nominal_heading: T,
    rng: &mut R,
) -> Result<(VelocitySampleSeries<T>, usize)> {
    if t.len() != true_u.len() || t.len() != true_v.len() {
        return Err(Error::Argument("velocity series and time grid differ in length".into()));
    }
    let mut out = VelocitySampleSeries::default();
    let mut dropped = 0;
    for k in 0..t.len() {
        let mut reading = simulate_reading_with(rig, (true_u[k], true_v[k]), true_heading, t[k], rng);
        reading.beta = nominal_heading;
        let rec = match reconstruct_velocity(rig, &reading) {
            Ok(rec) => rec,
            Err(Error::FlowUndetectable { .. }) => {
                dropped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let (nu, nv) = sensor_noise_variances(rig, rec.j, rec.l, nominal_heading)?;
        out.t.push(t[k]);
        out.u.push(rec.u);
        out.v.push(rec.v);
        out.noise_u.push(nu);
        out.noise_v.push(nv);
        out.warnings.push(SampleFlags {
            non_adjacent: rec.flags.non_adjacent,
            outside_arc: rec.flags.outside_arc,
            saturated: rec.flags.saturated,
        });
    }
    Ok((out, dropped))
}

/// Mean computed relative to the first sample, so a constant series returns its value exactly.
fn mean<T: Real>(y: &[T]) -> T {
    match y.first() {
        None => T::zero(),
        Some(&y0) => y0 + y.iter().map(|&a| a - y0).sum::<T>() / T::from_usize_lossy(y.len()),
    }
}

fn lag_product<T: Real>(y: &[T], ybar: T, lag: usize) -> T {
    let n = T::from_usize_lossy(y.len());
    y.iter().zip(&y[lag..]).map(|(&a, &b)| (a - ybar) * (b - ybar)).sum::<T>() / n
}

/// Biased sample autocovariance for lags `0..=max_lag`; entry 0 is the biased variance.
pub fn sample_autocorrelation<T: Real>(y: &[T], max_lag: usize) -> Result<Vec<T>> {
    if max_lag < 1 || y.len() <= max_lag {
        return Err(Error::Argument(format!("need length > max_lag >= 1, got length {} and max_lag {max_lag}", y.len())));
    }
    let ybar = mean(y);
    Ok((0..=max_lag).map(|l| lag_product(y, ybar, l)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimescaleEstimate<T> {
    pub t_star: T,
    /// First lag with a non-positive autocorrelation, or `max_lag` when truncated.
    pub crossing_lag: usize,
    /// No zero crossing was found within `max_lag`.
    pub truncated: bool,
}

/// Trapezoid rule applied to a normalised autocorrelation sequence that ends at
/// the first non-positive lag `crossing`: `dt * (rho[0]/2 + sum_{l=1}^{crossing-1} (rho[l-1]+rho[l])/2)`.
pub fn integrate_to_crossing<T: Real>(rho: &[T], crossing: usize, dt: T) -> T {
    let half = T::lit(0.5);
    let mut acc = half * rho[0];
    for l in 1..crossing.min(rho.len()) {
        acc += half * (rho[l - 1] + rho[l]);
    }
    dt * acc
}

/// Integral time scale of one sampled component, integrating the normalised
/// autocorrelation up to its first zero crossing. Lags are evaluated lazily.
pub fn estimate_integral_timescale<T: Real>(y: &[T], dt: T, max_lag: usize) -> Result<TimescaleEstimate<T>> {
    if y.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: y.len() });
    }
    let max_lag = max_lag.clamp(1, y.len() - 1);
    let ybar = mean(y);
    let c0 = lag_product(y, ybar, 0);
    if !(c0 > T::zero()) {
        return Err(Error::DegenerateSeries("constant series has no autocorrelation".into()));
    }
    let mut rho = vec![T::one()];
    for l in 1..=max_lag {
        let r = lag_product(y, ybar, l) / c0;
        if r <= T::zero() {
            return Ok(TimescaleEstimate { t_star: integrate_to_crossing(&rho, l, dt), crossing_lag: l, truncated: false });
        }
        rho.push(r);
    }
    Ok(TimescaleEstimate { t_star: integrate_to_crossing(&rho, max_lag + 1, dt), crossing_lag: max_lag, truncated: true })
}

/// Larger of the two component time scales.
pub fn series_timescale<T: Real>(series: &VelocitySampleSeries<T>, max_lag: usize) -> Result<TimescaleEstimate<T>> {
    let dt = series.dt()?;
    let u = estimate_integral_timescale(&series.u, dt, max_lag);
    let v = estimate_integral_timescale(&series.v, dt, max_lag);
    match (u, v) {
        (Ok(a), Ok(b)) => Ok(if b.t_star > a.t_star { b } else { a }),
        (Ok(a), Err(_)) | (Err(_), Ok(a)) => Ok(a),
        (Err(e), Err(_)) => Err(e),
    }
}

/// Stride that spaces samples by at least twice the integral time scale.
pub fn decorrelation_stride<T: Real>(t_star: T, dt: T) -> usize {
    if !(t_star > T::zero()) || !(dt > T::zero()) {
        return 1;
    }
    (T::lit(2.0) * t_star / dt).ceil().to_usize().unwrap_or(usize::MAX).max(1)
}

/// Down-sample to (approximately) independent samples. The flag is set when fewer
/// than two samples survive.
pub fn decorrelate<T: Real>(series: &VelocitySampleSeries<T>, t_star: T) -> Result<(VelocitySampleSeries<T>, bool)> {
    let stride = decorrelation_stride(t_star, series.dt()?);
    let out = series.subsample(stride);
    let short = out.len() < 2;
    Ok((out, short))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleMoments<T> {
    pub mean: T,
    /// Estimated variance of the sample mean, `sample_var / n`.
    pub var_of_mean: T,
    /// Unbiased sample variance.
    pub sample_var: T,
}

pub fn mean_and_variance<T: Real>(y: &[T]) -> Result<SampleMoments<T>> {
    let n = y.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let m = mean(y);
    let ss: T = y.iter().map(|&a| (a - m) * (a - m)).sum();
    let sample_var = ss / T::from_usize_lossy(n - 1);
    Ok(SampleMoments { mean: m, var_of_mean: sample_var / T::from_usize_lossy(n), sample_var })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntensityEstimate<T> {
    pub value: T,
    /// The noise-corrected variance sum was negative and was clamped to zero.
    pub clamped: bool,
}

/// Turbulent intensity from in-plane sample variances with the mean sensor-noise
/// variances removed. The unobserved third component is taken as the average of
/// the two in-plane terms.
pub fn intensity_estimate<T: Real>(var_u: T, var_v: T, noise_u: T, noise_v: T, q_ref: T) -> Result<IntensityEstimate<T>> {
    if !(q_ref > T::zero()) {
        return Err(Error::Argument(format!("q_ref must be positive, got {q_ref}")));
    }
    let planar = (var_u - noise_u) + (var_v - noise_v);
    let total = T::lit(1.5) * planar;
    let clamped = total < T::zero();
    let value = total.max(T::zero()).sqrt() / (T::lit(3.0).sqrt() * q_ref);
    Ok(IntensityEstimate { value, clamped })
}

fn intensity_of<T: Real>(series: &VelocitySampleSeries<T>, q_ref: T) -> Result<IntensityEstimate<T>> {
    let mu = mean_and_variance(&series.u)?;
    let mv = mean_and_variance(&series.v)?;
    intensity_estimate(mu.sample_var, mv.sample_var, mean(&series.noise_u), mean(&series.noise_v), q_ref)
}

/// Variance of the intensity estimator by paired bootstrap: each resample draws the
/// same indices for `u`, `v` and their noise variances.
pub fn bootstrap_intensity_variance<T: Real>(
    series: &VelocitySampleSeries<T>,
    q_ref: T,
    n_b: usize,
    seed: u64,
) -> Result<T> {
    let n = series.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    if n_b < 2 {
        return Err(Error::Argument(format!("need at least 2 bootstrap batches, got {n_b}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut resample = VelocitySampleSeries {
        t: series.t.clone(),
        u: vec![T::zero(); n],
        v: vec![T::zero(); n],
        noise_u: vec![T::zero(); n],
        noise_v: vec![T::zero(); n],
        warnings: Vec::new(),
    };
    let mut values = Vec::with_capacity(n_b);
    for _ in 0..n_b {
        for k in 0..n {
            let idx = rng.random_range(0..n);
            resample.u[k] = series.u[idx];
            resample.v[k] = series.v[idx];
            resample.noise_u[k] = series.noise_u[idx];
            resample.noise_v[k] = series.noise_v[idx];
        }
        values.push(intensity_of(&resample, q_ref)?.value);
    }
    Ok(mean_and_variance(&values)?.sample_var)
}

/// Heading-error variances `(gamma_beta^2 mean(v^2), gamma_beta^2 mean(u^2))`.
pub fn heading_error_variances<T: Real>(u: &[T], v: &[T], gamma_beta: T) -> (T, T) {
    let g2 = gamma_beta * gamma_beta;
    let ms = |y: &[T]| if y.is_empty() { T::zero() } else { y.iter().map(|&a| a * a).sum::<T>() / T::from_usize_lossy(y.len()) };
    (g2 * ms(v), g2 * ms(u))
}

/// Total variance of a mean-velocity measurement. Sensor noise already sits inside
/// the sample variance, so only the heading term is added.
pub fn total_measurement_variance<T: Real>(var_of_mean: T, heading_term: T) -> T {
    var_of_mean + heading_term
}

/// One processed measurement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementRecord<T> {
    pub x: T,
    pub y: T,
    pub heading: T,
    pub n: usize,
    pub y_u: T,
    pub y_v: T,
    pub y_i: T,
    pub var_u_hat: T,
    pub var_v_hat: T,
    pub sensor_var_u: T,
    pub sensor_var_v: T,
    pub heading_var_u: T,
    pub heading_var_v: T,
    pub sigma2_u: T,
    pub sigma2_v: T,
    pub sigma2_i: T,
    pub t_star: T,
    pub t_star_truncated: bool,
    pub intensity_clamped: bool,
    pub warnings: usize,
    pub dropped: usize,
}

impl<T: Real> MeasurementRecord<T> {
    pub fn location(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProcessingParams<T> {
    pub q_ref: T,
    /// Heading error std (rad).
    pub gamma_beta: T,
    pub n_bootstrap: usize,
    pub max_lag: usize,
}

/// Full processing chain for one raw series at nominal location `x` and heading.
pub fn process_measurement<T: Real>(
    raw: &VelocitySampleSeries<T>,
    x: Point2<T>,
    heading: T,
    dropped: usize,
    params: &ProcessingParams<T>,
    bootstrap_seed: u64,
) -> Result<MeasurementRecord<T>> {
    raw.validate()?;
    let ts = match series_timescale(raw, params.max_lag) {
        // a constant series carries no turbulence; every sample is usable
        Err(Error::DegenerateSeries(_)) => TimescaleEstimate { t_star: T::zero(), crossing_lag: 0, truncated: false },
        other => other?,
    };
    let (series, short) = decorrelate(raw, ts.t_star)?;
    if short {
        return Err(Error::InsufficientSamples { needed: 2, got: series.len() });
    }
    let mu = mean_and_variance(&series.u)?;
    let mv = mean_and_variance(&series.v)?;
    let sensor_u = mean(&series.noise_u);
    let sensor_v = mean(&series.noise_v);
    let intensity = intensity_estimate(mu.sample_var, mv.sample_var, sensor_u, sensor_v, params.q_ref)?;
    let sigma2_i = bootstrap_intensity_variance(&series, params.q_ref, params.n_bootstrap, bootstrap_seed)?;
    let (heading_u, heading_v) = heading_error_variances(&series.u, &series.v, params.gamma_beta);
    Ok(MeasurementRecord {
        x: x.x,
        y: x.y,
        heading,
        n: series.len(),
        y_u: mu.mean,
        y_v: mv.mean,
        y_i: intensity.value,
        var_u_hat: mu.var_of_mean,
        var_v_hat: mv.var_of_mean,
        sensor_var_u: sensor_u,
        sensor_var_v: sensor_v,
        heading_var_u: heading_u,
        heading_var_v: heading_v,
        sigma2_u: total_measurement_variance(mu.var_of_mean, heading_u),
        sigma2_v: total_measurement_variance(mv.var_of_mean, heading_v),
        sigma2_i,
        t_star: ts.t_star,
        t_star_truncated: ts.truncated,
        intensity_clamped: intensity.clamped,
        warnings: series.warning_count(),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowsim::{time_grid, FluctuationProcess};
    use proptest::prelude::*;

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| f64::standard_normal(&mut rng)).collect()
    }

    fn ou(n: usize, theta: f64, dt: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = FluctuationProcess::stationary(theta, 1.0, &mut rng);
        (0..n).map(|k| if k == 0 { p.current().0 } else { p.advance(dt, &mut rng).0 }).collect()
    }

    #[test]
    fn dropped_samples_keep_the_step() {
        let t = [0.0f64, 0.01, 0.02, 0.05, 0.06, 0.08];
        assert!((sampling_step(&t).unwrap() - 0.01).abs() < 1e-15);
        assert!(sampling_step(&[0.0f64, 0.01, 0.025]).is_err());
        assert!(sampling_step(&[0.0f64, 0.01, 0.01]).is_err());
    }

    #[test]
    fn autocorrelation_lag_zero_is_biased_variance() {
        let y = [1.0, 4.0, 2.0, 8.0, 5.0];
        let m = y.iter().sum::<f64>() / 5.0;
        let var = y.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 5.0;
        let r = sample_autocorrelation(&y, 2).unwrap();
        assert!((r[0] - var).abs() < 1e-14);
        assert!(sample_autocorrelation(&y, 5).is_err());
    }

    #[test]
    fn white_noise_decorrelates() {
        let y = white(10_000, 3);
        let r = sample_autocorrelation(&y, 1).unwrap();
        assert!((r[1] / r[0]).abs() < 0.05);
    }

    #[test]
    fn ou_autocorrelation_is_exponential() {
        let dt = 1.0 / 67.0;
        let y = ou(100_000, 0.26, dt, 11);
        let r = sample_autocorrelation(&y, 20).unwrap();
        for (l, &rl) in r.iter().enumerate() {
            let expect = (-(l as f64) * dt / 0.26).exp();
            assert!((rl / r[0] - expect).abs() < 0.1, "lag {l}");
        }
    }

    #[test]
    fn quadrature_hand_example() {
        assert!((integrate_to_crossing(&[1.0f64, 0.5], 2, 1.0) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn exponential_autocorrelation_integrates_to_scale() {
        let theta = 0.26;
        let dt = 1e-4;
        let rho: Vec<f64> = (0..40_000).map(|l| (-(l as f64) * dt / theta).exp()).collect();
        let t = integrate_to_crossing(&rho, rho.len(), dt);
        assert!((t - theta).abs() < 0.05 * theta);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let err = estimate_integral_timescale(&[2.0; 50], 0.1, 10).unwrap_err();
        assert!(matches!(err, Error::DegenerateSeries(_)));
    }

    #[test]
    fn truncation_flag() {
        // linear ramp: correlation stays positive for small lags
        let y: Vec<f64> = (0..200).map(|k| k as f64).collect();
        let est = estimate_integral_timescale(&y, 1.0, 5).unwrap();
        assert!(est.truncated);
        assert_eq!(est.crossing_lag, 5);
    }

    #[test]
    fn stride_examples() {
        assert_eq!(decorrelation_stride(0.0, 0.1), 1);
        assert_eq!(decorrelation_stride(0.26, 1.0 / 67.0), 35);
        let s = VelocitySampleSeries::from_velocities(time_grid(10, 0.1), vec![0.0; 10], vec![0.0; 10]).unwrap();
        let (d, short) = decorrelate(&s, 0.0).unwrap();
        assert_eq!(d, s);
        assert!(!short);
        let (d, short) = decorrelate(&s, 100.0).unwrap();
        assert_eq!(d.len(), 1);
        assert!(short);
    }

    #[test]
    fn moments_by_hand() {
        let m = mean_and_variance(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((m.mean, m.sample_var, m.var_of_mean), (1.0, 0.0, 0.0));
        let m = mean_and_variance(&[0.0, 2.0]).unwrap();
        assert_eq!((m.mean, m.sample_var, m.var_of_mean), (1.0, 2.0, 1.0));
        assert!(matches!(mean_and_variance(&[1.0]), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn var_of_mean_scales_with_n() {
        let y: Vec<f64> = white(50_000, 5).iter().map(|z| 3.0 + 2.0 * z).collect();
        let m = mean_and_variance(&y).unwrap();
        assert!((m.var_of_mean * 50_000.0 - 4.0).abs() < 0.2);
    }

    #[test]
    fn intensity_of_isotropic_fluctuations() {
        let q_ref = 0.78;
        let i0 = 0.15;
        let s = q_ref * i0;
        let u: Vec<f64> = white(500, 1).iter().map(|z| 0.5 + s * z).collect();
        let v: Vec<f64> = white(500, 2).iter().map(|z| 0.1 + s * z).collect();
        let mu = mean_and_variance(&u).unwrap();
        let mv = mean_and_variance(&v).unwrap();
        let est = intensity_estimate(mu.sample_var, mv.sample_var, 0.0, 0.0, q_ref).unwrap();
        assert!((est.value - i0).abs() < 0.1 * i0);
        assert_eq!(intensity_estimate(0.0, 0.0, 0.0, 0.0, q_ref).unwrap().value, 0.0);
    }

    #[test]
    fn noise_only_intensity_is_small() {
        let g = 0.017;
        let u: Vec<f64> = white(2000, 8).iter().map(|z| g * z).collect();
        let v: Vec<f64> = white(2000, 9).iter().map(|z| g * z).collect();
        let mu = mean_and_variance(&u).unwrap();
        let mv = mean_and_variance(&v).unwrap();
        let est = intensity_estimate(mu.sample_var, mv.sample_var, g * g, g * g, 0.78).unwrap();
        assert!(est.value < 0.01);
        let est = intensity_estimate(0.5 * g * g, 0.5 * g * g, g * g, g * g, 0.78).unwrap();
        assert!(est.clamped && est.value == 0.0);
    }

    #[test]
    fn bootstrap_constant_and_determinism() {
        let s = VelocitySampleSeries::from_velocities(time_grid(30, 0.5), vec![0.4; 30], vec![0.2; 30]).unwrap();
        assert_eq!(bootstrap_intensity_variance(&s, 0.78, 50, 1).unwrap(), 0.0);
        let s = VelocitySampleSeries::from_velocities(time_grid(100, 0.5), white(100, 4), white(100, 6)).unwrap();
        let a = bootstrap_intensity_variance(&s, 0.78, 200, 42).unwrap();
        let b = bootstrap_intensity_variance(&s, 0.78, 200, 42).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn heading_terms() {
        assert_eq!(heading_error_variances(&[0.3, 0.2], &[0.1, 0.4], 0.0), (0.0, 0.0));
        let g = 5f64.to_radians();
        let (hu, _) = heading_error_variances(&[0.0; 4], &[0.63; 4], g);
        assert!((hu - (g * 0.63).powi(2)).abs() < 1e-15);
        assert!((hu - 3.02e-3).abs() < 1e-5);
        let (a, b) = heading_error_variances(&[0.1, 0.2], &[0.3, 0.5], g);
        let (c, d) = heading_error_variances(&[0.3, 0.5], &[0.1, 0.2], g);
        assert_eq!((a, b), (d, c));
    }

    #[test]
    fn total_variance_examples() {
        assert_eq!(total_measurement_variance(2.5e-4, 0.0), 2.5e-4);
        assert!((total_measurement_variance(1e-4f64, 3e-3) - 3.1e-3).abs() < 1e-15);
        assert_eq!(total_measurement_variance(0.0, 0.0), 0.0);
    }

    #[test]
    fn process_measurement_on_clean_ou() {
        let dt = 1.0 / 67.0;
        let n = 35 * 200;
        let q_ref = 0.78;
        let i0 = 0.12;
        let u: Vec<f64> = ou(n, 0.26, dt, 1).iter().map(|e| 0.4 + q_ref * i0 * e).collect();
        let v: Vec<f64> = ou(n, 0.26, dt, 2).iter().map(|e| -0.2 + q_ref * i0 * e).collect();
        let raw = VelocitySampleSeries::from_velocities(time_grid(n, dt), u, v).unwrap();
        let params = ProcessingParams { q_ref, gamma_beta: 0.0, n_bootstrap: 100, max_lag: 400 };
        let rec = process_measurement(&raw, Point2::new(0.5, 0.5), 0.0, 0, &params, 3).unwrap();
        assert!(rec.n >= 100);
        assert!((rec.y_u - 0.4).abs() < 0.05);
        assert!((rec.y_i - i0).abs() < 0.2 * i0);
        assert_eq!(rec.sigma2_u, rec.var_u_hat);
        assert!((rec.t_star - 0.26).abs() < 0.1);
    }

    proptest! {
        #[test]
        fn moments_are_nonnegative(y in proptest::collection::vec(-10.0f64..10.0, 2..60)) {
            let m = mean_and_variance(&y).unwrap();
            prop_assert!(m.sample_var >= 0.0 && m.var_of_mean >= 0.0);
            prop_assert!((m.var_of_mean * y.len() as f64 - m.sample_var).abs() <= 1e-12 * (1.0 + m.sample_var));
        }

        #[test]
        fn intensity_is_nonnegative(vu in 0.0f64..1.0, vv in 0.0f64..1.0, nu in 0.0f64..1.0, nv in 0.0f64..1.0) {
            let est = intensity_estimate(vu, vv, nu, nv, 0.78).unwrap();
            prop_assert!(est.value >= 0.0);
            prop_assert_eq!(est.clamped, vu + vv - nu - nv < 0.0);
        }

        #[test]
        fn timescale_is_nonnegative(seed in 0u64..1000) {
            let y = white(300, seed);
            let est = estimate_integral_timescale(&y, 0.1, 50).unwrap();
            prop_assert!(est.t_star > 0.0);
            let r = sample_autocorrelation(&y, 1).unwrap();
            prop_assert!(r[0] > 0.0);
        }
    }
}
