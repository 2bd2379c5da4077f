//! Eight-sensor flow rig: forward sensor model with directivity, and recovery
//! of the instantaneous velocity vector from the two strongest readings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct RigConfig<T> {
    /// Sensor axes relative to the robot heading (rad), evenly spaced.
    pub relative_headings: Vec<T>,
    /// Largest off-axis angle with an accurate reading (rad).
    pub accurate_limit: T,
    /// Off-axis angle beyond which a sensor reads nothing (rad).
    pub cutoff: T,
    /// Full-scale error FS (m/s); the noise std is FS / 3.
    pub full_scale_error: T,
    /// Upper end of the sensor range (m/s).
    pub range_max: T,
}

impl<T: Real> RigConfig<T> {
    pub fn new(n_sensors: usize, accurate_limit: T, cutoff: T, full_scale_error: T, range_max: T) -> Result<Self> {
        if n_sensors < 3 {
            return Err(Error::Argument(format!("need at least 3 sensors, got {n_sensors}")));
        }
        if !(accurate_limit > T::zero() && accurate_limit < cutoff && cutoff < T::PI()) {
            return Err(Error::Argument(format!(
                "directivity limits must satisfy 0 < {accurate_limit} < {cutoff} < pi"
            )));
        }
        if !(full_scale_error >= T::zero()) || !(range_max > T::zero()) {
            return Err(Error::Argument("sensor error and range must be non-negative".into()));
        }
        let step = T::TAU() / T::from_usize_lossy(n_sensors);
        let relative_headings = (0..n_sensors).map(|j| step * T::from_usize_lossy(j)).collect();
        Ok(Self { relative_headings, accurate_limit, cutoff, full_scale_error, range_max })
    }

    /// Eight sensors, accurate to 55 degrees, blind past 75 degrees, FS = 0.05 m/s, range 0..1 m/s.
    pub fn standard() -> Self {
        Self::new(8, T::lit(55f64.to_radians()), T::lit(75f64.to_radians()), T::lit(0.05), T::one())
            .expect("standard rig is valid")
    }

    pub fn n_sensors(&self) -> usize {
        self.relative_headings.len()
    }

    /// Sensor noise std, FS / 3.
    pub fn noise_std(&self) -> T {
        self.full_scale_error / T::lit(3.0)
    }

    /// Absolute axis of sensor `j` for robot heading `beta`.
    pub fn sensor_heading(&self, j: usize, beta: T) -> T {
        beta + self.relative_headings[j]
    }

    /// Directivity gain for an off-axis angle: 1 inside the accurate cone, a linear
    /// ramp down to 0 at the cutoff, 0 beyond.
    pub fn directivity(&self, off_axis: T) -> T {
        let a = off_axis.abs();
        if a <= self.accurate_limit {
            T::one()
        } else if a < self.cutoff {
            (self.cutoff - a) / (self.cutoff - self.accurate_limit)
        } else {
            T::zero()
        }
    }

    /// Two sensors are neighbours when their indices differ by one modulo the ring size.
    pub fn adjacent(&self, j: usize, l: usize) -> bool {
        let n = self.n_sensors();
        let d = j.abs_diff(l) % n;
        d == 1 || d == n - 1
    }
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle<T: Real>(a: T) -> T {
    let tau = T::TAU();
    let mut w = a - tau * ((a + T::PI()) / tau).floor();
    if w <= -T::PI() {
        w += tau;
    }
    w
}

#[derive(Clone, Debug, PartialEq)]
pub struct RigReading<T> {
    /// Non-negative sensor outputs (m/s).
    pub s: Vec<T>,
    /// Heading used to interpret the readings (rad).
    pub beta: T,
    pub t: T,
    /// Some sensor hit the top of its range.
    pub saturated: bool,
}

/// One reading of every sensor for the given true velocity and heading.
///
/// Noise is drawn only inside the accurate cone; the roll-off region returns the
/// attenuated noiseless projection. A zero full-scale error disables noise.
pub fn simulate_reading_with<T: Real, R: Rng + ?Sized>(
    cfg: &RigConfig<T>,
    velocity: (T, T),
    beta: T,
    t: T,
    rng: &mut R,
) -> RigReading<T> {
    let (u, v) = velocity;
    let q = u.hypot(v);
    let theta = v.atan2(u);
    let gamma = cfg.noise_std();
    let mut saturated = false;
    let s = (0..cfg.n_sensors())
        .map(|j| {
            let off = wrap_angle(theta - cfg.sensor_heading(j, beta));
            let gain = cfg.directivity(off);
            let mut value = if gain == T::zero() {
                T::zero()
            } else if off.abs() <= cfg.accurate_limit {
                let noise = if gamma > T::zero() { gamma * T::standard_normal(rng) } else { T::zero() };
                q * off.cos() + noise
            } else {
                gain * q * off.cos()
            };
            if value > cfg.range_max {
                saturated = true;
                value = cfg.range_max;
            }
            value.max(T::zero())
        })
        .collect();
    RigReading { s, beta, t, saturated }
}

pub fn simulate_reading<T: Real>(cfg: &RigConfig<T>, velocity: (T, T), beta: T, noise_seed: u64) -> RigReading<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    simulate_reading_with(cfg, velocity, beta, T::zero(), &mut rng)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReconstructionFlags {
    /// The two strongest sensors are not neighbours.
    pub non_adjacent: bool,
    /// The recovered angle is outside the arc spanned by the two sensor axes.
    pub outside_arc: bool,
    pub saturated: bool,
}

impl ReconstructionFlags {
    pub fn any(&self) -> bool {
        self.non_adjacent || self.outside_arc || self.saturated
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reconstruction<T> {
    pub u: T,
    pub v: T,
    pub q: T,
    pub theta: T,
    /// Strongest and second strongest sensor.
    pub j: usize,
    pub l: usize,
    pub flags: ReconstructionFlags,
}

/// Recover the velocity vector from the two strongest readings.
pub fn reconstruct_velocity<T: Real>(cfg: &RigConfig<T>, reading: &RigReading<T>) -> Result<Reconstruction<T>> {
    if reading.s.len() != cfg.n_sensors() {
        return Err(Error::Argument(format!(
            "reading has {} values for a {}-sensor rig",
            reading.s.len(),
            cfg.n_sensors()
        )));
    }
    let positive = reading.s.iter().filter(|&&s| s > T::zero()).count();
    if positive < 2 {
        return Err(Error::FlowUndetectable { positive });
    }
    // stable descending order keeps the lower index first on ties
    let mut order: Vec<usize> = (0..reading.s.len()).collect();
    order.sort_by(|&a, &b| reading.s[b].partial_cmp(&reading.s[a]).unwrap_or(std::cmp::Ordering::Equal));
    let (j, l) = (order[0], order[1]);

    let bj = cfg.sensor_heading(j, reading.beta);
    let bl = cfg.sensor_heading(l, reading.beta);
    let (sj, sl) = (reading.s[j], reading.s[l]);
    let sin_jl = (bj - bl).sin();
    if sin_jl.abs() <= T::epsilon() {
        return Err(Error::SingularGeometry { first: j, second: l });
    }
    let xi = sin_jl.signum();
    let theta = (xi * (sj * bl.cos() - sl * bj.cos())).atan2(xi * (-sj * bl.sin() + sl * bj.sin()));
    let q = sj / (theta - bj).cos();

    let span = wrap_angle(bl - bj);
    let from_j = wrap_angle(theta - bj);
    let tol = T::epsilon() * T::lit(64.0);
    let inside = if span >= T::zero() {
        from_j >= -tol && from_j <= span + tol
    } else {
        from_j <= tol && from_j >= span - tol
    };

    Ok(Reconstruction {
        u: q * theta.cos(),
        v: q * theta.sin(),
        q,
        theta,
        j,
        l,
        flags: ReconstructionFlags {
            non_adjacent: !cfg.adjacent(j, l),
            outside_arc: !inside,
            saturated: reading.saturated,
        },
    })
}

/// Linearised variances of the recovered `u` and `v` due to sensor noise on
/// sensors `j` and `l`, evaluated at heading `beta`.
pub fn sensor_noise_variances<T: Real>(cfg: &RigConfig<T>, j: usize, l: usize, beta: T) -> Result<(T, T)> {
    let n = cfg.n_sensors();
    if j >= n || l >= n {
        return Err(Error::Argument(format!("sensor index out of range for a {n}-sensor rig")));
    }
    let bj = cfg.sensor_heading(j, beta);
    let bl = cfg.sensor_heading(l, beta);
    let s = (bj - bl).sin();
    if j == l || s.abs() <= T::lit(1e-12) {
        return Err(Error::SingularGeometry { first: j, second: l });
    }
    let a2 = T::one() / (s * s);
    let g2 = cfg.noise_std().powi(2);
    let var_u = a2 * (bj.sin().powi(2) + bl.sin().powi(2)) * g2;
    let var_v = a2 * (bj.cos().powi(2) + bl.cos().powi(2)) * g2;
    Ok((var_u, var_v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn noiseless() -> RigConfig<f64> {
        let mut c = RigConfig::standard();
        c.full_scale_error = 0.0;
        c
    }

    #[test]
    fn standard_noise_std() {
        let c = RigConfig::<f64>::standard();
        assert!((c.noise_std() - 0.05 / 3.0).abs() < 1e-15);
        assert!((c.noise_std() - 0.017).abs() < 5e-4);
    }

    #[test]
    fn aligned_sensor_reads_speed() {
        let c = noiseless();
        let th = 30f64.to_radians();
        // sensor 1 points at 45 deg; rotate the robot so it points at 30 deg
        let r = simulate_reading(&c, (th.cos(), th.sin()), th - c.relative_headings[1], 0);
        assert!((r.s[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn blind_beyond_cutoff() {
        let c = noiseless();
        let th = 80f64.to_radians();
        let r = simulate_reading(&c, (0.5 * th.cos(), 0.5 * th.sin()), 0.0, 0);
        assert_eq!(r.s[0], 0.0);
    }

    #[test]
    fn roll_off_is_linear() {
        let c = noiseless();
        assert_eq!(c.directivity(65f64.to_radians()), 0.5);
        assert_eq!(c.directivity(75f64.to_radians()), 0.0);
        assert_eq!(c.directivity(-40f64.to_radians()), 1.0);
    }

    #[test]
    fn round_trip_thirty_degrees() {
        let c = noiseless();
        let th = 30f64.to_radians();
        let r = simulate_reading(&c, (th.cos(), th.sin()), 0.0, 0);
        let rec = reconstruct_velocity(&c, &r).unwrap();
        assert!((rec.q - 1.0).abs() < 1e-14);
        assert!((rec.theta - th).abs() < 1e-14);
        assert!(!rec.flags.any());
    }

    #[test]
    fn on_axis_tie_break() {
        let c = noiseless();
        let r = simulate_reading(&c, (0.0, 0.6), 0.0, 0);
        let rec = reconstruct_velocity(&c, &r).unwrap();
        assert_eq!(rec.j, 2);
        assert!((rec.q - 0.6).abs() < 1e-12);
        assert!((rec.q * rec.theta.sin() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn non_adjacent_warning() {
        let c = noiseless();
        let mut s = vec![0.0; 8];
        s[0] = 0.5;
        s[3] = 0.4;
        let rec = reconstruct_velocity(&c, &RigReading { s, beta: 0.0, t: 0.0, saturated: false }).unwrap();
        assert!(rec.flags.non_adjacent);
        // wrap-around pair counts as neighbours
        let mut s = vec![0.0; 8];
        s[7] = 0.5;
        s[0] = 0.4;
        let rec = reconstruct_velocity(&c, &RigReading { s, beta: 0.0, t: 0.0, saturated: false }).unwrap();
        assert!(!rec.flags.non_adjacent);
        assert!(!rec.flags.outside_arc);
    }

    #[test]
    fn outside_arc_warning() {
        let c = noiseless();
        // readings inconsistent with any direction between the two axes
        let mut s = vec![0.0; 8];
        s[0] = 0.9;
        s[1] = 0.1;
        let rec = reconstruct_velocity(&c, &RigReading { s, beta: 0.0, t: 0.0, saturated: false }).unwrap();
        assert!(rec.flags.outside_arc);
    }

    #[test]
    fn undetectable_flow() {
        let c = noiseless();
        let mut s = vec![0.0; 8];
        s[4] = 0.3;
        let err = reconstruct_velocity(&c, &RigReading { s, beta: 0.0, t: 0.0, saturated: false }).unwrap_err();
        assert_eq!(err, Error::FlowUndetectable { positive: 1 });
    }

    #[test]
    fn saturation_is_flagged() {
        let c = noiseless();
        let r = simulate_reading(&c, (1.3, 0.0), 0.0, 0);
        assert!(r.saturated);
        assert!(r.s.iter().all(|&s| s <= 1.0));
    }

    #[test]
    fn noise_variances_by_hand() {
        let mut c = RigConfig::<f64>::standard();
        let g2 = c.noise_std().powi(2);
        // sensors 0 and 2 are perpendicular
        let (vu, vv) = sensor_noise_variances(&c, 0, 2, 0.0).unwrap();
        assert!((vu - g2).abs() < 1e-18 && (vv - g2).abs() < 1e-18);
        // 45 degree pair: a^2 = 2, sin^2(45) = 1/2
        let (vu, _) = sensor_noise_variances(&c, 0, 1, 0.0).unwrap();
        assert!((vu - g2).abs() < 1e-15);
        assert!(matches!(sensor_noise_variances(&c, 0, 4, 0.0), Err(Error::SingularGeometry { .. })));
        c.full_scale_error = 0.0;
        assert_eq!(sensor_noise_variances(&c, 0, 1, 0.3).unwrap(), (0.0, 0.0));
    }

    proptest! {
        #[test]
        fn noise_variance_sum_identity(j in 0usize..8, l in 0usize..8, beta in -3.2f64..3.2) {
            prop_assume!(j != l && j.abs_diff(l) != 4);
            let c = RigConfig::<f64>::standard();
            let (vu, vv) = sensor_noise_variances(&c, j, l, beta).unwrap();
            let s = (c.sensor_heading(j, beta) - c.sensor_heading(l, beta)).sin();
            let expected = 2.0 * c.noise_std().powi(2) / (s * s);
            prop_assert!((vu + vv - expected).abs() <= 1e-12 * expected);
        }

        #[test]
        fn noiseless_round_trip(q in 0.05f64..1.0, theta in -3.14f64..3.14, beta in -3.14f64..3.14) {
            let c = noiseless();
            let r = simulate_reading(&c, (q * theta.cos(), q * theta.sin()), beta, 0);
            let rec = reconstruct_velocity(&c, &r).unwrap();
            prop_assert!((rec.u - q * theta.cos()).abs() <= 1e-10 * q);
            prop_assert!((rec.v - q * theta.sin()).abs() <= 1e-10 * q);
            prop_assert!(!rec.flags.non_adjacent && !rec.flags.outside_arc);
        }

        #[test]
        fn wrap_angle_range(a in -50.0f64..50.0) {
            let w = wrap_angle(a);
            prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
            prop_assert!(((a - w) / std::f64::consts::TAU).fract().abs() < 1e-9
                || (1.0 - ((a - w) / std::f64::consts::TAU).fract().abs()) < 1e-9);
        }
    }
}
