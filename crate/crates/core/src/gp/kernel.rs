use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::Point2;
use crate::linalg::SparseSym;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams<T> {
    /// Confidence std of the prior model, in field units.
    pub sigma0: T,
    /// Correlation length (m); the kernel vanishes beyond it.
    pub length: T,
    /// Nominal sample count scaling the turbulence term.
    pub n0: T,
    /// Reference speed (m/s).
    pub q_ref: T,
}

impl<T: Real> KernelParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 >= T::zero()) {
            return Err(Error::Argument(format!("sigma0 must be non-negative, got {}", self.sigma0)));
        }
        if !(self.length > T::zero()) {
            return Err(Error::Argument(format!("correlation length must be positive, got {}", self.length)));
        }
        if !(self.n0 >= T::one()) {
            return Err(Error::Argument(format!("n0 must be at least 1, got {}", self.n0)));
        }
        if !(self.q_ref > T::zero()) {
            return Err(Error::Argument(format!("q_ref must be positive, got {}", self.q_ref)));
        }
        Ok(())
    }
}

/// `[(1 - d / length)_+]^2`.
#[inline]
pub fn taper<T: Real>(d: T, length: T) -> T {
    let r = T::one() - d / length;
    if r > T::zero() {
        r * r
    } else {
        T::zero()
    }
}

/// Prior covariance between `x` and `x2`. With `intensity = Some((i(x), i(x2)))` the
/// amplitude gains the turbulence term `q_ref^2 i(x) i(x2) / n0` (velocity fields);
/// `None` gives the constant amplitude used for the intensity field.
pub fn prior_kernel<T: Real>(params: &KernelParams<T>, x: Point2<T>, x2: Point2<T>, intensity: Option<(T, T)>) -> T {
    let t = taper(x.dist(x2), params.length);
    if t == T::zero() {
        return T::zero();
    }
    let mut amp = params.sigma0 * params.sigma0;
    if let Some((a, b)) = intensity {
        amp += params.q_ref * params.q_ref * a * b / params.n0;
    }
    amp * t
}

/// Prior kernel bound to the prior model's intensity field (velocity components)
/// or to a constant amplitude (intensity component).
#[derive(Clone)]
pub struct Kernel<T: Real> {
    pub params: KernelParams<T>,
    intensity: Option<Arc<dyn ScalarField<T>>>,
}

impl<T: Real> Kernel<T> {
    pub fn velocity(params: KernelParams<T>, intensity: Arc<dyn ScalarField<T>>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, intensity: Some(intensity) })
    }

    pub fn intensity(params: KernelParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, intensity: None })
    }

    pub fn length(&self) -> T {
        self.params.length
    }

    /// Per-point auxiliary value: the prior intensity for velocity kernels, zero otherwise.
    pub fn aux(&self, x: Point2<T>) -> T {
        self.intensity.as_ref().map_or(T::zero(), |f| f.value(x))
    }

    /// Kernel with precomputed auxiliary values.
    #[inline]
    pub fn eval_aux(&self, x: Point2<T>, ax: T, y: Point2<T>, ay: T) -> T {
        let t = taper(x.dist(y), self.params.length);
        if t == T::zero() {
            return T::zero();
        }
        let p = &self.params;
        let mut amp = p.sigma0 * p.sigma0;
        if self.intensity.is_some() {
            amp += p.q_ref * p.q_ref * ax * ay / p.n0;
        }
        amp * t
    }

    pub fn eval(&self, x: Point2<T>, y: Point2<T>) -> T {
        self.eval_aux(x, self.aux(x), y, self.aux(y))
    }

    pub fn variance(&self, x: Point2<T>) -> T {
        let a = self.aux(x);
        self.eval_aux(x, a, x, a)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum CovarianceMode<'a, T> {
    Prior,
    /// Adds the given per-point noise variances on the diagonal.
    Measurement(&'a [T]),
}

/// Sparse covariance of `points`. Measurement mode rejects coincident points.
pub fn assemble_covariance<T: Real>(kernel: &Kernel<T>, points: &[Point2<T>], mode: CovarianceMode<'_, T>) -> Result<SparseSym<T>> {
    let n = points.len();
    let aux: Vec<T> = points.iter().map(|&p| kernel.aux(p)).collect();
    let noise = match mode {
        CovarianceMode::Prior => None,
        CovarianceMode::Measurement(noise) => {
            if noise.len() != n {
                return Err(Error::Argument(format!("{} noise values for {n} points", noise.len())));
            }
            Some(noise)
        }
    };
    let mut upper = Vec::new();
    for i in 0..n {
        for j in i..n {
            let mut v = kernel.eval_aux(points[i], aux[i], points[j], aux[j]);
            if i == j {
                if let Some(noise) = noise {
                    v += noise[i];
                }
            } else if noise.is_some() && points[i] == points[j] {
                return Err(Error::DuplicateLocation { x: points[i].x.as_f64(), y: points[i].y.as_f64() });
            }
            upper.push((i, j, v));
        }
    }
    SparseSym::from_upper(n, &upper)
}
