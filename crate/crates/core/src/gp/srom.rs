use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::gp::field::{GaussianField, Observation};
use crate::scalar::Real;

/// Weighted sample set standing in for the Gaussian location error around a
/// nominal point. The first sample is the nominal location.
#[derive(Clone, Debug, PartialEq)]
pub struct LocationSrom<T> {
    pub samples: Vec<Point2<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> LocationSrom<T> {
    pub fn new(samples: Vec<Point2<T>>, weights: Vec<T>) -> Result<Self> {
        if samples.is_empty() || samples.len() != weights.len() {
            return Err(Error::Argument("SROM needs as many weights as samples, and at least one".into()));
        }
        if weights.iter().any(|&w| !(w > T::zero())) {
            return Err(Error::Argument("SROM weights must be positive".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::Argument(format!("SROM weights sum to {total}, not 1")));
        }
        Ok(Self { samples, weights })
    }

    /// SROM for an isotropic Gaussian error with std `gamma` per axis.
    ///
    /// With `n == 1` the nominal point carries all the mass. Otherwise the nominal
    /// point keeps weight 1/2 and the remaining `n - 1 >= 3` samples sit evenly on a
    /// circle of radius `2 gamma`, which reproduces the mean, the covariance
    /// `gamma^2 I` and the fourth radial moment `8 gamma^4` of the Gaussian.
    pub fn gaussian(x0: Point2<T>, gamma: T, n: usize) -> Result<Self> {
        if n == 1 || gamma == T::zero() {
            return Self::new(vec![x0], vec![T::one()]);
        }
        if n < 4 {
            return Err(Error::Argument(format!("SROM size must be 1 or at least 4, got {n}")));
        }
        if !(gamma > T::zero()) {
            return Err(Error::Argument(format!("location std must be non-negative, got {gamma}")));
        }
        let ring = n - 1;
        let r = T::lit(2.0) * gamma;
        let w = T::lit(0.5) / T::from_usize_lossy(ring);
        let mut samples = vec![x0];
        let mut weights = vec![T::lit(0.5)];
        for k in 0..ring {
            let a = T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(ring);
            samples.push(x0 + Point2::new(r * a.cos(), r * a.sin()));
            weights.push(w);
        }
        Self::new(samples, weights)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn nominal(&self) -> Point2<T> {
        self.samples[0]
    }
}

/// Gaussian surrogate of a measurement whose location is uncertain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocationMarginal<T> {
    /// Effective prior mean at the measurement.
    pub mean: T,
    /// Full moment-matched variance of the measurement.
    pub variance: T,
    /// Variance added on top of the prior kernel at the nominal point, clamped at zero.
    pub noise: T,
}

impl<T: Real> LocationMarginal<T> {
    pub fn observation(&self, x: Point2<T>, y: T) -> Observation<T> {
        Observation { x, y, mean: self.mean, noise: self.noise }
    }
}

/// Moment-match the mixture over SROM samples of the prior predictive with
/// measurement variance `sigma2_hat` at every sample.
pub fn marginalize_location<T: Real>(field: &GaussianField<T>, srom: &LocationSrom<T>, sigma2_hat: T) -> LocationMarginal<T> {
    let means: Vec<T> = srom.samples.iter().map(|&x| field.prior_mean(x)).collect();
    let mean: T = srom.weights.iter().zip(&means).map(|(&p, &m)| p * m).sum();
    let variance: T = srom
        .samples
        .iter()
        .zip(&srom.weights)
        .zip(&means)
        .map(|((&x, &p), &m)| p * (field.prior_variance(x) + sigma2_hat + (m - mean) * (m - mean)))
        .sum();
    let noise = (variance - field.prior_variance(srom.nominal())).max(T::zero());
    LocationMarginal { mean, variance, noise }
}
