use crate::error::{Error, Result};
use crate::scalar::Real;

/// Mean and variance of a finite Gaussian mixture: the weighted mean, and the mean
/// of the component variances plus the variance of the component means.
pub fn mixture_moments<T: Real>(means: &[T], variances: &[T], weights: &[T]) -> Result<(T, T)> {
    if means.len() != weights.len() || variances.len() != weights.len() || weights.is_empty() {
        return Err(Error::Argument("mixture components and weights differ in length".into()));
    }
    let total: T = weights.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-9) || weights.iter().any(|&w| w < T::zero()) {
        return Err(Error::Argument(format!("mixture weights must form a distribution, sum is {total}")));
    }
    Ok(mixture_moments_unchecked(means, variances, weights))
}

/// As [`mixture_moments`] without validating the weights.
#[inline]
pub fn mixture_moments_unchecked<T: Real>(means: &[T], variances: &[T], weights: &[T]) -> (T, T) {
    let mut mean = T::zero();
    for (&p, &m) in weights.iter().zip(means) {
        mean += p * m;
    }
    let mut var = T::zero();
    for ((&p, &m), &v) in weights.iter().zip(means).zip(variances) {
        var += p * (v + (m - mean) * (m - mean));
    }
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_component() {
        assert_eq!(mixture_moments(&[0.3], &[0.2], &[1.0]).unwrap(), (0.3, 0.2));
    }

    #[test]
    fn symmetric_pair() {
        assert_eq!(mixture_moments(&[-1.0, 1.0], &[0.0, 0.0], &[0.5, 0.5]).unwrap(), (0.0, 1.0));
        assert!(mixture_moments(&[-1.0, 1.0], &[0.0, 0.0], &[0.5, 0.6]).is_err());
    }

    proptest! {
        #[test]
        fn variance_at_least_mean_component_variance(
            m in proptest::collection::vec(-2.0f64..2.0, 3),
            v in proptest::collection::vec(0.0f64..1.0, 3),
            w in proptest::collection::vec(0.01f64..1.0, 3),
        ) {
            let s: f64 = w.iter().sum();
            let w: Vec<f64> = w.iter().map(|x| x / s).collect();
            let (_, var) = mixture_moments(&m, &v, &w).unwrap();
            let within: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
            prop_assert!(var >= within - 1e-12);
        }
    }
}
