use crate::ensemble::ModelFields;
use crate::geometry::Point2;
use crate::scalar::Real;

/// Probability-weighted product of posterior `u` and `v` variances at `x`. The
/// product is a monotone transform of the expected joint entropy of a new
/// velocity measurement there.
pub fn entropy_gain<T: Real>(fields: &[ModelFields<T>], p: &[T], x: Point2<T>) -> T {
    fields
        .iter()
        .zip(p)
        .filter(|(_, &pj)| pj > T::zero())
        .map(|(f, &pj)| pj * f.u.predict(x).1 * f.v.predict(x).1)
        .sum()
}

/// [`entropy_gain`] for the first `n` tracked points of every field.
pub fn entropy_gains_tracked<T: Real>(fields: &[ModelFields<T>], p: &[T], n: usize) -> Vec<T> {
    let mut gains = vec![T::zero(); n];
    for (f, &pj) in fields.iter().zip(p) {
        if pj <= T::zero() {
            continue;
        }
        for (q, g) in gains.iter_mut().enumerate() {
            *g += pj * f.u.tracked_variance_at(q) * f.v.tracked_variance_at(q);
        }
    }
    gains
}
