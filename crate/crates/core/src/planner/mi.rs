use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::Point2;
use crate::gp::{assemble_covariance, CovarianceMode, GaussianField, Kernel, Observation};
use crate::scalar::Real;

/// One model's contribution to the mutual-information objective.
pub struct MiModel<T: Real> {
    pub weight: T,
    pub kernel: Kernel<T>,
    /// Predicted measurement noise variance at each point of the grid.
    pub noise: Vec<T>,
}

struct MiState<T: Real> {
    weight: T,
    noise: Vec<T>,
    /// Posterior given the selected set, tracked over the grid.
    selected: GaussianField<T>,
    /// Inverse covariance of the noisy unselected set, dense row-major.
    precision: Vec<T>,
}

/// Greedy mutual-information planner over a fixed grid. The gain of a grid point
/// `x` is `sum_j w_j * 0.5 * ln(Var_j(x | selected) / Var_j(x | unselected \ x))`
/// for noisy measurements, which is the increase of the mutual information between
/// the selected and the unselected parts of the grid.
pub struct MiPlanner<T: Real> {
    points: Vec<Point2<T>>,
    active: Vec<bool>,
    models: Vec<MiState<T>>,
}

impl<T: Real> MiPlanner<T> {
    pub fn new(points: Vec<Point2<T>>, models: Vec<MiModel<T>>) -> Result<Self> {
        let n = points.len();
        let mut states = Vec::with_capacity(models.len());
        for m in models {
            if m.noise.len() != n {
                return Err(Error::Argument(format!("{} noise values for a {n}-point grid", m.noise.len())));
            }
            if m.weight <= T::zero() {
                continue;
            }
            let cov = assemble_covariance(&m.kernel, &points, CovarianceMode::Measurement(&m.noise))?;
            let chol = cov.cholesky().map_err(|e| {
                let a = points[e.index];
                Error::IllConditioned { a_x: a.x.as_f64(), a_y: a.y.as_f64(), b_x: a.x.as_f64(), b_y: a.y.as_f64() }
            })?;
            let zero: Arc<dyn ScalarField<T>> = Arc::new(|_p: Point2<T>| T::zero());
            let mut selected = GaussianField::new(zero, m.kernel);
            selected.track(&points);
            states.push(MiState { weight: m.weight, noise: m.noise, selected, precision: chol.inverse() });
        }
        Ok(Self { points, active: vec![true; n], models: states })
    }

    pub fn points(&self) -> &[Point2<T>] {
        &self.points
    }

    pub fn is_active(&self, q: usize) -> bool {
        self.active[q]
    }

    /// Gain at grid point `q`, `None` when `q` is already selected or the
    /// conditional variance given the unselected points vanishes.
    pub fn gain(&self, q: usize) -> Option<T> {
        if !self.active[q] {
            return None;
        }
        let n = self.points.len();
        let mut total = T::zero();
        for m in &self.models {
            let p = m.precision[q * n + q];
            let denom = T::one() / p;
            if !(denom > T::lit(1e-14)) || !denom.is_finite() {
                return None;
            }
            let num = m.selected.tracked_variance_at(q) + m.noise[q];
            total += m.weight * T::lit(0.5) * (num / denom).ln();
        }
        Some(total)
    }

    pub fn gains(&self) -> Vec<Option<T>> {
        (0..self.points.len()).map(|q| self.gain(q)).collect()
    }

    /// Move grid point `r` from the unselected to the selected set.
    pub fn select(&mut self, r: usize) -> Result<()> {
        if !self.active[r] {
            return Err(Error::Argument(format!("grid point {r} is already selected")));
        }
        let n = self.points.len();
        for m in &mut self.models {
            let prr = m.precision[r * n + r];
            let col: Vec<T> = (0..n).map(|i| m.precision[i * n + r]).collect();
            for i in 0..n {
                let ci = col[i] / prr;
                if ci == T::zero() {
                    continue;
                }
                let row = &mut m.precision[i * n..(i + 1) * n];
                for (x, &cj) in row.iter_mut().zip(&col) {
                    *x -= ci * cj;
                }
            }
            let x = self.points[r];
            m.selected.absorb(Observation { x, y: T::zero(), mean: T::zero(), noise: m.noise[r] })?;
        }
        self.active[r] = false;
        Ok(())
    }
}
