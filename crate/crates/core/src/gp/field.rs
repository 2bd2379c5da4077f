use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::Point2;
use crate::gp::kernel::Kernel;
use crate::linalg::Cholesky;
use crate::scalar::Real;

/// One absorbed measurement: value `y` at `x`, the effective prior mean `mean`
/// used for the residual, and the variance `noise` added to the kernel diagonal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation<T> {
    pub x: Point2<T>,
    pub y: T,
    pub mean: T,
    pub noise: T,
}

/// Query points whose posterior moments are kept current as measurements arrive.
#[derive(Clone, Debug)]
struct Tracked<T> {
    points: Vec<Point2<T>>,
    aux: Vec<T>,
    mean: Vec<T>,
    var: Vec<T>,
    /// Row `i` holds `(L^{-1} K_{XQ})[i, :]`.
    w: Vec<Vec<T>>,
}

/// Gaussian process over a scalar field, conditioned on a growing set of measurements.
#[derive(Clone)]
pub struct GaussianField<T: Real> {
    prior_mean: Arc<dyn ScalarField<T>>,
    kernel: Kernel<T>,
    obs: Vec<Observation<T>>,
    aux: Vec<T>,
    diag: Vec<T>,
    chol: Cholesky<T>,
    /// `L^{-1} (y - mean)`.
    alpha: Vec<T>,
    tracked: Option<Tracked<T>>,
}

fn half_ln_two_pi<T: Real>() -> T {
    T::lit(0.5) * (T::lit(2.0) * T::PI()).ln()
}

impl<T: Real> GaussianField<T> {
    pub fn new(prior_mean: Arc<dyn ScalarField<T>>, kernel: Kernel<T>) -> Self {
        Self {
            prior_mean,
            kernel,
            obs: Vec::new(),
            aux: Vec::new(),
            diag: Vec::new(),
            chol: Cholesky::new(),
            alpha: Vec::new(),
            tracked: None,
        }
    }

    /// Condition on `obs` in one dense factorisation.
    pub fn from_batch(
        prior_mean: Arc<dyn ScalarField<T>>,
        kernel: Kernel<T>,
        obs: &[Observation<T>],
        tracked: &[Point2<T>],
    ) -> Result<Self> {
        let mut f = Self::new(prior_mean, kernel);
        for (i, a) in obs.iter().enumerate() {
            if obs[..i].iter().any(|b| b.x == a.x) {
                return Err(Error::DuplicateLocation { x: a.x.x.as_f64(), y: a.x.y.as_f64() });
            }
        }
        f.aux = obs.iter().map(|o| f.kernel.aux(o.x)).collect();
        f.diag = obs.iter().zip(&f.aux).map(|(o, &a)| f.kernel.eval_aux(o.x, a, o.x, a) + o.noise).collect();
        let k = |i: usize, j: usize| {
            if i == j {
                f.diag[i]
            } else {
                f.kernel.eval_aux(obs[i].x, f.aux[i], obs[j].x, f.aux[j])
            }
        };
        f.chol = Cholesky::factor(obs.len(), k).map_err(|e| f.ill_conditioned(obs, e.index))?;
        f.obs = obs.to_vec();
        let resid: Vec<T> = obs.iter().map(|o| o.y - o.mean).collect();
        f.alpha = f.chol.forward_solve(&resid);
        if !tracked.is_empty() {
            f.track(tracked);
        }
        Ok(f)
    }

    fn ill_conditioned(&self, obs: &[Observation<T>], index: usize) -> Error {
        let a = obs[index].x;
        let b = obs[..index]
            .iter()
            .map(|o| o.x)
            .min_by(|p, q| p.dist2(a).partial_cmp(&q.dist2(a)).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(a);
        Error::IllConditioned { a_x: a.x.as_f64(), a_y: a.y.as_f64(), b_x: b.x.as_f64(), b_y: b.y.as_f64() }
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }

    pub fn prior_mean_field(&self) -> &Arc<dyn ScalarField<T>> {
        &self.prior_mean
    }

    pub fn observations(&self) -> &[Observation<T>] {
        &self.obs
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn prior_mean(&self, x: Point2<T>) -> T {
        self.prior_mean.value(x)
    }

    pub fn prior_variance(&self, x: Point2<T>) -> T {
        self.kernel.variance(x)
    }

    fn cross(&self, x: Point2<T>, ax: T) -> Vec<T> {
        self.obs.iter().zip(&self.aux).map(|(o, &a)| self.kernel.eval_aux(o.x, a, x, ax)).collect()
    }

    /// Posterior mean and latent variance at `x`.
    pub fn predict(&self, x: Point2<T>) -> (T, T) {
        let ax = self.kernel.aux(x);
        let mut w = self.cross(x, ax);
        let prior_var = self.kernel.eval_aux(x, ax, x, ax);
        let mean0 = self.prior_mean.value(x);
        if w.iter().all(|&k| k == T::zero()) {
            return (mean0, prior_var);
        }
        self.chol.forward_solve_in_place(&mut w);
        let mean = mean0 + w.iter().zip(&self.alpha).map(|(&a, &b)| a * b).sum::<T>();
        let var = prior_var - w.iter().map(|&a| a * a).sum::<T>();
        (mean, var.max(T::zero()))
    }

    pub fn condition(&self, queries: &[Point2<T>]) -> Vec<(T, T)> {
        queries.iter().map(|&q| self.predict(q)).collect()
    }

    fn check_new(&self, x: Point2<T>) -> Result<()> {
        if self.obs.iter().any(|o| o.x == x) {
            return Err(Error::DuplicateLocation { x: x.x.as_f64(), y: x.y.as_f64() });
        }
        Ok(())
    }

    /// Predictive mean and variance of a noisy measurement described by `obs`.
    pub fn predictive(&self, obs: &Observation<T>) -> Result<(T, T)> {
        self.check_new(obs.x)?;
        let ax = self.kernel.aux(obs.x);
        let k = self.cross(obs.x, ax);
        let l = self.chol.forward_solve(&k);
        let mean = obs.mean + l.iter().zip(&self.alpha).map(|(&a, &b)| a * b).sum::<T>();
        let var = self.kernel.eval_aux(obs.x, ax, obs.x, ax) + obs.noise - l.iter().map(|&a| a * a).sum::<T>();
        Ok((mean, var))
    }

    /// Absorb one measurement and return its log predictive density given the
    /// measurements absorbed before it.
    pub fn absorb(&mut self, obs: Observation<T>) -> Result<T> {
        self.check_new(obs.x)?;
        let ax = self.kernel.aux(obs.x);
        let k = self.cross(obs.x, ax);
        let mut diag = self.kernel.eval_aux(obs.x, ax, obs.x, ax) + obs.noise;
        let (l, d) = match self.chol.extension(&k, diag) {
            Ok(ext) => ext,
            Err(_) => {
                let n = T::from_usize_lossy(self.diag.len() + 1);
                let jitter = T::lit(1e-10) * (self.diag.iter().copied().sum::<T>() + diag) / n;
                log::warn!("covariance not positive definite at ({}, {}); adding jitter {jitter}", obs.x.x, obs.x.y);
                diag += jitter;
                self.chol.extension(&k, diag).map_err(|_| {
                    let mut all = self.obs.clone();
                    all.push(obs);
                    self.ill_conditioned(&all, all.len() - 1)
                })?
            }
        };
        let resid = obs.y - obs.mean - l.iter().zip(&self.alpha).map(|(&a, &b)| a * b).sum::<T>();
        let alpha_new = resid / d;

        if let Some(tr) = self.tracked.as_mut() {
            let mut w_new: Vec<T> = tr
                .points
                .iter()
                .zip(&tr.aux)
                .map(|(&q, &aq)| self.kernel.eval_aux(obs.x, ax, q, aq))
                .collect();
            for (li, wi) in l.iter().zip(&tr.w) {
                if *li != T::zero() {
                    for (wn, &w) in w_new.iter_mut().zip(wi) {
                        *wn -= *li * w;
                    }
                }
            }
            for (q, wn) in w_new.iter_mut().enumerate() {
                *wn /= d;
                tr.mean[q] += *wn * alpha_new;
                tr.var[q] -= *wn * *wn;
            }
            tr.w.push(w_new);
        }

        self.chol.push_row(l, d);
        self.alpha.push(alpha_new);
        self.obs.push(Observation { noise: diag - self.kernel.eval_aux(obs.x, ax, obs.x, ax), ..obs });
        self.aux.push(ax);
        self.diag.push(diag);
        Ok(-d.ln() - half_ln_two_pi::<T>() - T::lit(0.5) * alpha_new * alpha_new)
    }

    /// Joint log density of a batch under the current predictive distribution,
    /// leaving the field unchanged.
    pub fn log_predictive_density(&self, batch: &[Observation<T>]) -> Result<T> {
        let mut scratch = Self {
            prior_mean: self.prior_mean.clone(),
            kernel: self.kernel.clone(),
            obs: self.obs.clone(),
            aux: self.aux.clone(),
            diag: self.diag.clone(),
            chol: self.chol.clone(),
            alpha: self.alpha.clone(),
            tracked: None,
        };
        let mut total = T::zero();
        for &o in batch {
            total += scratch.absorb(o)?;
        }
        Ok(total)
    }

    /// Log marginal likelihood of every absorbed measurement.
    pub fn log_marginal_likelihood(&self) -> T {
        let n = T::from_usize_lossy(self.obs.len());
        -T::lit(0.5) * self.alpha.iter().map(|&a| a * a).sum::<T>() - T::lit(0.5) * self.chol.log_det() - n * half_ln_two_pi::<T>()
    }

    /// Start tracking posterior moments at `points` (replaces any previous set).
    pub fn track(&mut self, points: &[Point2<T>]) {
        let aux: Vec<T> = points.iter().map(|&p| self.kernel.aux(p)).collect();
        let nq = points.len();
        let n = self.obs.len();
        let mut w = vec![vec![T::zero(); nq]; n];
        let mut mean: Vec<T> = points.iter().map(|&p| self.prior_mean.value(p)).collect();
        let mut var: Vec<T> = points.iter().zip(&aux).map(|(&p, &a)| self.kernel.eval_aux(p, a, p, a)).collect();
        for q in 0..nq {
            let mut col = self.cross(points[q], aux[q]);
            if col.iter().all(|&k| k == T::zero()) {
                continue;
            }
            self.chol.forward_solve_in_place(&mut col);
            for i in 0..n {
                w[i][q] = col[i];
                mean[q] += col[i] * self.alpha[i];
                var[q] -= col[i] * col[i];
            }
        }
        self.tracked = Some(Tracked { points: points.to_vec(), aux, mean, var, w });
    }

    pub fn tracked_points(&self) -> &[Point2<T>] {
        self.tracked.as_ref().map_or(&[], |t| &t.points)
    }

    pub fn tracked_mean(&self) -> &[T] {
        self.tracked.as_ref().map_or(&[], |t| &t.mean)
    }

    /// Latent posterior variances at the tracked points, clamped at zero.
    pub fn tracked_variance(&self) -> Vec<T> {
        self.tracked.as_ref().map_or(Vec::new(), |t| t.var.iter().map(|&v| v.max(T::zero())).collect())
    }

    pub fn tracked_variance_at(&self, q: usize) -> T {
        self.tracked.as_ref().map_or(T::zero(), |t| t.var[q].max(T::zero()))
    }

    pub fn tracked_mean_at(&self, q: usize) -> T {
        self.tracked.as_ref().map_or(T::zero(), |t| t.mean[q])
    }
}
