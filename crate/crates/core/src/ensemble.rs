//! Discrete set of candidate prior models with posterior model probabilities.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{component, FlowField, Property};
use crate::geometry::Point2;
use crate::gp::{marginalize_location, GaussianField, Kernel, KernelParams, LocationSrom, Observation};
use crate::scalar::Real;
use crate::sigproc::MeasurementRecord;

/// A candidate description of the mean flow with its confidence stds.
#[derive(Clone)]
pub struct PriorModel<T: Real> {
    pub id: String,
    pub flow: Arc<dyn FlowField<T>>,
    /// Confidence std for both velocity components (m/s).
    pub sigma_velocity: T,
    /// Confidence std for the intensity.
    pub sigma_intensity: T,
    pub description: String,
}

/// Kernel settings shared by all models.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleKernel<T> {
    pub length: T,
    pub n0: T,
    pub q_ref: T,
}

/// One Gaussian field per property (u, v, intensity).
#[derive(Clone)]
pub struct ModelFields<T: Real> {
    pub u: GaussianField<T>,
    pub v: GaussianField<T>,
    pub i: GaussianField<T>,
}

impl<T: Real> ModelFields<T> {
    pub fn build(model: &PriorModel<T>, k: &EnsembleKernel<T>) -> Result<Self> {
        if !(model.sigma_velocity >= T::zero() && model.sigma_intensity >= T::zero()) {
            return Err(Error::Argument(format!("model {} has a negative confidence std", model.id)));
        }
        let vel = KernelParams { sigma0: model.sigma_velocity, length: k.length, n0: k.n0, q_ref: k.q_ref };
        let int = KernelParams { sigma0: model.sigma_intensity, ..vel };
        let intensity = component(&model.flow, Property::Intensity);
        Ok(Self {
            u: GaussianField::new(component(&model.flow, Property::U), Kernel::velocity(vel, intensity.clone())?),
            v: GaussianField::new(component(&model.flow, Property::V), Kernel::velocity(vel, intensity.clone())?),
            i: GaussianField::new(intensity, Kernel::intensity(int)?),
        })
    }

    pub fn get(&self, p: Property) -> &GaussianField<T> {
        match p {
            Property::U => &self.u,
            Property::V => &self.v,
            Property::Intensity => &self.i,
        }
    }

    pub fn get_mut(&mut self, p: Property) -> &mut GaussianField<T> {
        match p {
            Property::U => &mut self.u,
            Property::V => &mut self.v,
            Property::Intensity => &mut self.i,
        }
    }

    pub fn track(&mut self, points: &[Point2<T>]) {
        for p in Property::ALL {
            self.get_mut(p).track(points);
        }
    }
}

/// How measurement locations are uncertain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocationError<T> {
    /// Location std per axis (m).
    pub gamma_x: T,
    pub srom_size: usize,
}

fn value_and_variance<T: Real>(rec: &MeasurementRecord<T>, p: Property) -> (T, T) {
    match p {
        Property::U => (rec.y_u, rec.sigma2_u),
        Property::V => (rec.y_v, rec.sigma2_v),
        Property::Intensity => (rec.y_i, rec.sigma2_i),
    }
}

/// Observation of one property for one model's field, after location marginalisation.
pub fn observation_for<T: Real>(
    field: &GaussianField<T>,
    rec: &MeasurementRecord<T>,
    p: Property,
    srom: &LocationSrom<T>,
) -> Observation<T> {
    let (y, var) = value_and_variance(rec, p);
    marginalize_location(field, srom, var).observation(rec.location(), y)
}

/// Posterior probabilities from priors and batch log-likelihoods, normalised in log
/// space. Zero priors stay zero. When every posterior underflows the priors are
/// returned unchanged together with a `true` flag.
pub fn update_probabilities<T: Real>(prior: &[T], log_likelihood: &[T]) -> Result<(Vec<T>, bool)> {
    if prior.len() != log_likelihood.len() {
        return Err(Error::Argument("priors and likelihoods differ in length".into()));
    }
    let logs: Vec<Option<T>> = prior
        .iter()
        .zip(log_likelihood)
        .map(|(&p, &l)| if p > T::zero() && l.is_finite() { Some(p.ln() + l) } else { None })
        .collect();
    let max = logs.iter().flatten().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return Ok((prior.to_vec(), true));
    }
    let w: Vec<T> = logs.iter().map(|l| l.map_or(T::zero(), |l| (l - max).exp())).collect();
    let total: T = w.iter().copied().sum();
    if !(total > T::zero()) || !total.is_finite() {
        return Ok((prior.to_vec(), true));
    }
    Ok((w.into_iter().map(|x| x / total).collect(), false))
}

/// Outcome of absorbing one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchUpdate<T> {
    /// Per-model log-likelihood of the batch, summed over the three properties.
    pub log_likelihood: Vec<T>,
    pub underflow: bool,
}

#[derive(Clone)]
pub struct ModelEnsemble<T: Real> {
    models: Vec<PriorModel<T>>,
    fields: Vec<ModelFields<T>>,
    probabilities: Vec<T>,
    location: LocationError<T>,
}

impl<T: Real> ModelEnsemble<T> {
    pub fn new(models: Vec<PriorModel<T>>, priors: Vec<T>, kernel: EnsembleKernel<T>, location: LocationError<T>) -> Result<Self> {
        if models.is_empty() || models.len() != priors.len() {
            return Err(Error::Argument("need one prior probability per model".into()));
        }
        let total: T = priors.iter().copied().sum();
        if priors.iter().any(|&p| !(p >= T::zero())) || (total - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::Argument(format!("model priors must form a distribution, sum is {total}")));
        }
        if !(location.gamma_x >= T::zero()) || location.srom_size == 0 {
            return Err(Error::Argument("location error needs gamma_x >= 0 and at least one SROM sample".into()));
        }
        let fields = models.iter().map(|m| ModelFields::build(m, &kernel)).collect::<Result<Vec<_>>>()?;
        Ok(Self { models, fields, probabilities: priors, location })
    }

    pub fn uniform(models: Vec<PriorModel<T>>, kernel: EnsembleKernel<T>, location: LocationError<T>) -> Result<Self> {
        let n = models.len();
        let p = vec![T::one() / T::from_usize_lossy(n.max(1)); n];
        Self::new(models, p, kernel, location)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[PriorModel<T>] {
        &self.models
    }

    pub fn fields(&self) -> &[ModelFields<T>] {
        &self.fields
    }

    pub fn probabilities(&self) -> &[T] {
        &self.probabilities
    }

    pub fn track(&mut self, points: &[Point2<T>]) {
        for f in &mut self.fields {
            f.track(points);
        }
    }

    fn srom(&self, x: Point2<T>) -> Result<LocationSrom<T>> {
        LocationSrom::gaussian(x, self.location.gamma_x, self.location.srom_size)
    }

    /// Log-likelihood of `batch` under model `j` given everything absorbed so far.
    pub fn log_marginal_likelihood(&self, j: usize, batch: &[MeasurementRecord<T>]) -> Result<T> {
        if batch.is_empty() {
            return Err(Error::Argument("empty measurement batch".into()));
        }
        let mut total = T::zero();
        for p in Property::ALL {
            let field = self.fields[j].get(p);
            let obs = batch
                .iter()
                .map(|r| Ok(observation_for(field, r, p, &self.srom(r.location())?)))
                .collect::<Result<Vec<_>>>()?;
            total += field.log_predictive_density(&obs)?;
        }
        Ok(total)
    }

    /// Condition every model on `batch` and update the model probabilities.
    pub fn assimilate(&mut self, batch: &[MeasurementRecord<T>]) -> Result<BatchUpdate<T>> {
        if batch.is_empty() {
            return Err(Error::Argument("empty measurement batch".into()));
        }
        let sroms = batch.iter().map(|r| self.srom(r.location())).collect::<Result<Vec<_>>>()?;
        let mut log_likelihood = vec![T::zero(); self.len()];
        for (fields, ll) in self.fields.iter_mut().zip(&mut log_likelihood) {
            for p in Property::ALL {
                let field = fields.get_mut(p);
                for (r, srom) in batch.iter().zip(&sroms) {
                    let obs = observation_for(field, r, p, srom);
                    *ll += field.absorb(obs)?;
                }
            }
        }
        let (p, underflow) = update_probabilities(&self.probabilities, &log_likelihood)?;
        if underflow {
            log::warn!("model likelihoods underflowed; keeping previous probabilities");
        }
        self.probabilities = p;
        Ok(BatchUpdate { log_likelihood, underflow })
    }

    /// Index of the most probable model (lowest index on ties).
    pub fn map_model(&self) -> usize {
        let mut best = 0;
        for (j, &p) in self.probabilities.iter().enumerate() {
            if p > self.probabilities[best] {
                best = j;
            }
        }
        best
    }
}
