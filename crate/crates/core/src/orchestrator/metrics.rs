use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ensemble::ModelEnsemble;
use crate::error::{Error, Result};
use crate::field::Property;
use crate::gp::mixture::mixture_moments_unchecked;

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of an independent random stream derived from a run seed.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, stream))
}

/// Posterior means of every model and property on an evaluation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    /// `means[j][p]` holds model `j`, property `p` in (u, v, i) order.
    pub means: Vec<[Vec<f64>; 3]>,
}

impl Snapshot {
    /// Means at the first `n` tracked points of every field.
    pub fn from_ensemble(ensemble: &ModelEnsemble<f64>, n: usize) -> Self {
        let means = ensemble
            .fields()
            .iter()
            .map(|f| Property::ALL.map(|p| f.get(p).tracked_mean()[..n].to_vec()))
            .collect();
        Self { means }
    }

    pub fn grid_len(&self) -> usize {
        self.means.first().map_or(0, |m| m[0].len())
    }
}

/// Probability-weighted sum over models of the grid-mean absolute change of the
/// u, v and intensity posterior means.
pub fn convergence_delta(previous: &Snapshot, current: &Snapshot, p: &[f64]) -> Result<f64> {
    if previous.means.len() != current.means.len() || p.len() != current.means.len() {
        return Err(Error::GridMismatch(format!(
            "{} and {} models in the snapshots, {} probabilities",
            previous.means.len(),
            current.means.len(),
            p.len()
        )));
    }
    let n = current.grid_len();
    if n == 0 || previous.grid_len() != n {
        return Err(Error::GridMismatch(format!("snapshot grids have {} and {n} points", previous.grid_len())));
    }
    let mut d = 0.0;
    for ((a, b), &pj) in previous.means.iter().zip(&current.means).zip(p) {
        if pj == 0.0 {
            continue;
        }
        for k in 0..3 {
            if a[k].len() != n || b[k].len() != n {
                return Err(Error::GridMismatch("ragged snapshot".into()));
            }
            let s: f64 = a[k].iter().zip(&b[k]).map(|(x, y)| (x - y).abs()).sum();
            d += pj * s / n as f64;
        }
    }
    Ok(d)
}

/// Mean absolute prediction errors per property and their average.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PredictionError {
    pub e_u: f64,
    pub e_v: f64,
    pub e_i: f64,
    pub e: f64,
}

/// Mean absolute error of predicted (u, v, i) against reference values.
pub fn evaluate_prediction(predicted: &[[f64; 3]], reference: &[[f64; 3]]) -> Result<PredictionError> {
    if predicted.len() != reference.len() || predicted.is_empty() {
        return Err(Error::Argument(format!("{} predictions for {} reference values", predicted.len(), reference.len())));
    }
    let n = predicted.len() as f64;
    let mut e = [0.0; 3];
    for (a, b) in predicted.iter().zip(reference) {
        for k in 0..3 {
            e[k] += (a[k] - b[k]).abs();
        }
    }
    let [e_u, e_v, e_i] = e.map(|x| x / n);
    Ok(PredictionError { e_u, e_v, e_i, e: (e_u + e_v + e_i) / 3.0 })
}

/// Mixture mean and variance of each property at tracked point `q`.
pub fn mixture_at(ensemble: &ModelEnsemble<f64>, p: &[f64], q: usize) -> [(f64, f64); 3] {
    Property::ALL.map(|prop| {
        let means: Vec<f64> = ensemble.fields().iter().map(|f| f.get(prop).tracked_mean_at(q)).collect();
        let vars: Vec<f64> = ensemble.fields().iter().map(|f| f.get(prop).tracked_variance_at(q)).collect();
        mixture_moments_unchecked(&means, &vars, p)
    })
}

/// Fraction of measurements within one predictive standard deviation, per property.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Coverage {
    pub u: f64,
    pub v: f64,
    pub i: f64,
}

impl Coverage {
    pub fn min(&self) -> f64 {
        self.u.min(self.v).min(self.i)
    }
}

/// Coverage of `measured` by `predictive` (mean, variance) plus the measurement
/// noise variance `noise` (pass zeros for the latent bound).
pub fn uncertainty_calibration(predictive: &[[(f64, f64); 3]], measured: &[[f64; 3]], noise: &[[f64; 3]]) -> Result<Coverage> {
    if predictive.len() != measured.len() || noise.len() != measured.len() || measured.is_empty() {
        return Err(Error::Argument("coverage inputs differ in length".into()));
    }
    let mut hits = [0usize; 3];
    for ((pr, y), s2) in predictive.iter().zip(measured).zip(noise) {
        for k in 0..3 {
            let sd = (pr[k].1 + s2[k]).max(0.0).sqrt();
            if (y[k] - pr[k].0).abs() <= sd {
                hits[k] += 1;
            }
        }
    }
    let n = measured.len() as f64;
    Ok(Coverage { u: hits[0] as f64 / n, v: hits[1] as f64 / n, i: hits[2] as f64 / n })
}

/// Least-squares slope of `y` against `x`.
pub fn trend_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}
