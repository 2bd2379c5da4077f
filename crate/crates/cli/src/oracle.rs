//! Brute-force reference computations, independent of the library internals.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(format!("malformed oracle instance: {}", msg.into()))
}

/// Parameters of the compactly supported prior kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub sigma0: f64,
    pub length: f64,
    pub n0: f64,
    pub q_ref: f64,
}

impl KernelSpec {
    /// Covariance between `a` and `b` with intensities `ia`, `ib`.
    pub fn eval(&self, a: [f64; 2], ia: f64, b: [f64; 2], ib: f64) -> f64 {
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let r = 1.0 - d / self.length;
        if r <= 0.0 {
            return 0.0;
        }
        (self.sigma0 * self.sigma0 + self.q_ref * self.q_ref * ia * ib / self.n0) * r * r
    }

    fn check(&self) -> CliResult<()> {
        if !(self.sigma0 >= 0.0 && self.length > 0.0 && self.n0 > 0.0 && self.q_ref > 0.0) {
            return Err(bad("kernel parameters must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpObservation {
    pub x: [f64; 2],
    pub value: f64,
    /// Prior mean at `x`.
    pub mean: f64,
    pub noise: f64,
    #[serde(default)]
    pub intensity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpQuery {
    pub x: [f64; 2],
    pub mean: f64,
    #[serde(default)]
    pub intensity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseGpInstance {
    pub kernel: KernelSpec,
    pub observations: Vec<GpObservation>,
    pub queries: Vec<GpQuery>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

/// Posterior mean and variance at the queries from one dense solve.
pub fn dense_gp(inst: &DenseGpInstance) -> CliResult<Vec<Moments>> {
    inst.kernel.check()?;
    let obs = &inst.observations;
    let n = obs.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        inst.kernel.eval(obs[i].x, obs[i].intensity, obs[j].x, obs[j].intensity) + if i == j { obs[i].noise } else { 0.0 }
    });
    let resid = DVector::from_iterator(n, obs.iter().map(|o| o.value - o.mean));
    let chol = k.cholesky().ok_or_else(|| bad("measurement covariance is not positive definite"))?;
    let alpha = chol.solve(&resid);
    Ok(inst
        .queries
        .iter()
        .map(|q| {
            let kq = DVector::from_iterator(n, obs.iter().map(|o| inst.kernel.eval(q.x, q.intensity, o.x, o.intensity)));
            let v = chol.solve(&kq);
            Moments {
                mean: q.mean + kq.dot(&alpha),
                variance: inst.kernel.eval(q.x, q.intensity, q.x, q.intensity) - kq.dot(&v),
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureInstance {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub weights: Vec<f64>,
    pub draws: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureReference {
    /// Law of total expectation and variance.
    pub analytic: Moments,
    pub monte_carlo: Moments,
}

/// Moments of a Gaussian mixture in closed form and from direct sampling.
pub fn mixture_moments(inst: &MixtureInstance) -> CliResult<MixtureReference> {
    let n = inst.means.len();
    if n == 0 || inst.variances.len() != n || inst.weights.len() != n {
        return Err(bad("means, variances and weights need the same non-zero length"));
    }
    if inst.variances.iter().any(|&v| !(v >= 0.0)) || inst.weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(bad("variances and weights must be non-negative"));
    }
    let total: f64 = inst.weights.iter().sum();
    if !(total > 0.0) || inst.draws < 2 {
        return Err(bad("weights must not all vanish and at least 2 draws are needed"));
    }
    let w: Vec<f64> = inst.weights.iter().map(|x| x / total).collect();
    let mean: f64 = w.iter().zip(&inst.means).map(|(a, b)| a * b).sum();
    let second: f64 = (0..n).map(|j| w[j] * (inst.variances[j] + inst.means[j] * inst.means[j])).sum();
    let analytic = Moments { mean, variance: second - mean * mean };

    let pick = WeightedIndex::new(&w).map_err(|e| bad(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(inst.seed);
    let samples: Vec<f64> = (0..inst.draws)
        .map(|_| {
            let j = pick.sample(&mut rng);
            let z: f64 = StandardNormal.sample(&mut rng);
            inst.means[j] + inst.variances[j].sqrt() * z
        })
        .collect();
    Ok(MixtureReference { analytic, monte_carlo: sample_moments(&samples) })
}

fn sample_moments(y: &[f64]) -> Moments {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let variance = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Moments { mean, variance }
}

/// Measurement at a Gaussian-distributed location: the prior mean is a quadratic
/// `c0 + c1 x + c2 y + c3 x^2 + c4 x y + c5 y^2` and the prior variance is constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SromInstance {
    pub x0: [f64; 2],
    /// Location std per axis.
    pub gamma: f64,
    pub mean_coefficients: [f64; 6],
    pub prior_variance: f64,
    pub measurement_variance: f64,
    pub draws: usize,
    pub seed: u64,
}

impl SromInstance {
    pub fn mean_at(&self, x: f64, y: f64) -> f64 {
        let c = &self.mean_coefficients;
        c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
    }
}

/// Moments of the measurement marginalised over the location error by sampling.
pub fn srom_moments(inst: &SromInstance) -> CliResult<Moments> {
    if !(inst.gamma >= 0.0 && inst.prior_variance >= 0.0 && inst.measurement_variance >= 0.0) || inst.draws < 2 {
        return Err(bad("gamma and variances must be non-negative, draws at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(inst.seed);
    let means: Vec<f64> = (0..inst.draws)
        .map(|_| {
            let dx: f64 = StandardNormal.sample(&mut rng);
            let dy: f64 = StandardNormal.sample(&mut rng);
            inst.mean_at(inst.x0[0] + inst.gamma * dx, inst.x0[1] + inst.gamma * dy)
        })
        .collect();
    let m = sample_moments(&means);
    Ok(Moments { mean: m.mean, variance: m.variance + inst.prior_variance + inst.measurement_variance })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetInstance {
    pub points: Vec<[f64; 2]>,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub intensity: f64,
    /// Measurement noise variance.
    pub noise: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetReference {
    pub subsets: usize,
    pub best: Vec<usize>,
    pub best_information: f64,
}

/// Information carried by noisy measurements at `set`: `1/2 log det(I + K / noise)`,
/// the joint entropy less that of the noise alone.
pub fn subset_information(inst: &SubsetInstance, set: &[usize]) -> f64 {
    let n = set.len();
    let k = DMatrix::from_fn(n, n, |a, b| {
        let pa = inst.points[set[a]];
        let pb = inst.points[set[b]];
        inst.kernel.eval(pa, inst.intensity, pb, inst.intensity) / inst.noise + if a == b { 1.0 } else { 0.0 }
    });
    0.5 * k.determinant().ln()
}

/// Exhaustive search over all subsets of the given size.
pub fn subset_entropy(inst: &SubsetInstance) -> CliResult<SubsetReference> {
    inst.kernel.check()?;
    let n = inst.points.len();
    if inst.size == 0 || inst.size > n || !(inst.noise > 0.0) {
        return Err(bad("size must be in 1..=points and noise positive"));
    }
    let mut set: Vec<usize> = (0..inst.size).collect();
    let mut out = SubsetReference { subsets: 0, best: Vec::new(), best_information: f64::NEG_INFINITY };
    loop {
        let h = subset_information(inst, &set);
        out.subsets += 1;
        if h > out.best_information {
            out.best_information = h;
            out.best = set.clone();
        }
        // next combination in lexicographic order
        let r = inst.size;
        let Some(i) = (0..r).rev().find(|&i| set[i] < n - r + i) else { break };
        set[i] += 1;
        for j in i + 1..r {
            set[j] = set[j - 1] + 1;
        }
    }
    Ok(out)
}

/// Independent regenerations of a stationary Gaussian velocity record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapInstance {
    pub n: usize,
    pub regenerations: usize,
    pub mean: [f64; 2],
    pub std: [f64; 2],
    pub q_ref: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReference {
    /// Spread of the intensity estimate across regenerated records.
    pub variance: f64,
    pub mean_intensity: f64,
    /// The records, for the caller to bootstrap; not printed.
    #[serde(skip)]
    pub records: Vec<[Vec<f64>; 2]>,
}

/// Intensity `sqrt((3/2)(var_u + var_v) / 3) / q_ref` from unbiased sample variances.
pub fn intensity_of(u: &[f64], v: &[f64], q_ref: f64) -> f64 {
    let vu = sample_moments(u).variance;
    let vv = sample_moments(v).variance;
    (0.5 * (vu + vv)).sqrt() / q_ref
}

/// Variance of the intensity estimator over fresh records.
pub fn nested_bootstrap(inst: &BootstrapInstance) -> CliResult<BootstrapReference> {
    if inst.n < 2 || inst.regenerations < 2 || !(inst.q_ref > 0.0) || inst.std.iter().any(|&s| !(s >= 0.0)) {
        return Err(bad("need n >= 2, regenerations >= 2, q_ref > 0 and non-negative stds"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(inst.seed);
    let mut records = Vec::with_capacity(inst.regenerations);
    let mut values = Vec::with_capacity(inst.regenerations);
    for _ in 0..inst.regenerations {
        let mut draw = |c: usize| -> Vec<f64> {
            (0..inst.n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    inst.mean[c] + inst.std[c] * z
                })
                .collect()
        };
        let u = draw(0);
        let v = draw(1);
        values.push(intensity_of(&u, &v, inst.q_ref));
        records.push([u, v]);
    }
    let m = sample_moments(&values);
    Ok(BootstrapReference { variance: m.variance, mean_intensity: m.mean, records })
}
