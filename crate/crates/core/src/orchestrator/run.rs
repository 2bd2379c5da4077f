use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ensemble::{EnsembleKernel, LocationError, ModelEnsemble};
use crate::error::{Error, Result};
use crate::field::{component, Property};
use crate::flowsim::{field_query, sample_instantaneous_with, time_grid};
use crate::geometry::Point2;
use crate::gp::{Kernel, KernelParams};
use crate::orchestrator::config::RunConfig;
use crate::orchestrator::metrics::{
    convergence_delta, evaluate_prediction, mixture_at, stream_rng, stream_seed, uncertainty_calibration, Coverage,
    PredictionError, Snapshot,
};
use crate::orchestrator::scenario::Scenario;
use crate::planner::{
    cell_centred_margin, entropy_gains_tracked, lattice_plan, next_waypoint, Metric, MiModel, MiPlanner, PlannerState,
    Selection, VisibilityGraph,
};
use crate::sigproc::{acquire, process_measurement, MeasurementRecord, ProcessingParams};

pub const RUNLOG_VERSION: u32 = 1;

const STREAM_TEST_POINTS: u64 = 1;
const STREAM_MEASURE: u64 = 1 << 32;
const STREAM_FRESH: u64 = 2 << 32;

/// One measurement of the run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub k: usize,
    pub candidate: usize,
    pub exploration: bool,
    pub measurement: MeasurementRecord<f64>,
    /// Model probabilities after this measurement was assimilated.
    pub probabilities: Vec<f64>,
    pub gain: Option<f64>,
    pub travel: f64,
    pub relaxed: bool,
    /// Posterior change; only set where the convergence check ran.
    pub d_k: Option<f64>,
    /// Prediction error at the test points against the exact fields.
    pub error: PredictionError,
}

/// Mixture posterior on the evaluation grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GridSnapshot {
    pub points: Vec<[f64; 2]>,
    /// `mean[p][q]`, property `p` in (u, v, i) order.
    pub mean: [Vec<f64>; 3],
    pub std: [Vec<f64>; 3],
}

/// Evaluation against fresh simulated measurements at the test points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoisyEvaluation {
    pub measurements: Vec<MeasurementRecord<f64>>,
    pub e_0: PredictionError,
    pub e_final: PredictionError,
    /// Bound from the mixture std combined with the measurement noise std.
    pub coverage: Coverage,
    /// Bound from the mixture std alone.
    pub coverage_latent: Coverage,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub test_points: Vec<[f64; 2]>,
    /// Prior mixture with the initial probabilities.
    pub e_0: PredictionError,
    pub e_final: PredictionError,
    pub model_prior_errors: Vec<PredictionError>,
    /// Prior error of the final most probable model.
    pub best_model_prior_error: PredictionError,
    pub noisy: Option<NoisyEvaluation>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunLog {
    pub version: u32,
    pub seed: u64,
    pub metric: Metric,
    pub model_ids: Vec<String>,
    pub initial_probabilities: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub converged: bool,
    pub final_probabilities: Vec<f64>,
    pub map_model: usize,
    pub posterior: GridSnapshot,
    pub evaluation: Evaluation,
}

impl RunLog {
    pub fn measurements(&self) -> usize {
        self.steps.len()
    }

    /// `(k, d_k)` for every step where the convergence check ran.
    pub fn deltas(&self) -> Vec<(usize, f64)> {
        self.steps.iter().filter_map(|s| s.d_k.map(|d| (s.k, d))).collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions<'a> {
    /// Stop when the posterior change falls below the tolerance.
    pub stop_on_convergence: bool,
    /// Precomputed mutual-information waypoints, see [`plan_mutual_information`].
    pub mi_schedule: Option<&'a [Selection<f64>]>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        Self { stop_on_convergence: true, mi_schedule: None }
    }
}

/// Simulated robot measurement: heading and location errors, the turbulent
/// series, the rig and the processing chain.
pub struct MeasurementSimulator<'a> {
    scenario: &'a Scenario,
    params: ProcessingParams<f64>,
    t: Vec<f64>,
    gamma_beta: f64,
    gamma_x: f64,
}

impl<'a> MeasurementSimulator<'a> {
    pub fn new(cfg: &RunConfig, scenario: &'a Scenario) -> Self {
        let gamma_beta = cfg.noise.gamma_beta_deg.to_radians();
        let params = ProcessingParams {
            q_ref: cfg.scenario.q_ref,
            gamma_beta,
            n_bootstrap: cfg.sampling.bootstrap,
            max_lag: cfg.sampling.max_lag,
        };
        let t = time_grid(cfg.sampling.raw_length(), 1.0 / cfg.sampling.frequency);
        Self { scenario, params, t, gamma_beta, gamma_x: cfg.noise.gamma_x }
    }

    pub fn measure(&self, x: Point2<f64>, heading: f64, seed: u64) -> Result<MeasurementRecord<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let true_heading = heading + self.gamma_beta * rng.sample::<f64, _>(rand_distr::StandardNormal);
        let dx: f64 = rng.sample(rand_distr::StandardNormal);
        let dy: f64 = rng.sample(rand_distr::StandardNormal);
        let actual = x + Point2::new(dx, dy) * self.gamma_x;
        let actual = if self.scenario.domain.is_free(actual) { actual } else { x };
        let series = sample_instantaneous_with(&self.scenario.truth, actual, &self.t, &mut rng)?;
        let (raw, dropped) = acquire(&self.scenario.rig, &series.t, &series.u, &series.v, true_heading, heading, &mut rng)?;
        process_measurement(&raw, x, heading, dropped, &self.params, rng.random())
    }
}

/// Exploration waypoints as candidate indices, in visiting order.
pub fn exploration_plan(cfg: &RunConfig, scenario: &Scenario) -> Result<Vec<usize>> {
    let m = cfg.planner.exploration;
    if m == 0 {
        return Ok(Vec::new());
    }
    let nx = (m as f64).sqrt().ceil() as usize;
    let ny = m.div_ceil(nx).max(2);
    let nx = nx.max(2);
    let d = &scenario.domain;
    let margin = cell_centred_margin(d.width().min(d.height()), nx.max(ny));
    let pts = lattice_plan(d, nx, ny, margin, &scenario.candidates, true)?;
    Ok(pts.iter().take(m).filter_map(|p| p.snapped).collect())
}

/// Lattice-metric waypoints as candidate indices.
pub fn lattice_waypoints(cfg: &RunConfig, scenario: &Scenario) -> Result<Vec<usize>> {
    let [nx, ny] = cfg.planner.lattice;
    let d = &scenario.domain;
    let margin = cell_centred_margin(d.width().min(d.height()), nx.max(ny));
    Ok(lattice_plan(d, nx, ny, margin, &scenario.candidates, true)?.iter().filter_map(|p| p.snapped).collect())
}

fn test_points(cfg: &RunConfig, scenario: &Scenario) -> Vec<Point2<f64>> {
    let mut rng = stream_rng(cfg.seed, STREAM_TEST_POINTS);
    let d = &scenario.domain;
    let c = cfg.planner.clearance;
    let mut out = Vec::with_capacity(cfg.evaluation.test_points);
    while out.len() < cfg.evaluation.test_points {
        let p = Point2::new(rng.random_range(c..d.width() - c), rng.random_range(c..d.height() - c));
        if d.is_free(p) && d.obstacles().iter().all(|r| r.distance(p) >= c) && !scenario.candidates.contains(&p) {
            out.push(p);
        }
    }
    out
}

fn heading(from: Option<Point2<f64>>, to: Point2<f64>) -> f64 {
    match from {
        Some(a) if a != to => (to.y - a.y).atan2(to.x - a.x),
        _ => 0.0,
    }
}

/// Greedy mutual-information waypoints with the prior model probabilities held
/// fixed. The sequence depends on the config only, so it can be shared across seeds.
pub fn plan_mutual_information(cfg: &RunConfig, scenario: &Scenario) -> Result<Vec<Selection<f64>>> {
    let cands = &scenario.candidates;
    let q_ref = cfg.scenario.q_ref;
    let mut models = Vec::new();
    for (m, &p) in scenario.models.iter().zip(&scenario.priors) {
        let params = KernelParams { sigma0: m.sigma_velocity, length: cfg.kernel.length, n0: cfg.kernel.n0, q_ref };
        let intensity = component(&m.flow, Property::Intensity);
        let noise = cands.iter().map(|&x| (q_ref * intensity.value(x)).powi(2) / cfg.kernel.n0).collect();
        models.push(MiModel { weight: p, kernel: Kernel::velocity(params, intensity)?, noise });
    }
    let mut mi = MiPlanner::new(cands.clone(), models)?;
    let explore = exploration_plan(cfg, scenario)?;
    let start = explore.last().map_or(cands[0], |&i| cands[i]);
    let mut state = PlannerState::new(cands.clone(), start, cfg.planner.max_travel);
    state.travel_penalty = cfg.planner.travel_penalty;
    for &i in &explore {
        mi.select(i)?;
        state.visited[i] = true;
    }
    let geodesic = VisibilityGraph::new(&scenario.domain);
    let steps = cfg.planner.max_measurements - explore.len();
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let sel = next_waypoint(&state, &mi.gains(), &geodesic).map_err(|e| e.at_step(explore.len() + k + 1, "plan"))?;
        mi.select(sel.index)?;
        state.mark_visited(sel.index);
        out.push(sel);
    }
    Ok(out)
}

/// Run the full loop described by `cfg`.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunLog> {
    let scenario = Scenario::build(cfg)?;
    run_with(cfg, &scenario, RunOptions::default())
}

fn truth_at(scenario: &Scenario, pts: &[Point2<f64>]) -> Result<Vec<[f64; 3]>> {
    pts.iter().map(|&x| field_query(&scenario.truth, x).map(|(u, v, i)| [u, v, i])).collect()
}

fn mixture_means(ens: &ModelEnsemble<f64>, p: &[f64], offset: usize, n: usize) -> Vec<[f64; 3]> {
    (0..n).map(|l| mixture_at(ens, p, offset + l).map(|(m, _)| m)).collect()
}

pub fn run_with(cfg: &RunConfig, scenario: &Scenario, options: RunOptions<'_>) -> Result<RunLog> {
    let cands = &scenario.candidates;
    let nc = cands.len();
    let sim = MeasurementSimulator::new(cfg, scenario);
    let tests = test_points(cfg, scenario);
    let nt = tests.len();
    let truth_tests = truth_at(scenario, &tests)?;

    let kernel = EnsembleKernel { length: cfg.kernel.length, n0: cfg.kernel.n0, q_ref: cfg.scenario.q_ref };
    let location = LocationError { gamma_x: cfg.noise.gamma_x, srom_size: cfg.noise.srom_size };
    let mut ens = ModelEnsemble::new(scenario.models.clone(), scenario.priors.clone(), kernel, location)?;
    let mut tracked = cands.clone();
    tracked.extend_from_slice(&tests);
    ens.track(&tracked);

    let p0 = ens.probabilities().to_vec();
    let e_0 = evaluate_prediction(&mixture_means(&ens, &p0, nc, nt), &truth_tests)?;
    let model_prior_errors = (0..ens.len())
        .map(|j| {
            let pj: Vec<f64> = (0..ens.len()).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            evaluate_prediction(&mixture_means(&ens, &pj, nc, nt), &truth_tests)
        })
        .collect::<Result<Vec<_>>>()?;

    let metric = cfg.planner.metric;
    let explore = exploration_plan(cfg, scenario)?;
    let lattice = if metric == Metric::Lattice { lattice_waypoints(cfg, scenario)? } else { Vec::new() };
    let budget = match metric {
        Metric::Lattice => cfg.planner.max_measurements.min(lattice.len()),
        _ => cfg.planner.max_measurements,
    };
    let explore: Vec<usize> = if metric == Metric::Lattice {
        lattice.iter().take(cfg.planner.exploration.min(budget)).copied().collect()
    } else {
        explore
    };
    let owned_schedule;
    let schedule: &[Selection<f64>] = match (metric, options.mi_schedule) {
        (Metric::MutualInformation, Some(s)) => s,
        (Metric::MutualInformation, None) => {
            owned_schedule = plan_mutual_information(cfg, scenario)?;
            &owned_schedule
        }
        _ => &[],
    };

    let geodesic = VisibilityGraph::new(&scenario.domain);
    let start = explore.first().map_or(cands[0], |&i| cands[i]);
    let mut state = PlannerState::new(cands.clone(), start, cfg.planner.max_travel);
    state.travel_penalty = cfg.planner.travel_penalty;
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut previous = Snapshot::from_ensemble(&ens, nc);
    let mut position: Option<Point2<f64>> = None;
    let mut converged = false;

    let measure_at = |idx: usize, from: Option<Point2<f64>>, k: usize| -> Result<MeasurementRecord<f64>> {
        let x = cands[idx];
        sim.measure(x, heading(from, x), stream_seed(cfg.seed, STREAM_MEASURE + idx as u64))
            .map_err(|e| e.at_step(k, "measure"))
    };

    if !explore.is_empty() {
        let mut batch = Vec::with_capacity(explore.len());
        let mut travels = Vec::with_capacity(explore.len());
        for (n, &idx) in explore.iter().enumerate() {
            let travel = position.map_or(0.0, |a| geodesic.path_length(a, cands[idx]));
            batch.push(measure_at(idx, position, n + 1)?);
            travels.push(travel);
            position = Some(cands[idx]);
            state.mark_visited(idx);
        }
        let k = explore.len();
        ens.assimilate(&batch).map_err(|e| e.at_step(k, "assimilate"))?;
        let current = Snapshot::from_ensemble(&ens, nc);
        let p = ens.probabilities().to_vec();
        let d = convergence_delta(&previous, &current, &p)?;
        previous = current;
        let error = evaluate_prediction(&mixture_means(&ens, &p, nc, nt), &truth_tests)?;
        for (n, (rec, travel)) in batch.into_iter().zip(travels).enumerate() {
            steps.push(StepRecord {
                k: n + 1,
                candidate: explore[n],
                exploration: true,
                measurement: rec,
                probabilities: p.clone(),
                gain: None,
                travel,
                relaxed: false,
                d_k: if n + 1 == k { Some(d) } else { None },
                error,
            });
        }
        converged = options.stop_on_convergence && d < cfg.planner.tol;
    }

    let mut k = explore.len();
    while !converged && k < budget {
        k += 1;
        let sel = match metric {
            Metric::Entropy => {
                let gains: Vec<Option<f64>> =
                    entropy_gains_tracked(ens.fields(), ens.probabilities(), nc).into_iter().map(Some).collect();
                next_waypoint(&state, &gains, &geodesic).map_err(|e| e.at_step(k, "plan"))?
            }
            Metric::MutualInformation => *schedule
                .get(k - explore.len() - 1)
                .ok_or_else(|| Error::Argument("mutual-information schedule is shorter than the budget".into()).at_step(k, "plan"))?,
            Metric::Lattice => {
                let idx = lattice[k - 1];
                Selection { index: idx, point: cands[idx], gain: 0.0, travel: geodesic.path_length(state.position, cands[idx]), relaxed: false }
            }
        };
        if state.visited[sel.index] {
            return Err(Error::Argument(format!("candidate {} selected twice", sel.index)).at_step(k, "plan"));
        }
        let rec = measure_at(sel.index, position, k)?;
        position = Some(cands[sel.index]);
        state.mark_visited(sel.index);
        ens.assimilate(std::slice::from_ref(&rec)).map_err(|e| e.at_step(k, "assimilate"))?;
        let current = Snapshot::from_ensemble(&ens, nc);
        let p = ens.probabilities().to_vec();
        let d = convergence_delta(&previous, &current, &p)?;
        previous = current;
        let error = evaluate_prediction(&mixture_means(&ens, &p, nc, nt), &truth_tests)?;
        steps.push(StepRecord {
            k,
            candidate: sel.index,
            exploration: false,
            measurement: rec,
            probabilities: p,
            gain: if metric == Metric::Lattice { None } else { Some(sel.gain) },
            travel: sel.travel,
            relaxed: sel.relaxed,
            d_k: Some(d),
            error,
        });
        converged = options.stop_on_convergence && d < cfg.planner.tol;
    }

    let p = ens.probabilities().to_vec();
    let map_model = ens.map_model();
    let e_final = evaluate_prediction(&mixture_means(&ens, &p, nc, nt), &truth_tests)?;

    let mut posterior = GridSnapshot { points: cands.iter().map(|c| [c.x, c.y]).collect(), ..Default::default() };
    for q in 0..nc {
        for (k, (m, v)) in mixture_at(&ens, &p, q).into_iter().enumerate() {
            posterior.mean[k].push(m);
            posterior.std[k].push(v.max(0.0).sqrt());
        }
    }

    let noisy = if cfg.evaluation.fresh_measurements {
        let recs = tests
            .iter()
            .enumerate()
            .map(|(l, &x)| sim.measure(x, 0.0, stream_seed(cfg.seed, STREAM_FRESH + l as u64)))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at_step(k, "evaluate"))?;
        let measured: Vec<[f64; 3]> = recs.iter().map(|r| [r.y_u, r.y_v, r.y_i]).collect();
        let noise: Vec<[f64; 3]> = recs.iter().map(|r| [r.sigma2_u, r.sigma2_v, r.sigma2_i]).collect();
        let predictive: Vec<[(f64, f64); 3]> = (0..nt).map(|l| mixture_at(&ens, &p, nc + l)).collect();
        Some(NoisyEvaluation {
            e_0: prior_error_against(&ens, &p0, &tests, &measured)?,
            e_final: evaluate_prediction(&mixture_means(&ens, &p, nc, nt), &measured)?,
            coverage: uncertainty_calibration(&predictive, &measured, &noise)?,
            coverage_latent: uncertainty_calibration(&predictive, &measured, &vec![[0.0; 3]; nt])?,
            measurements: recs,
        })
    } else {
        None
    };

    Ok(RunLog {
        version: RUNLOG_VERSION,
        seed: cfg.seed,
        metric,
        model_ids: scenario.models.iter().map(|m| m.id.clone()).collect(),
        initial_probabilities: p0,
        steps,
        converged,
        final_probabilities: p,
        map_model,
        posterior,
        evaluation: Evaluation {
            test_points: tests.iter().map(|t| [t.x, t.y]).collect(),
            e_0,
            e_final,
            best_model_prior_error: model_prior_errors[map_model],
            model_prior_errors,
            noisy,
        },
    })
}

/// Prior mixture error against measured values (the prior mean needs no tracking).
fn prior_error_against(ens: &ModelEnsemble<f64>, p0: &[f64], pts: &[Point2<f64>], measured: &[[f64; 3]]) -> Result<PredictionError> {
    let pred: Vec<[f64; 3]> = pts
        .iter()
        .map(|&x| {
            Property::ALL.map(|prop| ens.fields().iter().zip(p0).map(|(f, &w)| w * f.get(prop).prior_mean(x)).sum::<f64>())
        })
        .collect();
    evaluate_prediction(&pred, measured)
}
