//! Waypoint selection: entropy and mutual-information gains, lattice baselines and
//! geodesic travel limits.

mod entropy;
mod geodesic;
mod lattice;
mod mi;

pub use entropy::{entropy_gain, entropy_gains_tracked};
pub use geodesic::VisibilityGraph;
pub use lattice::{cell_centred_margin, lattice_plan, LatticePoint};
pub use mi::{MiModel, MiPlanner};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Entropy,
    MutualInformation,
    Lattice,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Entropy => "entropy",
            Metric::MutualInformation => "mutual_information",
            Metric::Lattice => "lattice",
        }
    }
}

/// Robot position and the candidate set it picks waypoints from.
#[derive(Clone, Debug)]
pub struct PlannerState<T> {
    pub candidates: Vec<Point2<T>>,
    pub visited: Vec<bool>,
    pub position: Point2<T>,
    /// Largest geodesic distance to the next waypoint, unlimited when `None`.
    pub max_travel: Option<T>,
    /// Gain units subtracted per metre of travel.
    pub travel_penalty: T,
}

impl<T: Real> PlannerState<T> {
    pub fn new(candidates: Vec<Point2<T>>, position: Point2<T>, max_travel: Option<T>) -> Self {
        let n = candidates.len();
        Self { candidates, visited: vec![false; n], position, max_travel, travel_penalty: T::zero() }
    }

    pub fn mark_visited(&mut self, index: usize) {
        self.visited[index] = true;
        self.position = self.candidates[index];
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection<T> {
    pub index: usize,
    pub point: Point2<T>,
    pub gain: T,
    pub travel: T,
    /// The travel limit had to be doubled to find a feasible waypoint.
    pub relaxed: bool,
}

fn best_within<T: Real>(state: &PlannerState<T>, gains: &[Option<T>], travel: &[T], limit: Option<T>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (q, (g, &d)) in gains.iter().zip(travel).enumerate() {
        let Some(g) = *g else { continue };
        if state.visited[q] || !g.is_finite() || !d.is_finite() || limit.is_some_and(|m| d > m) {
            continue;
        }
        let score = g - state.travel_penalty * d;
        let better = match best {
            None => true,
            Some((b, bs)) => match score.partial_cmp(&bs) {
                Some(Ordering::Greater) => true,
                Some(Ordering::Equal) => d < travel[b],
                _ => false,
            },
        };
        if better {
            best = Some((q, score));
        }
    }
    best.map(|(q, _)| q)
}

/// Highest-gain unvisited candidate within the travel limit. Ties go to the
/// shorter trip, then to the lower index. When nothing is reachable the limit is
/// doubled once before giving up.
pub fn next_waypoint<T: Real>(state: &PlannerState<T>, gains: &[Option<T>], geodesic: &VisibilityGraph<T>) -> Result<Selection<T>> {
    let n = state.candidates.len();
    if gains.len() != n || state.visited.len() != n {
        return Err(Error::Argument(format!("{} gains for {n} candidates", gains.len())));
    }
    let travel = geodesic.distances_from(state.position, &state.candidates);
    let mut relaxed = false;
    let mut pick = best_within(state, gains, &travel, state.max_travel);
    if pick.is_none() {
        if let Some(m) = state.max_travel {
            relaxed = true;
            pick = best_within(state, gains, &travel, Some(m * T::lit(2.0)));
        }
    }
    let index = pick.ok_or_else(|| Error::IsolatedRobot {
        x: state.position.x.as_f64(),
        y: state.position.y.as_f64(),
        max_travel: state.max_travel.map_or(f64::INFINITY, |m| m.as_f64()),
    })?;
    if relaxed {
        log::warn!("no waypoint within the travel limit; doubled it once");
    }
    Ok(Selection { index, point: state.candidates[index], gain: gains[index].unwrap_or(T::zero()), travel: travel[index], relaxed })
}
