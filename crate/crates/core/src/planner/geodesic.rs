use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::{Domain2D, Point2, Rect};
use crate::scalar::Real;

/// Shortest path lengths around rectangular obstacles on the visibility graph of
/// obstacle corners.
#[derive(Clone, Debug)]
pub struct VisibilityGraph<T> {
    obstacles: Vec<Rect<T>>,
    corners: Vec<Point2<T>>,
    adjacency: Vec<Vec<(usize, T)>>,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry<T> {
    dist: T,
    node: usize,
}

impl<T: Real> Eq for Entry<T> {}

impl<T: Real> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Entry<T> {
    // min-heap on distance
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.partial_cmp(&self.dist).unwrap_or(Ordering::Equal).then_with(|| other.node.cmp(&self.node))
    }
}

impl<T: Real> VisibilityGraph<T> {
    pub fn new(domain: &Domain2D<T>) -> Self {
        let obstacles = domain.obstacles().to_vec();
        let corners: Vec<Point2<T>> = obstacles
            .iter()
            .flat_map(|r| r.corners())
            .filter(|&c| domain.contains(c) && !obstacles.iter().any(|r| r.contains_strict(c)))
            .collect();
        let mut g = Self { obstacles, corners, adjacency: Vec::new() };
        let n = g.corners.len();
        g.adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if g.visible(g.corners[i], g.corners[j]) {
                    let d = g.corners[i].dist(g.corners[j]);
                    g.adjacency[i].push((j, d));
                    g.adjacency[j].push((i, d));
                }
            }
        }
        g
    }

    pub fn visible(&self, a: Point2<T>, b: Point2<T>) -> bool {
        !self.obstacles.iter().any(|r| r.segment_crosses_interior(a, b))
    }

    /// Geodesic distance from `from` to every corner.
    fn corner_distances(&self, from: Point2<T>) -> Vec<T> {
        let n = self.corners.len();
        let mut dist = vec![T::infinity(); n];
        let mut heap = BinaryHeap::new();
        for (k, &c) in self.corners.iter().enumerate() {
            if self.visible(from, c) {
                dist[k] = from.dist(c);
                heap.push(Entry { dist: dist[k], node: k });
            }
        }
        while let Some(Entry { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &(next, w) in &self.adjacency[node] {
                let nd = d + w;
                if nd < dist[next] {
                    dist[next] = nd;
                    heap.push(Entry { dist: nd, node: next });
                }
            }
        }
        dist
    }

    /// Geodesic distances from `from` to each target.
    pub fn distances_from(&self, from: Point2<T>, targets: &[Point2<T>]) -> Vec<T> {
        let corner_dist = self.corner_distances(from);
        targets
            .iter()
            .map(|&t| {
                if self.visible(from, t) {
                    return from.dist(t);
                }
                self.corners
                    .iter()
                    .zip(&corner_dist)
                    .filter(|(_, d)| d.is_finite())
                    .filter(|(&c, _)| self.visible(c, t))
                    .map(|(&c, &d)| d + c.dist(t))
                    .fold(T::infinity(), T::min)
            })
            .collect()
    }

    pub fn path_length(&self, a: Point2<T>, b: Point2<T>) -> T {
        self.distances_from(a, &[b])[0]
    }
}
