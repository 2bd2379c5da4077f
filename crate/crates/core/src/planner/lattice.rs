use crate::error::{Error, Result};
use crate::geometry::{Domain2D, Point2};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticePoint<T> {
    pub point: Point2<T>,
    /// Candidate index the point was moved to, when it was moved.
    pub snapped: Option<usize>,
}

/// `nx` x `ny` lattice over the domain with the given wall margin, in boustrophedon
/// order (rows bottom to top, alternating direction). Points that are not free are
/// moved to the nearest unused candidate; with `snap_all` every point is.
pub fn lattice_plan<T: Real>(
    domain: &Domain2D<T>,
    nx: usize,
    ny: usize,
    margin: T,
    candidates: &[Point2<T>],
    snap_all: bool,
) -> Result<Vec<LatticePoint<T>>> {
    if nx < 2 || ny < 2 {
        return Err(Error::Argument(format!("lattice needs at least 2x2 points, got {nx}x{ny}")));
    }
    if !(margin >= T::zero()) || margin * T::lit(2.0) >= domain.width().min(domain.height()) {
        return Err(Error::Argument(format!("lattice margin {margin} does not fit the domain")));
    }
    let sx = (domain.width() - margin * T::lit(2.0)) / T::from_usize_lossy(nx - 1);
    let sy = (domain.height() - margin * T::lit(2.0)) / T::from_usize_lossy(ny - 1);
    let mut used = vec![false; candidates.len()];
    let mut out = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for k in 0..nx {
            let ix = if iy % 2 == 0 { k } else { nx - 1 - k };
            let p = Point2::new(margin + sx * T::from_usize_lossy(ix), margin + sy * T::from_usize_lossy(iy));
            if !snap_all && domain.is_free(p) {
                out.push(LatticePoint { point: p, snapped: None });
                continue;
            }
            let best = candidates
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .min_by(|(_, a), (_, b)| a.dist2(p).partial_cmp(&b.dist2(p)).unwrap_or(std::cmp::Ordering::Equal))
                .map(|(i, _)| i)
                .ok_or_else(|| Error::Argument("no candidate left to snap a lattice point to".into()))?;
            used[best] = true;
            out.push(LatticePoint { point: candidates[best], snapped: Some(best) });
        }
    }
    Ok(out)
}

/// Margin that centres an `n`-point lattice in cells of equal size.
pub fn cell_centred_margin<T: Real>(extent: T, n: usize) -> T {
    extent / (T::lit(2.0) * T::from_usize_lossy(n))
}
