//! Planar geometry: points, axis-aligned obstacles and the measurement domain.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, other: Self) -> T {
        (self - other).norm()
    }

    #[inline]
    pub fn dist2(self, other: Self) -> T {
        let d = self - other;
        d.dot(d)
    }

    /// Rotate counter-clockwise by `angle` radians.
    #[inline]
    pub fn rotated(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn cast<U: Real>(self) -> Point2<U> {
        Point2::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()))
    }
}

impl<T: Real> Add for Point2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Point2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Mul<T> for Point2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

/// Axis-aligned rectangle, `min` is the lower-left corner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect<T> {
    pub min: Point2<T>,
    pub max: Point2<T>,
}

impl<T: Real> Rect<T> {
    pub fn new(min: Point2<T>, max: Point2<T>) -> Result<Self> {
        if !(min.x < max.x && min.y < max.y) {
            return Err(Error::Argument(format!(
                "rectangle corners out of order: ({}, {}) .. ({}, {})",
                min.x, min.y, max.x, max.y
            )));
        }
        Ok(Self { min, max })
    }

    pub fn center(&self) -> Point2<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    pub fn half_extent(&self) -> Point2<T> {
        (self.max - self.min) * T::lit(0.5)
    }

    /// Closed containment.
    pub fn contains(&self, p: Point2<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_strict(&self, p: Point2<T>) -> bool {
        p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y
    }

    /// Distance from `p` to the rectangle (zero inside).
    pub fn distance(&self, p: Point2<T>) -> T {
        let dx = (self.min.x - p.x).max(p.x - self.max.x).max(T::zero());
        let dy = (self.min.y - p.y).max(p.y - self.max.y).max(T::zero());
        dx.hypot(dy)
    }

    pub fn corners(&self) -> [Point2<T>; 4] {
        [
            self.min,
            Point2::new(self.max.x, self.min.y),
            self.max,
            Point2::new(self.min.x, self.max.y),
        ]
    }

    /// True when the open segment `a`-`b` passes through the open interior.
    /// Segments that only graze an edge or a corner do not count.
    pub fn segment_crosses_interior(&self, a: Point2<T>, b: Point2<T>) -> bool {
        // Liang-Barsky clip against the closed box, then probe the midpoint of the clipped part.
        let d = b - a;
        let mut t0 = T::zero();
        let mut t1 = T::one();
        let checks = [
            (-d.x, a.x - self.min.x),
            (d.x, self.max.x - a.x),
            (-d.y, a.y - self.min.y),
            (d.y, self.max.y - a.y),
        ];
        for (p, q) in checks {
            if p == T::zero() {
                if q < T::zero() {
                    return false;
                }
            } else {
                let r = q / p;
                if p < T::zero() {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
        if t1 - t0 <= T::epsilon() {
            return false;
        }
        let mid = a + d * ((t0 + t1) * T::lit(0.5));
        self.contains_strict(mid)
    }
}

/// Descriptive label for a boundary segment (inlet, outlet, wall).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySegment<T> {
    pub label: String,
    pub from: Point2<T>,
    pub to: Point2<T>,
}

/// Rectangular 2D measurement plane `[0, width] x [0, height]` with obstacles.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain2D<T> {
    width: T,
    height: T,
    obstacles: Vec<Rect<T>>,
    boundaries: Vec<BoundarySegment<T>>,
}

impl<T: Real> Domain2D<T> {
    pub fn new(width: T, height: T, obstacles: Vec<Rect<T>>) -> Result<Self> {
        if !(width > T::zero() && height > T::zero()) {
            return Err(Error::Domain(format!("non-positive extent {width} x {height}")));
        }
        let bbox = Rect { min: Point2::new(T::zero(), T::zero()), max: Point2::new(width, height) };
        for (k, r) in obstacles.iter().enumerate() {
            if !(bbox.contains(r.min) && bbox.contains(r.max)) {
                return Err(Error::Domain(format!("obstacle {k} leaves the bounding box")));
            }
        }
        Ok(Self { width, height, obstacles, boundaries: Vec::new() })
    }

    pub fn with_boundaries(mut self, boundaries: Vec<BoundarySegment<T>>) -> Self {
        self.boundaries = boundaries;
        self
    }

    pub fn width(&self) -> T {
        self.width
    }

    pub fn height(&self) -> T {
        self.height
    }

    pub fn obstacles(&self) -> &[Rect<T>] {
        &self.obstacles
    }

    pub fn boundaries(&self) -> &[BoundarySegment<T>] {
        &self.boundaries
    }

    pub fn contains(&self, p: Point2<T>) -> bool {
        p.x >= T::zero() && p.x <= self.width && p.y >= T::zero() && p.y <= self.height
    }

    pub fn in_obstacle(&self, p: Point2<T>) -> bool {
        self.obstacles.iter().any(|r| r.contains(p))
    }

    /// Inside the box and outside every (closed) obstacle.
    pub fn is_free(&self, p: Point2<T>) -> bool {
        self.contains(p) && !self.in_obstacle(p)
    }

    pub fn check_inside(&self, p: Point2<T>) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::Domain(format!("point ({}, {}) lies outside the domain", p.x, p.y)))
        }
    }

    pub fn check_free(&self, p: Point2<T>) -> Result<()> {
        self.check_inside(p)?;
        if self.in_obstacle(p) {
            return Err(Error::Domain(format!("point ({}, {}) lies inside an obstacle", p.x, p.y)));
        }
        Ok(())
    }

    /// Clearance from obstacles and walls.
    pub fn clearance(&self, p: Point2<T>) -> T {
        let wall = p.x.min(self.width - p.x).min(p.y).min(self.height - p.y);
        self.obstacles.iter().map(|r| r.distance(p)).fold(wall, T::min)
    }

    /// Uniform grid with the given spacing, cell-centred, keeping points with at least
    /// `clearance` distance from obstacles. Points are ordered row by row (y outer).
    pub fn grid(&self, spacing: T, clearance: T) -> Result<Vec<Point2<T>>> {
        if !(spacing > T::zero()) {
            return Err(Error::Argument(format!("grid spacing must be positive, got {spacing}")));
        }
        let nx = (self.width / spacing).floor().to_usize().unwrap_or(0).max(1);
        let ny = (self.height / spacing).floor().to_usize().unwrap_or(0).max(1);
        let ox = (self.width - spacing * T::from_usize_lossy(nx - 1)) * T::lit(0.5);
        let oy = (self.height - spacing * T::from_usize_lossy(ny - 1)) * T::lit(0.5);
        let mut pts = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let p = Point2::new(
                    ox + spacing * T::from_usize_lossy(ix),
                    oy + spacing * T::from_usize_lossy(iy),
                );
                let clear = self.obstacles.iter().all(|r| r.distance(p) >= clearance);
                if self.contains(p) && clear && !self.in_obstacle(p) {
                    pts.push(p);
                }
            }
        }
        Ok(pts)
    }

    /// Area of the obstacle-free region (obstacles assumed non-overlapping).
    pub fn free_area(&self) -> T {
        let blocked: T = self
            .obstacles
            .iter()
            .map(|r| (r.max.x - r.min.x) * (r.max.y - r.min.y))
            .sum();
        self.width * self.height - blocked
    }
}
