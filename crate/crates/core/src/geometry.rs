//! Planar primitives on the square network domain.
//!
//! Balls are open: `B(c, ρ) = { z : |z - c| < ρ }`. Distance comparisons against
//! band boundaries are exact floating comparisons; boundary hits have measure zero.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Quadrature cells per ball radius used by [`region_area_minus_ball`].
pub const QUADRATURE_CELLS_PER_RADIUS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point<T>) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sq(&self, other: &Point<T>) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// The point at distance `radius` from `self` in direction `angle` (radians).
    pub fn offset_polar(&self, radius: T, angle: T) -> Point<T> {
        Point::new(self.x + radius * angle.cos(), self.y + radius * angle.sin())
    }
}

/// Euclidean distance.
pub fn dist<T: Real>(p: Point<T>, q: Point<T>) -> T {
    p.dist(&q)
}

/// The `R × R` square `[0, R]²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain<T> {
    side: T,
}

impl<T: Real> Domain<T> {
    pub fn new(side: T) -> Result<Self> {
        if !(side.is_finite() && side > T::zero()) {
            return Err(Error::param("R", format!("domain side must be finite and > 0, got {side}")));
        }
        Ok(Domain { side })
    }

    pub fn side(&self) -> T {
        self.side
    }

    pub fn area(&self) -> T {
        self.side * self.side
    }

    pub fn center(&self) -> Point<T> {
        let half = self.side / T::lit(2.0);
        Point::new(half, half)
    }

    pub fn contains(&self, p: &Point<T>) -> bool {
        let zero = T::zero();
        p.x >= zero && p.x <= self.side && p.y >= zero && p.y <= self.side
    }

    pub fn as_rect(&self) -> Rect<T> {
        Rect { x0: T::zero(), y0: T::zero(), x1: self.side, y1: self.side }
    }

    /// Maps a pair of unit samples in `[0, 1]` linearly onto the square.
    pub fn from_unit(&self, u: T, v: T) -> Point<T> {
        Point::new(u * self.side, v * self.side)
    }

    fn corners(&self) -> [Point<T>; 4] {
        let (z, s) = (T::zero(), self.side);
        [Point::new(z, z), Point::new(s, z), Point::new(z, s), Point::new(s, s)]
    }
}

/// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub x0: T,
    pub y0: T,
    pub x1: T,
    pub y1: T,
}

impl<T: Real> Rect<T> {
    pub fn new(x0: T, y0: T, x1: T, y1: T) -> Result<Self> {
        let finite = [x0, y0, x1, y1].iter().all(|v| v.is_finite());
        if !finite || x0 > x1 || y0 > y1 {
            return Err(Error::param(
                "rect",
                format!("need finite x0 <= x1 and y0 <= y1, got [{x0}, {x1}] x [{y0}, {y1}]"),
            ));
        }
        Ok(Rect { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> T {
        self.x1 - self.x0
    }

    pub fn height(&self) -> T {
        self.y1 - self.y0
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn contains(&self, p: &Point<T>) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn is_within(&self, dom: &Domain<T>) -> bool {
        self.x0 >= T::zero() && self.y0 >= T::zero() && self.x1 <= dom.side() && self.y1 <= dom.side()
    }
}

/// The band index `k` with `k·r <= d < (k+1)·r`.
pub fn annulus_index<T: Real>(d: T, r: T) -> Result<usize> {
    if !(r > T::zero() && r.is_finite()) {
        return Err(Error::param("r", format!("range must be finite and > 0, got {r}")));
    }
    if !(d >= T::zero() && d.is_finite()) {
        return Err(Error::param("d", format!("distance must be finite and >= 0, got {d}")));
    }
    (d / r).floor().to_usize().ok_or_else(|| Error::param("d", format!("d / r = {} does not fit an index", d / r)))
}

fn unit<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    Uniform::new(T::zero(), T::one()).sample(rng)
}

/// Uniform point on the square.
pub fn sample_uniform_domain<T: Real, R: Rng + ?Sized>(rng: &mut R, dom: &Domain<T>) -> Point<T> {
    let u = unit(rng);
    let v = unit(rng);
    dom.from_unit(u, v)
}

/// Uniform point on `D - B(center, radius)`, by rejection from the square.
pub fn sample_uniform_minus_ball<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    dom: &Domain<T>,
    center: Point<T>,
    radius: T,
) -> Result<Point<T>> {
    if !(radius >= T::zero() && radius.is_finite()) || !center.is_finite() {
        return Err(Error::param("radius", format!("need finite radius >= 0, got {radius}")));
    }
    // The square is convex, so it lies inside the closed ball iff all four corners do.
    let radius_sq = radius * radius;
    if dom.corners().iter().all(|c| c.dist_sq(&center) <= radius_sq) {
        return Err(Error::DegenerateRegion { radius: radius.as_f64() });
    }
    loop {
        let p = sample_uniform_domain(rng, dom);
        if p.dist_sq(&center) >= radius_sq {
            return Ok(p);
        }
    }
}

/// Area of `rect - B(center, radius)`.
///
/// The rectangle's area is exact. The part covered by the ball is integrated by the
/// midpoint rule on a grid of cell side at most `radius / 200` spanning the clipped
/// bounding box of the ball, so the cost does not grow with the domain size.
pub fn region_area_minus_ball<T: Real>(dom: &Domain<T>, rect: &Rect<T>, center: Point<T>, radius: T) -> Result<T> {
    if !rect.is_within(dom) {
        return Err(Error::param("rect", "rectangle must lie inside the domain"));
    }
    if !(radius >= T::zero() && radius.is_finite()) {
        return Err(Error::param("radius", format!("need finite radius >= 0, got {radius}")));
    }
    let r_sq = radius * radius;
    let corners = [(rect.x0, rect.y0), (rect.x1, rect.y0), (rect.x0, rect.y1), (rect.x1, rect.y1)];
    if corners.iter().all(|&(x, y)| Point::new(x, y).dist_sq(&center) <= r_sq) {
        // Convex rect inside the closed ball: only boundary points remain.
        return Ok(T::zero());
    }
    Ok(rect.area() - ball_overlap_area(rect, center, radius))
}

fn ball_overlap_area<T: Real>(rect: &Rect<T>, center: Point<T>, radius: T) -> T {
    let x0 = rect.x0.max(center.x - radius);
    let x1 = rect.x1.min(center.x + radius);
    let y0 = rect.y0.max(center.y - radius);
    let y1 = rect.y1.min(center.y + radius);
    if radius <= T::zero() || x0 >= x1 || y0 >= y1 {
        return T::zero();
    }
    let per_radius = T::lit(QUADRATURE_CELLS_PER_RADIUS as f64);
    let cells = |span: T| ((span * per_radius / radius).ceil().to_usize().unwrap_or(1)).max(1);
    let (nx, ny) = (cells(x1 - x0), cells(y1 - y0));
    // Evaluate in f64 so the f32 instantiation still resolves ~1e5 cells cleanly.
    let (fx0, fy0) = (x0.as_f64(), y0.as_f64());
    let hx = (x1 - x0).as_f64() / nx as f64;
    let hy = (y1 - y0).as_f64() / ny as f64;
    let (cx, cy, r2) = (center.x.as_f64(), center.y.as_f64(), radius.as_f64().powi(2));
    let mut inside: u64 = 0;
    for j in 0..ny {
        let dy = fy0 + (j as f64 + 0.5) * hy - cy;
        let dy2 = dy * dy;
        if dy2 >= r2 {
            continue;
        }
        for i in 0..nx {
            let dx = fx0 + (i as f64 + 0.5) * hx - cx;
            if dx * dx + dy2 < r2 {
                inside += 1;
            }
        }
    }
    T::lit(inside as f64 * hx * hy)
}
