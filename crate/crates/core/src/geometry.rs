//! Planar primitives and the merging procedure on disk families.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used for tangency and containment tests.
pub const TANGENCY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x1 + rhs.x1, self.x2 + rhs.x2)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x1 - rhs.x1, self.x2 - rhs.x2)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x1 * rhs, self.x2 * rhs)
    }
}

/// Open disk `B_r(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point2,
    pub radius: f64,
}

impl Ball {
    pub const fn new(center: Point2, radius: f64) -> Self {
        Self { center, radius }
    }

    fn tol(&self, other: &Ball) -> f64 {
        TANGENCY_TOL * (1.0 + self.radius + other.radius + self.center.dist(other.center))
    }

    /// True when the closures intersect (tangency included, up to tolerance).
    pub fn closures_meet(&self, other: &Ball) -> bool {
        self.center.dist(other.center) <= self.radius + other.radius + self.tol(other)
    }

    /// `r1 + r2 - d`; positive when the disks overlap.
    pub fn overlap_depth(&self, other: &Ball) -> f64 {
        self.radius + other.radius - self.center.dist(other.center)
    }

    /// Closed containment `other ⊂ self`, up to tolerance.
    pub fn contains_ball(&self, other: &Ball) -> bool {
        self.center.dist(other.center) + other.radius <= self.radius + self.tol(other)
    }

    pub fn contains_point(&self, p: Point2) -> bool {
        self.center.dist(p) <= self.radius * (1.0 + TANGENCY_TOL) + TANGENCY_TOL
    }

    /// Same center, radius multiplied by `factor`.
    pub fn dilate(&self, factor: f64) -> Ball {
        Ball::new(self.center, self.radius * factor)
    }
}

/// Finite ordered family of disks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    pub balls: Vec<Ball>,
}

impl BallFamily {
    pub fn new(balls: Vec<Ball>) -> Self {
        Self { balls }
    }

    /// Sum of radii.
    pub fn rad(&self) -> f64 {
        self.balls.iter().map(|b| b.radius).sum()
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// Closures pairwise disjoint.
    pub fn is_pairwise_disjoint(&self) -> bool {
        for (k, a) in self.balls.iter().enumerate() {
            for b in &self.balls[k + 1..] {
                if a.closures_meet(b) {
                    return false;
                }
            }
        }
        true
    }

    /// Every ball of `other` lies inside some ball of `self`.
    pub fn covers(&self, other: &BallFamily) -> bool {
        other
            .balls
            .iter()
            .all(|b| self.balls.iter().any(|c| c.contains_ball(b)))
    }

    pub fn dilate(&self, factor: f64) -> BallFamily {
        BallFamily::new(self.balls.iter().map(|b| b.dilate(factor)).collect())
    }
}

/// Smallest disk containing both arguments.
pub fn enclosing_ball(a: Ball, b: Ball) -> Ball {
    // canonical order keeps the result bitwise symmetric
    let key = |x: &Ball| (x.center.x1, x.center.x2, x.radius);
    let (a, b) = if key(&a) <= key(&b) { (a, b) } else { (b, a) };
    let d = a.center.dist(b.center);
    if d + b.radius <= a.radius {
        return a;
    }
    if d + a.radius <= b.radius {
        return b;
    }
    let radius = 0.5 * (d + a.radius + b.radius);
    let center = a.center + (b.center - a.center) * ((radius - a.radius) / d);
    Ball::new(center, radius)
}

/// Repeatedly replaces the deepest-overlapping pair of balls with intersecting
/// closures by their enclosing ball.
pub fn merge_family(f: &BallFamily) -> BallFamily {
    let mut balls = f.balls.clone();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..balls.len() {
            for j in i + 1..balls.len() {
                if balls[i].closures_meet(&balls[j]) {
                    let depth = balls[i].overlap_depth(&balls[j]);
                    if best.is_none_or(|(_, _, d)| depth > d) {
                        best = Some((i, j, depth));
                    }
                }
            }
        }
        match best {
            Some((i, j, _)) => {
                balls[i] = enclosing_ball(balls[i], balls[j]);
                balls.remove(j);
            }
            None => return BallFamily::new(balls),
        }
    }
}

/// Axis-aligned closed rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Self {
            min: Point2::new(x0, y0),
            max: Point2::new(x1, y1),
        })
    }

    pub fn unit_square() -> Self {
        Self {
            min: Point2::new(0.0, 0.0),
            max: Point2::new(1.0, 1.0),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x1 - self.min.x1
    }

    pub fn height(&self) -> f64 {
        self.max.x2 - self.min.x2
    }

    pub fn center(&self) -> Point2 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x1 >= self.min.x1 && p.x1 <= self.max.x1 && p.x2 >= self.min.x2 && p.x2 <= self.max.x2
    }

    pub fn contains_strictly(&self, p: Point2) -> bool {
        p.x1 > self.min.x1 && p.x1 < self.max.x1 && p.x2 > self.min.x2 && p.x2 < self.max.x2
    }

    /// Closed disk inside the rectangle.
    pub fn contains_ball(&self, b: &Ball) -> bool {
        self.dist_to_boundary(b.center) >= b.radius && self.contains(b.center)
    }

    /// `other ⊂⊂ self` with a positive margin on every side.
    pub fn contains_rect_strictly(&self, other: &Rect) -> bool {
        other.min.x1 > self.min.x1
            && other.min.x2 > self.min.x2
            && other.max.x1 < self.max.x1
            && other.max.x2 < self.max.x2
    }

    /// Distance from an interior point to the boundary (0 outside).
    pub fn dist_to_boundary(&self, p: Point2) -> f64 {
        let d = (p.x1 - self.min.x1)
            .min(self.max.x1 - p.x1)
            .min(p.x2 - self.min.x2)
            .min(self.max.x2 - p.x2);
        d.max(0.0)
    }

    /// Euclidean distance from `p` to the rectangle (0 inside).
    pub fn dist_outside(&self, p: Point2) -> f64 {
        let dx = (self.min.x1 - p.x1).max(0.0).max(p.x1 - self.max.x1);
        let dy = (self.min.x2 - p.x2).max(0.0).max(p.x2 - self.max.x2);
        dx.hypot(dy)
    }

    pub fn expand(&self, margin: f64) -> Rect {
        Rect {
            min: Point2::new(self.min.x1 - margin, self.min.x2 - margin),
            max: Point2::new(self.max.x1 + margin, self.max.x2 + margin),
        }
    }

    /// Smallest gap between the two boundaries when `inner ⊂⊂ self`.
    pub fn margin_to(&self, inner: &Rect) -> f64 {
        (inner.min.x1 - self.min.x1)
            .min(inner.min.x2 - self.min.x2)
            .min(self.max.x1 - inner.max.x1)
            .min(self.max.x2 - inner.max.x2)
    }
}

/// Outer domain `Ω` with the inner rectangle `Ω′ ⊂⊂ Ω` that must contain the
/// closure of the jump set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub outer: Rect,
    pub inner: Rect,
}

impl Domain {
    pub fn new(outer: Rect, inner: Rect) -> Result<Self> {
        if !outer.contains_rect_strictly(&inner) {
            return Err(Error::InvalidInput(
                "inner rectangle must be compactly contained in the outer one".into(),
            ));
        }
        Ok(Self { outer, inner })
    }

    /// Outer rectangle with the inner one shrunk by `margin` on each side.
    pub fn with_margin(outer: Rect, margin: f64) -> Result<Self> {
        let inner = Rect::new(
            outer.min.x1 + margin,
            outer.min.x2 + margin,
            outer.max.x1 - margin,
            outer.max.x2 - margin,
        )?;
        Self::new(outer, inner)
    }
}

/// Nested rectangles `Ω̃ ⊂⊂ Ω′ ⊂⊂ Ω ⊂⊂ Ω̂` of the boundary-value problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletDomain {
    pub core: Rect,
    pub inner: Rect,
    pub omega: Rect,
    pub hull: Rect,
}

impl DirichletDomain {
    pub fn new(core: Rect, inner: Rect, omega: Rect, hull: Rect) -> Result<Self> {
        if !(inner.contains_rect_strictly(&core)
            && omega.contains_rect_strictly(&inner)
            && hull.contains_rect_strictly(&omega))
        {
            return Err(Error::InvalidInput(
                "Dirichlet rectangles must be strictly nested".into(),
            ));
        }
        Ok(Self {
            core,
            inner,
            omega,
            hull,
        })
    }

    /// The domain seen by the detection pipeline: jumps inside `Ω′`, grid over `Ω̂`.
    pub fn detection_domain(&self) -> Domain {
        Domain {
            outer: self.hull,
            inner: self.inner,
        }
    }
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn dist_point_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Whether the circle `|x - c| = r` meets the closed segment `[a, b]`.
pub fn circle_meets_segment(c: Point2, r: f64, a: Point2, b: Point2) -> bool {
    let near = dist_point_segment(c, a, b);
    let far = c.dist(a).max(c.dist(b));
    near <= r && r <= far
}
