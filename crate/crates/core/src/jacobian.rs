//! Two-dimensional weak Jacobian of grid fields: the vector measure `λ_u`,
//! its action `⟨Ju, φ⟩`, circle degrees and plaquette vorticity.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{circle_meets_segment, Ball, Point2};
use crate::grid_field::{unit, wrap, EdgeAxis, Grid, JumpEdge, S1Field, Side};

/// Piecewise-bilinear test function on its own lattice, zero on the boundary ring.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl TestFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::InvalidInput("test function size mismatch".into()));
        }
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let ring = i == 0 || j == 0 || i + 1 == grid.nx || j + 1 == grid.ny;
                if ring && values[grid.idx(i, j)] != 0.0 {
                    return Err(Error::InvalidInput(
                        "test function must vanish on the boundary ring".into(),
                    ));
                }
            }
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at interior nodes; the boundary ring is set to zero.
    pub fn from_fn(grid: Grid, f: impl Fn(Point2) -> f64) -> Self {
        let mut values = vec![0.0; grid.n_nodes()];
        for j in 1..grid.ny - 1 {
            for i in 1..grid.nx - 1 {
                values[grid.idx(i, j)] = f(grid.node(i, j));
            }
        }
        Self { grid, values }
    }

    pub fn zero(grid: Grid) -> Self {
        Self {
            values: vec![0.0; grid.n_nodes()],
            grid,
        }
    }

    fn corners(&self, ci: usize, cj: usize) -> [f64; 4] {
        let g = &self.grid;
        [
            self.values[g.idx(ci, cj)],
            self.values[g.idx(ci + 1, cj)],
            self.values[g.idx(ci, cj + 1)],
            self.values[g.idx(ci + 1, cj + 1)],
        ]
    }

    pub fn value(&self, p: Point2) -> f64 {
        match self.grid.locate(p) {
            None => 0.0,
            Some((i, j, s, t)) => {
                let [a, b, c, d] = self.corners(i, j);
                (1.0 - s) * (1.0 - t) * a + s * (1.0 - t) * b + (1.0 - s) * t * c + s * t * d
            }
        }
    }

    fn grad_local(&self, i: usize, j: usize, s: f64, t: f64) -> [f64; 2] {
        let [a, b, c, d] = self.corners(i, j);
        let h = self.grid.h;
        [
            ((1.0 - t) * (b - a) + t * (d - c)) / h,
            ((1.0 - s) * (c - a) + s * (d - b)) / h,
        ]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lipschitz constant of the bilinear interpolant (corner maxima of `|∇φ|`).
    pub fn lipschitz(&self) -> f64 {
        let mut lip: f64 = 0.0;
        for j in 0..self.grid.ny - 1 {
            for i in 0..self.grid.nx - 1 {
                for (s, t) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
                    let g = self.grad_local(i, j, s, t);
                    lip = lip.max(g[0].hypot(g[1]));
                }
            }
        }
        lip
    }

    /// `sup|φ| + Lip(φ)`.
    pub fn c01_norm(&self) -> f64 {
        self.sup_norm() + self.lipschitz()
    }

    /// Visits the pieces of the axis-aligned box `[lo, hi]` cut by lattice
    /// lines: `(cell i, cell j, measure, s, t)` with `(s, t)` the local centre.
    /// A degenerate side contributes a unit factor to the measure.
    fn pieces(&self, lo: Point2, hi: Point2, mut f: impl FnMut(usize, usize, f64, f64, f64)) {
        let g = &self.grid;
        // φ vanishes outside the lattice, so clip to its extent
        let e = g.extent();
        let clip = |a: f64, b: f64, min: f64, max: f64| -> Option<(f64, f64)> {
            let (ca, cb) = (a.max(min), b.min(max));
            if ca > cb || (a < b && ca == cb) {
                None
            } else {
                Some((ca, cb))
            }
        };
        let (Some((x0, x1)), Some((y0, y1))) = (
            clip(lo.x1, hi.x1, e.min.x1, e.max.x1),
            clip(lo.x2, hi.x2, e.min.x2, e.max.x2),
        ) else {
            return;
        };
        let (lo, hi) = (Point2::new(x0, y0), Point2::new(x1, y1));
        // per axis: first and last cell index and the scaled endpoints
        let span = |a: f64, b: f64, o: f64, n: usize| -> (usize, usize, f64, f64) {
            let fa = (a - o) / g.h;
            let fb = (b - o) / g.h;
            let last = n - 2;
            let k0 = (fa.floor().max(0.0) as usize).min(last);
            if a == b {
                return (k0, k0, fa, fb);
            }
            let k1 = ((fb.ceil().max(1.0) as usize) - 1).min(last);
            (k0, k1, fa, fb)
        };
        // (measure, local centre) of the piece in cell k, or None if empty
        let piece = |k: usize, fa: f64, fb: f64| -> Option<(f64, f64)> {
            if fa == fb {
                return Some((1.0, fa - k as f64));
            }
            let s0 = fa.max(k as f64);
            let s1 = fb.min(k as f64 + 1.0);
            (s1 > s0).then_some(((s1 - s0) * g.h, 0.5 * (s0 + s1) - k as f64))
        };
        let (i0, i1, xa, xb) = span(lo.x1, hi.x1, g.origin.x1, g.nx);
        let (j0, j1, ya, yb) = span(lo.x2, hi.x2, g.origin.x2, g.ny);
        for j in j0..=j1 {
            let Some((my, t)) = piece(j, ya, yb) else { continue };
            for i in i0..=i1 {
                if let Some((mx, s)) = piece(i, xa, xb) {
                    f(i, j, mx * my, s, t);
                }
            }
        }
    }

    /// `∫ ∇φ` over an axis-aligned box (or segment when one side is degenerate).
    pub fn integrate_grad(&self, lo: Point2, hi: Point2) -> [f64; 2] {
        let mut acc = [0.0; 2];
        self.pieces(lo, hi, |i, j, m, s, t| {
            let g = self.grad_local(i, j, s, t);
            acc[0] += m * g[0];
            acc[1] += m * g[1];
        });
        acc
    }

    /// Adds `∫ v · ∇ψ_n` over the box to every hat function `ψ_n` of the lattice.
    pub(crate) fn scatter_grad_loads(&self, lo: Point2, hi: Point2, v: [f64; 2], loads: &mut [f64]) {
        let g = self.grid;
        let inv = 1.0 / g.h;
        self.pieces(lo, hi, |i, j, m, s, t| {
            // gradients of the four hats at the piece centre
            let hats = [
                ((i, j), [-(1.0 - t) * inv, -(1.0 - s) * inv]),
                ((i + 1, j), [(1.0 - t) * inv, -s * inv]),
                ((i, j + 1), [-t * inv, (1.0 - s) * inv]),
                ((i + 1, j + 1), [t * inv, s * inv]),
            ];
            for ((a, b), gr) in hats {
                loads[g.idx(a, b)] += m * (v[0] * gr[0] + v[1] * gr[1]);
            }
        });
    }
}

/// Segment carrying a jump density of `λ_u` per unit length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpDensity {
    pub a: Point2,
    pub b: Point2,
    pub density: [f64; 2],
}

/// `λ_u` split into per-cell densities and per-jump-edge line densities.
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentJ {
    pub grid: Grid,
    /// Row-major over cells; the vector `(−λ₂, λ₁)`.
    pub cells: Vec<[f64; 2]>,
    pub jumps: Vec<JumpDensity>,
}

/// How the jump part of `λ_u` evaluates the trace on a jump edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JumpRule {
    /// `ū = (u⁺ + u⁻)/2`.
    MinimalLifting,
    /// A single trace in place of `ū`.
    OneSided(Side),
    /// Lifted-angle jump `½[θ]`, as if `u` followed the circle arc.
    AngleArc,
}

/// Scalar `½(ū¹[u²] − ū²[u¹])` of a jump edge.
fn jump_scalar(e: &JumpEdge, rule: JumpRule) -> f64 {
    let amp = e.amplitude();
    let base = match rule {
        JumpRule::MinimalLifting => amp.mean,
        JumpRule::OneSided(Side::Minus) => amp.minus,
        JumpRule::OneSided(Side::Plus) => amp.plus,
        JumpRule::AngleArc => return 0.5 * (e.theta_plus - e.theta_minus),
    };
    0.5 * (base[0] * amp.jump[1] - base[1] * amp.jump[0])
}

/// Line density of `λ_u` on a jump edge: the scalar times `ν^⊥`.
pub fn jump_density(e: &JumpEdge) -> [f64; 2] {
    jump_density_with(e, JumpRule::MinimalLifting)
}

pub fn jump_density_with(e: &JumpEdge, rule: JumpRule) -> [f64; 2] {
    let c = jump_scalar(e, rule);
    let n = e.normal();
    [-c * n[1], c * n[0]]
}

fn perp(j: [f64; 2]) -> [f64; 2] {
    [-j[1], j[0]]
}

fn cell_box(g: &Grid, i: usize, j: usize) -> (Point2, Point2) {
    (g.node(i, j), g.node(i + 1, j + 1))
}

pub fn lambda_field(u: &S1Field) -> CurrentJ {
    let g = *u.grid();
    let mut cells = Vec::with_capacity(g.n_cells());
    u.for_each_cell(|_, _, m| cells.push(perp(m.current())));
    let jumps = u
        .jumps()
        .iter()
        .map(|e| {
            let (a, b) = e.segment(&g);
            JumpDensity {
                a,
                b,
                density: jump_density(e),
            }
        })
        .collect();
    CurrentJ { grid: g, cells, jumps }
}

impl CurrentJ {
    pub fn zero(grid: Grid) -> Self {
        Self {
            cells: vec![[0.0; 2]; grid.n_cells()],
            jumps: Vec::new(),
            grid,
        }
    }

    /// `⟨Ju, φ⟩ = ∫ ∇φ · dλ_u`.
    pub fn apply(&self, phi: &TestFunction) -> f64 {
        let g = &self.grid;
        let mut total = 0.0;
        for j in 0..g.ny - 1 {
            for i in 0..g.nx - 1 {
                let v = self.cells[j * (g.nx - 1) + i];
                if v == [0.0, 0.0] {
                    continue;
                }
                let (lo, hi) = cell_box(g, i, j);
                let gr = phi.integrate_grad(lo, hi);
                total += v[0] * gr[0] + v[1] * gr[1];
            }
        }
        for jd in &self.jumps {
            let (lo, hi) = ordered(jd.a, jd.b);
            let gr = phi.integrate_grad(lo, hi);
            total += jd.density[0] * gr[0] + jd.density[1] * gr[1];
        }
        total
    }

    /// `∫ |λ_u|` (Euclidean norm of the density).
    pub fn total_mass(&self) -> f64 {
        let h = self.grid.h;
        let cells: f64 = self.cells.iter().map(|v| v[0].hypot(v[1])).sum::<f64>() * h * h;
        let jumps: f64 = self.jumps.iter().map(|j| j.density[0].hypot(j.density[1])).sum::<f64>() * h;
        cells + jumps
    }

    /// `(|λ₁|(Ω), |λ₂|(Ω))`.
    pub fn component_masses(&self) -> (f64, f64) {
        let h = self.grid.h;
        let (mut m1, mut m2) = (0.0, 0.0);
        for v in &self.cells {
            m1 += v[1].abs() * h * h;
            m2 += v[0].abs() * h * h;
        }
        for j in &self.jumps {
            m1 += j.density[1].abs() * h;
            m2 += j.density[0].abs() * h;
        }
        (m1, m2)
    }

    /// `⟨Ju, ψ_n⟩` for every hat function of `lattice`.
    pub fn hat_loads(&self, lattice: &Grid) -> Vec<f64> {
        let probe = TestFunction::zero(*lattice);
        let mut loads = vec![0.0; lattice.n_nodes()];
        let g = &self.grid;
        for j in 0..g.ny - 1 {
            for i in 0..g.nx - 1 {
                let v = self.cells[j * (g.nx - 1) + i];
                if v != [0.0, 0.0] {
                    let (lo, hi) = cell_box(g, i, j);
                    probe.scatter_grad_loads(lo, hi, v, &mut loads);
                }
            }
        }
        for jd in &self.jumps {
            let (lo, hi) = ordered(jd.a, jd.b);
            probe.scatter_grad_loads(lo, hi, jd.density, &mut loads);
        }
        loads
    }
}

fn ordered(a: Point2, b: Point2) -> (Point2, Point2) {
    (
        Point2::new(a.x1.min(b.x1), a.x2.min(b.x2)),
        Point2::new(a.x1.max(b.x1), a.x2.max(b.x2)),
    )
}

/// `⟨Ju, φ⟩` streamed over the field without storing `λ_u`.
pub fn ju_apply(u: &S1Field, phi: &TestFunction) -> f64 {
    ju_apply_with(u, phi, JumpRule::MinimalLifting)
}

pub fn ju_apply_with(u: &S1Field, phi: &TestFunction, rule: JumpRule) -> f64 {
    let g = *u.grid();
    let mut total = 0.0;
    u.for_each_cell(|i, j, m| {
        let v = perp(m.current());
        let (lo, hi) = cell_box(&g, i, j);
        let gr = phi.integrate_grad(lo, hi);
        total += v[0] * gr[0] + v[1] * gr[1];
    });
    for e in u.jumps() {
        let (a, b) = e.segment(&g);
        let (lo, hi) = ordered(a, b);
        let gr = phi.integrate_grad(lo, hi);
        let d = jump_density_with(e, rule);
        total += d[0] * gr[0] + d[1] * gr[1];
    }
    total
}

/// Streams the hat loads `⟨Ju, ψ_n⟩` on `lattice` directly from the field.
pub fn ju_hat_loads(u: &S1Field, lattice: &Grid) -> Vec<f64> {
    let g = *u.grid();
    let probe = TestFunction::zero(*lattice);
    let mut loads = vec![0.0; lattice.n_nodes()];
    u.for_each_cell(|i, j, m| {
        let v = perp(m.current());
        if v != [0.0, 0.0] {
            let (lo, hi) = cell_box(&g, i, j);
            probe.scatter_grad_loads(lo, hi, v, &mut loads);
        }
    });
    for e in u.jumps() {
        let (a, b) = e.segment(&g);
        let (lo, hi) = ordered(a, b);
        probe.scatter_grad_loads(lo, hi, jump_density(e), &mut loads);
    }
    loads
}

/// Number of circle samples: `max(64, ⌈8·2πr/h⌉)`.
pub fn circle_samples(r: f64, h: f64) -> usize {
    ((8.0 * TAU * r / h).ceil() as usize).max(64)
}

fn check_circle(u: &S1Field, center: Point2, r: f64) -> Result<()> {
    let g = u.grid();
    if r < 4.0 * g.h * (1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!(
            "circle radius {r} below 4h = {}",
            4.0 * g.h
        )));
    }
    let disk = Ball::new(center, r);
    if !g.extent().contains_ball(&disk) || !u.domain().outer.contains_ball(&disk) {
        return Err(Error::InvalidInput(format!(
            "circle B_{r}({}, {}) leaves the domain",
            center.x1, center.x2
        )));
    }
    if circle_hits_jump(u, center, r) {
        return Err(Error::InvalidInput(format!(
            "circle B_{r}({}, {}) crosses a jump edge",
            center.x1, center.x2
        )));
    }
    Ok(())
}

/// Whether the circle meets any jump edge.
pub fn circle_hits_jump(u: &S1Field, center: Point2, r: f64) -> bool {
    let g = u.grid();
    u.jumps().iter().any(|e| {
        let (a, b) = e.segment(g);
        circle_meets_segment(center, r, a, b)
    })
}

fn circle_points(center: Point2, r: f64, n: usize) -> impl Iterator<Item = Point2> {
    (0..n).map(move |k| {
        let t = TAU * k as f64 / n as f64;
        center + Point2::new(t.cos(), t.sin()) * r
    })
}

fn sampled_circle(u: &S1Field, center: Point2, r: f64) -> Result<Vec<[f64; 2]>> {
    check_circle(u, center, r)?;
    let n = circle_samples(r, u.grid().h);
    circle_points(center, r, n)
        .map(|p| {
            u.sample(p).ok_or_else(|| {
                Error::Numerical(format!("field vanishes at ({}, {})", p.x1, p.x2))
            })
        })
        .collect()
}

fn winding_of(samples: &[[f64; 2]]) -> f64 {
    let n = samples.len();
    let mut sum = 0.0;
    for k in 0..n {
        let a = samples[k];
        let b = samples[(k + 1) % n];
        sum += wrap(b[1].atan2(b[0]) - a[1].atan2(a[0]));
    }
    sum / TAU
}

fn to_integer(w: f64) -> Result<i32> {
    let r = w.round();
    if (w - r).abs() > 1e-6 {
        return Err(Error::Numerical(format!("non-integer winding {w}")));
    }
    Ok(r as i32)
}

/// Winding number of `u` on `∂B_r(center)` from wrapped angle increments.
pub fn degree_on_circle(u: &S1Field, center: Point2, r: f64) -> Result<i32> {
    to_integer(winding_of(&sampled_circle(u, center, r)?))
}

/// `(1/π) ∮ j(u)·τ`, evaluated from chords of the sampled circle.
pub fn circulation_degree(u: &S1Field, center: Point2, r: f64) -> Result<f64> {
    let s = sampled_circle(u, center, r)?;
    let n = s.len();
    let mut circ = 0.0;
    for k in 0..n {
        let a = s[k];
        let b = s[(k + 1) % n];
        // ½ (u¹ Δu² − u² Δu¹) with the midpoint value
        let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        circ += 0.5 * (m[0] * (b[1] - a[1]) - m[1] * (b[0] - a[0]));
    }
    Ok(circ / PI)
}

/// `∫_{∂B_r} |∇u| dH¹` from the piecewise gradient at sampled points.
pub fn circle_gradient_integral(u: &S1Field, center: Point2, r: f64) -> Result<f64> {
    let g = u.grid();
    let disk = Ball::new(center, r);
    if !g.extent().contains_ball(&disk) {
        return Err(Error::InvalidInput("circle leaves the grid".into()));
    }
    let n = circle_samples(r, g.h);
    let mut sum = 0.0;
    for p in circle_points(center, r, n) {
        let gr = u
            .grad_at(p)
            .ok_or_else(|| Error::InvalidInput("circle leaves the grid".into()))?;
        sum += gr.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    }
    Ok(sum * TAU * r / n as f64)
}

/// Winding of `u` on the outer boundary of a union of disks: sums the wrapped
/// increments along the arcs of each circle not covered by the other disks.
pub fn degree_on_union_boundary(u: &S1Field, balls: &[Ball]) -> Result<i32> {
    let g = u.grid();
    let mut total = 0.0;
    for (k, b) in balls.iter().enumerate() {
        if circle_hits_jump(u, b.center, b.radius) {
            return Err(Error::InvalidInput("union boundary crosses a jump edge".into()));
        }
        let n = circle_samples(b.radius, g.h);
        let pts: Vec<Point2> = circle_points(b.center, b.radius, n).collect();
        let covered: Vec<bool> = pts
            .iter()
            .map(|p| {
                balls
                    .iter()
                    .enumerate()
                    .any(|(m, o)| m != k && o.center.dist(*p) < o.radius)
            })
            .collect();
        if covered.iter().all(|&c| c) {
            continue;
        }
        for q in 0..n {
            let q1 = (q + 1) % n;
            if covered[q] || covered[q1] {
                continue;
            }
            let a = u.sample(pts[q]).ok_or_else(|| Error::Numerical("field vanishes".into()))?;
            let c = u.sample(pts[q1]).ok_or_else(|| Error::Numerical("field vanishes".into()))?;
            total += wrap(c[1].atan2(c[0]) - a[1].atan2(a[0]));
        }
        // arcs entering and leaving covered stretches are closed through the
        // intersection points shared with the neighbouring circle
        for q in 0..n {
            let q1 = (q + 1) % n;
            if covered[q] != covered[q1] {
                let inside_pt = if covered[q] { pts[q1] } else { pts[q] };
                let cross = crossing_point(b, balls, k, pts[q], pts[q1]);
                let a = u.sample(inside_pt).ok_or_else(|| Error::Numerical("field vanishes".into()))?;
                let c = u.sample(cross).ok_or_else(|| Error::Numerical("field vanishes".into()))?;
                let inc = wrap(c[1].atan2(c[0]) - a[1].atan2(a[0]));
                total += if covered[q] { -inc } else { inc };
            }
        }
    }
    to_integer(total / TAU)
}

/// Point where the arc between two samples enters the nearest other disk.
fn crossing_point(b: &Ball, balls: &[Ball], k: usize, p: Point2, q: Point2) -> Point2 {
    let ang = |x: Point2| (x.x2 - b.center.x2).atan2(x.x1 - b.center.x1);
    let (mut lo, mut hi) = (ang(p), ang(q));
    if hi < lo - PI {
        hi += TAU;
    } else if hi > lo + PI {
        lo += TAU;
    }
    let at = |t: f64| b.center + Point2::new(t.cos(), t.sin()) * b.radius;
    let inside = |x: Point2| {
        balls
            .iter()
            .enumerate()
            .any(|(m, o)| m != k && o.center.dist(x) < o.radius)
    };
    let p_in = inside(p);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if inside(at(mid)) == p_in {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Per-cell winding of the lifted angle around the plaquette, row-major.
pub fn plaquette_vorticity(u: &S1Field) -> Vec<i32> {
    let g = u.grid();
    let (cx, cy) = (g.nx - 1, g.ny - 1);
    let incx: Vec<f64> = (0..g.ny)
        .flat_map(|j| (0..cx).map(move |i| (i, j)))
        .map(|(i, j)| u.edge_increment(EdgeAxis::X, i, j))
        .collect();
    let incy: Vec<f64> = (0..cy)
        .flat_map(|j| (0..g.nx).map(move |i| (i, j)))
        .map(|(i, j)| u.edge_increment(EdgeAxis::Y, i, j))
        .collect();
    let mut out = Vec::with_capacity(cx * cy);
    for j in 0..cy {
        for i in 0..cx {
            let s = incx[j * cx + i] + incy[j * g.nx + i + 1] - incx[(j + 1) * cx + i] - incy[j * g.nx + i];
            out.push((s / TAU).round() as i32);
        }
    }
    out
}

/// Writes the cells with nonzero vorticity as `i,j,x,y,vorticity`.
pub fn write_vorticity_csv<W: Write>(u: &S1Field, mut w: W) -> Result<()> {
    let g = u.grid();
    writeln!(w, "i,j,x,y,vorticity")?;
    for (k, v) in plaquette_vorticity(u).into_iter().enumerate() {
        if v != 0 {
            let (i, j) = (k % (g.nx - 1), k / (g.nx - 1));
            let c = g.cell_center(i, j);
            writeln!(w, "{i},{j},{},{},{v}", c.x1, c.x2)?;
        }
    }
    Ok(())
}

/// Unit vector at a trace angle, re-exported for callers building traces.
pub fn trace_unit(theta: f64) -> [f64; 2] {
    unit(theta)
}
