//! Grid-sampled S¹-valued maps with an explicit jump-edge set.
//!
//! Nodes sit at `origin + (i h, j h)`. A jump edge is a dual segment of length
//! `h` crossing one primal edge at its midpoint; the traces on both sides are
//! stored explicitly.

mod construct;
mod dump;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point2, Rect};

pub use construct::{
    make_dirichlet_field, make_noisy_recovery_field, make_recovery_field, make_smooth_field,
    make_winding_field, recovery_angle, smoothstep, vartheta, BoundaryField, Dipole, Side,
};
pub use dump::{read_field, write_field};

/// Unit vector `(cos θ, sin θ)`.
#[inline]
pub fn unit(theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c, s]
}

/// Wraps an angle difference into `(-π, π]`.
#[inline]
pub fn wrap(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Point2,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(origin: Point2, h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) || nx < 2 || ny < 2 || !origin.is_finite() {
            return Err(Error::InvalidInput(format!(
                "bad grid: h = {h}, nx = {nx}, ny = {ny}"
            )));
        }
        Ok(Self { origin, h, nx, ny })
    }

    /// Grid whose cell centres include every multiple of `h` inside `rect`
    /// (nodes offset by half a cell); the node hull covers `rect`.
    pub fn covering(rect: &Rect, h: f64) -> Result<Self> {
        let cells = |len: f64| -> Result<usize> {
            let c = len / h;
            if (c - c.round()).abs() > 1e-9 * c.max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "rectangle side {len} is not a multiple of h = {h}"
                )));
            }
            Ok(c.round() as usize)
        };
        let (cx, cy) = (cells(rect.width())?, cells(rect.height())?);
        Self::new(
            Point2::new(rect.min.x1 - 0.5 * h, rect.min.x2 - 0.5 * h),
            h,
            cx + 2,
            cy + 2,
        )
    }

    /// Grid with nodes on the boundary of `rect` and `n` cells along its longer side.
    pub fn lattice(rect: &Rect, n: usize) -> Result<Self> {
        let h = rect.width().max(rect.height()) / n as f64;
        let count = |len: f64| -> Result<usize> {
            let c = len / h;
            if (c - c.round()).abs() > 1e-9 * c.max(1.0) {
                return Err(Error::InvalidInput(
                    "rectangle sides must be commensurate with the lattice spacing".into(),
                ));
            }
            Ok(c.round() as usize + 1)
        };
        Self::new(rect.min, h, count(rect.width())?, count(rect.height())?)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.origin.x1 + i as f64 * self.h,
            self.origin.x2 + j as f64 * self.h,
        )
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.origin.x1 + (i as f64 + 0.5) * self.h,
            self.origin.x2 + (j as f64 + 0.5) * self.h,
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_cells(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    pub fn extent(&self) -> Rect {
        Rect {
            min: self.origin,
            max: self.node(self.nx - 1, self.ny - 1),
        }
    }

    /// Cell containing `p` and local coordinates in `[0, 1]²`; `None` outside.
    pub fn locate(&self, p: Point2) -> Option<(usize, usize, f64, f64)> {
        let fx = (p.x1 - self.origin.x1) / self.h;
        let fy = (p.x2 - self.origin.x2) / self.h;
        let (mx, my) = ((self.nx - 1) as f64, (self.ny - 1) as f64);
        if !(fx >= 0.0 && fy >= 0.0 && fx <= mx && fy <= my) {
            return None;
        }
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        Some((i, j, fx - i as f64, fy - j as f64))
    }

    /// Distance from `p` to the nearest node.
    pub fn dist_to_node(&self, p: Point2) -> f64 {
        let fx = (p.x1 - self.origin.x1) / self.h;
        let fy = (p.x2 - self.origin.x2) / self.h;
        (fx - fx.round()).hypot(fy - fy.round()) * self.h
    }

    /// Whether `p` is (numerically) a cell centre.
    pub fn is_cell_center(&self, p: Point2) -> bool {
        let fx = (p.x1 - self.origin.x1) / self.h - 0.5;
        let fy = (p.x2 - self.origin.x2) / self.h - 0.5;
        (fx - fx.round()).abs() < 1e-9 && (fy - fy.round()).abs() < 1e-9
    }
}

/// Orientation of the primal edge a jump edge crosses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeAxis {
    /// Primal edge `(i,j)-(i+1,j)`, crossed by a vertical dual segment; `ν = e₁`.
    X,
    /// Primal edge `(i,j)-(i,j+1)`, crossed by a horizontal dual segment; `ν = e₂`.
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEdge {
    pub axis: EdgeAxis,
    pub i: usize,
    pub j: usize,
    /// Lifted trace angle on the side `ν` points away from.
    pub theta_minus: f64,
    /// Lifted trace angle on the side `ν` points to.
    pub theta_plus: f64,
}

/// `[u]`, `ū` and the segment `ū^θ` of one jump edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpAmplitude {
    pub jump: [f64; 2],
    pub mean: [f64; 2],
    pub minus: [f64; 2],
    pub plus: [f64; 2],
}

impl JumpAmplitude {
    /// `θ u⁺ + (1 − θ) u⁻`.
    pub fn interpolate(&self, t: f64) -> [f64; 2] {
        [
            t * self.plus[0] + (1.0 - t) * self.minus[0],
            t * self.plus[1] + (1.0 - t) * self.minus[1],
        ]
    }
}

impl JumpEdge {
    pub fn crossing_point(&self, g: &Grid) -> Point2 {
        let p = g.node(self.i, self.j);
        match self.axis {
            EdgeAxis::X => Point2::new(p.x1 + 0.5 * g.h, p.x2),
            EdgeAxis::Y => Point2::new(p.x1, p.x2 + 0.5 * g.h),
        }
    }

    /// Endpoints of the dual segment.
    pub fn segment(&self, g: &Grid) -> (Point2, Point2) {
        let m = self.crossing_point(g);
        let d = 0.5 * g.h;
        match self.axis {
            EdgeAxis::X => (Point2::new(m.x1, m.x2 - d), Point2::new(m.x1, m.x2 + d)),
            EdgeAxis::Y => (Point2::new(m.x1 - d, m.x2), Point2::new(m.x1 + d, m.x2)),
        }
    }

    pub fn normal(&self) -> [f64; 2] {
        match self.axis {
            EdgeAxis::X => [1.0, 0.0],
            EdgeAxis::Y => [0.0, 1.0],
        }
    }

    pub fn amplitude(&self) -> JumpAmplitude {
        let minus = unit(self.theta_minus);
        let plus = unit(self.theta_plus);
        JumpAmplitude {
            jump: [plus[0] - minus[0], plus[1] - minus[1]],
            mean: [0.5 * (plus[0] + minus[0]), 0.5 * (plus[1] + minus[1])],
            minus,
            plus,
        }
    }
}

/// Affine piece of a cell: area fraction, centre value, gradient (`grad[c][k] = ∂_k u^c`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellPiece {
    pub fraction: f64,
    pub value: [f64; 2],
    pub grad: [[f64; 2]; 2],
}

impl CellPiece {
    /// `½(ū¹∇u² − ū²∇u¹)`, the vector `j(u)` on this piece.
    pub fn current(&self) -> [f64; 2] {
        let [a, b] = self.value;
        [
            0.5 * (a * self.grad[1][0] - b * self.grad[0][0]),
            0.5 * (a * self.grad[1][1] - b * self.grad[0][1]),
        ]
    }

    pub fn grad_norm2(&self) -> f64 {
        self.grad.iter().flatten().map(|v| v * v).sum()
    }
}

/// A cell either carries one affine piece or is split in two halves by a jump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CellModel {
    Whole(CellPiece),
    Split([CellPiece; 2]),
}

impl CellModel {
    pub fn pieces(&self) -> &[CellPiece] {
        match self {
            CellModel::Whole(p) => std::slice::from_ref(p),
            CellModel::Split(p) => p,
        }
    }

    /// Area-weighted gradient.
    pub fn mean_grad(&self) -> [[f64; 2]; 2] {
        let mut g = [[0.0; 2]; 2];
        for p in self.pieces() {
            for c in 0..2 {
                for k in 0..2 {
                    g[c][k] += p.fraction * p.grad[c][k];
                }
            }
        }
        g
    }

    /// Area-weighted `∫_cell |∇u|² / h²`.
    pub fn grad_norm2(&self) -> f64 {
        self.pieces().iter().map(|p| p.fraction * p.grad_norm2()).sum()
    }

    /// Area-weighted `j(u)`.
    pub fn current(&self) -> [f64; 2] {
        let mut j = [0.0; 2];
        for p in self.pieces() {
            let c = p.current();
            j[0] += p.fraction * c[0];
            j[1] += p.fraction * c[1];
        }
        j
    }
}

fn avg2(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn sub2(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Bilinear piece on a rectangle of width `w`, height `hgt` with corners
/// `(bottom-left, bottom-right, top-left, top-right)`.
fn rect_piece(fraction: f64, c: [[f64; 2]; 4], w: f64, hgt: f64) -> CellPiece {
    let [bl, br, tl, tr] = c;
    let mut grad = [[0.0; 2]; 2];
    for k in 0..2 {
        grad[k][0] = 0.5 * ((br[k] - bl[k]) + (tr[k] - tl[k])) / w;
        grad[k][1] = 0.5 * ((tl[k] - bl[k]) + (tr[k] - br[k])) / hgt;
    }
    let value = [
        0.25 * (bl[0] + br[0] + tl[0] + tr[0]),
        0.25 * (bl[1] + br[1] + tl[1] + tr[1]),
    ];
    CellPiece {
        fraction,
        value,
        grad,
    }
}

#[derive(Clone, Debug)]
pub struct S1Field {
    grid: Grid,
    domain: Domain,
    theta: Vec<f64>,
    jumps: Vec<JumpEdge>,
    cut_x: HashMap<usize, usize>,
    cut_y: HashMap<usize, usize>,
}

impl S1Field {
    /// Validates sizes, edge indices and admissibility (`S̄_u ⊂ Ω̄′`).
    pub fn new(grid: Grid, domain: Domain, theta: Vec<f64>, jumps: Vec<JumpEdge>) -> Result<Self> {
        if theta.len() != grid.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "expected {} node angles, got {}",
                grid.n_nodes(),
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("non-finite node angle".into()));
        }
        let mut cut_x = HashMap::new();
        let mut cut_y = HashMap::new();
        for (k, e) in jumps.iter().enumerate() {
            let (ok, map) = match e.axis {
                EdgeAxis::X => (e.i + 1 < grid.nx && e.j < grid.ny, &mut cut_x),
                EdgeAxis::Y => (e.i < grid.nx && e.j + 1 < grid.ny, &mut cut_y),
            };
            if !ok {
                return Err(Error::InvalidInput(format!(
                    "jump edge ({:?}, {}, {}) outside the grid",
                    e.axis, e.i, e.j
                )));
            }
            if !(e.theta_minus.is_finite() && e.theta_plus.is_finite()) {
                return Err(Error::InvalidInput("non-finite trace angle".into()));
            }
            if map.insert(grid.idx(e.i, e.j), k).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate jump edge ({:?}, {}, {})",
                    e.axis, e.i, e.j
                )));
            }
            let (a, b) = e.segment(&grid);
            if !(domain.inner.contains(a) && domain.inner.contains(b)) {
                return Err(Error::Admissibility(format!(
                    "jump edge at ({:.6}, {:.6}) leaves the closed inner rectangle",
                    e.crossing_point(&grid).x1,
                    e.crossing_point(&grid).x2
                )));
            }
        }
        Ok(Self {
            grid,
            domain,
            theta,
            jumps,
            cut_x,
            cut_y,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn jumps(&self) -> &[JumpEdge] {
        &self.jumps
    }

    #[inline]
    pub fn angle(&self, i: usize, j: usize) -> f64 {
        self.theta[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn unit_at(&self, i: usize, j: usize) -> [f64; 2] {
        unit(self.angle(i, j))
    }

    pub fn cut_x(&self, i: usize, j: usize) -> Option<&JumpEdge> {
        self.cut_x.get(&self.grid.idx(i, j)).map(|&k| &self.jumps[k])
    }

    pub fn cut_y(&self, i: usize, j: usize) -> Option<&JumpEdge> {
        self.cut_y.get(&self.grid.idx(i, j)).map(|&k| &self.jumps[k])
    }

    /// `H¹(S̄_u)`: dual edges overlap at most in endpoints.
    pub fn jump_length(&self) -> f64 {
        self.jumps.len() as f64 * self.grid.h
    }

    /// Jump length of the edges whose crossing point lies in `region`.
    pub fn jump_length_in(&self, region: &Rect) -> f64 {
        self.jumps
            .iter()
            .filter(|e| region.contains(e.crossing_point(&self.grid)))
            .count() as f64
            * self.grid.h
    }

    /// Lifted angle increment along a primal edge in its positive direction,
    /// split into three wrapped pieces when the edge is cut.
    pub fn edge_increment(&self, axis: EdgeAxis, i: usize, j: usize) -> f64 {
        let (a, b, cut) = match axis {
            EdgeAxis::X => (self.angle(i, j), self.angle(i + 1, j), self.cut_x(i, j)),
            EdgeAxis::Y => (self.angle(i, j), self.angle(i, j + 1), self.cut_y(i, j)),
        };
        match cut {
            None => wrap(b - a),
            Some(e) => {
                wrap(e.theta_minus - a) + wrap(e.theta_plus - e.theta_minus) + wrap(b - e.theta_plus)
            }
        }
    }

    fn has_cut(&self, i: usize, j: usize) -> bool {
        !(self.cut_x.is_empty() && self.cut_y.is_empty())
            && (self.cut_x(i, j).is_some()
                || self.cut_x(i, j + 1).is_some()
                || self.cut_y(i, j).is_some()
                || self.cut_y(i + 1, j).is_some())
    }

    /// Affine model of cell `(i,j)` given its corner unit vectors
    /// `(bl, br, tl, tr)`.
    fn cell_from_corners(&self, i: usize, j: usize, c: [[f64; 2]; 4]) -> CellModel {
        let h = self.grid.h;
        if !self.has_cut(i, j) {
            return CellModel::Whole(rect_piece(1.0, c, h, h));
        }
        let [bl, br, tl, tr] = c;
        let bottom = self.cut_x(i, j);
        let top = self.cut_x(i, j + 1);
        let left = self.cut_y(i, j);
        let right = self.cut_y(i + 1, j);
        let vertical = bottom.is_some() || top.is_some();
        let horizontal = left.is_some() || right.is_some();
        let traces = |e: Option<&JumpEdge>, a: [f64; 2], b: [f64; 2]| match e {
            Some(e) => (unit(e.theta_minus), unit(e.theta_plus)),
            None => (avg2(a, b), avg2(a, b)),
        };
        if vertical && !horizontal {
            let (bm, bp) = traces(bottom, bl, br);
            let (tm, tp) = traces(top, tl, tr);
            CellModel::Split([
                rect_piece(0.5, [bl, bm, tl, tm], 0.5 * h, h),
                rect_piece(0.5, [bp, br, tp, tr], 0.5 * h, h),
            ])
        } else if horizontal && !vertical {
            let (lm, lp) = traces(left, bl, tl);
            let (rm, rp) = traces(right, br, tr);
            CellModel::Split([
                rect_piece(0.5, [bl, br, lm, rm], h, 0.5 * h),
                rect_piece(0.5, [lp, rp, tl, tr], h, 0.5 * h),
            ])
        } else {
            // corner of the jump set: one-sided differences on each edge
            let d = |e: Option<&JumpEdge>, a: [f64; 2], b: [f64; 2]| match e {
                None => sub2(b, a),
                Some(e) => {
                    let (m, p) = (unit(e.theta_minus), unit(e.theta_plus));
                    [m[0] - a[0] + b[0] - p[0], m[1] - a[1] + b[1] - p[1]]
                }
            };
            let (db, dt) = (d(bottom, bl, br), d(top, tl, tr));
            let (dl, dr) = (d(left, bl, tl), d(right, br, tr));
            let mut grad = [[0.0; 2]; 2];
            for k in 0..2 {
                grad[k][0] = 0.5 * (db[k] + dt[k]) / h;
                grad[k][1] = 0.5 * (dl[k] + dr[k]) / h;
            }
            let value = [
                0.25 * (bl[0] + br[0] + tl[0] + tr[0]),
                0.25 * (bl[1] + br[1] + tl[1] + tr[1]),
            ];
            CellModel::Whole(CellPiece {
                fraction: 1.0,
                value,
                grad,
            })
        }
    }

    pub fn cell(&self, i: usize, j: usize) -> CellModel {
        let c = [
            self.unit_at(i, j),
            self.unit_at(i + 1, j),
            self.unit_at(i, j + 1),
            self.unit_at(i + 1, j + 1),
        ];
        self.cell_from_corners(i, j, c)
    }

    /// Streams every cell row by row, computing each node's unit vector twice at most.
    pub fn for_each_cell(&self, mut f: impl FnMut(usize, usize, &CellModel)) {
        let nx = self.grid.nx;
        let row = |j: usize| -> Vec<[f64; 2]> { (0..nx).map(|i| self.unit_at(i, j)).collect() };
        let mut lower = row(0);
        for j in 0..self.grid.ny - 1 {
            let upper = row(j + 1);
            for i in 0..nx - 1 {
                let model =
                    self.cell_from_corners(i, j, [lower[i], lower[i + 1], upper[i], upper[i + 1]]);
                f(i, j, &model);
            }
            lower = upper;
        }
    }

    /// Same as [`for_each_cell`](Self::for_each_cell) in column-major order.
    pub fn for_each_cell_column_major(&self, mut f: impl FnMut(usize, usize, &CellModel)) {
        for i in 0..self.grid.nx - 1 {
            for j in 0..self.grid.ny - 1 {
                f(i, j, &self.cell(i, j));
            }
        }
    }

    /// Per-cell area-averaged gradient, row-major.
    pub fn gradient(&self) -> Vec<[[f64; 2]; 2]> {
        let mut out = Vec::with_capacity(self.grid.n_cells());
        self.for_each_cell(|_, _, m| out.push(m.mean_grad()));
        out
    }

    /// Gradient of the piece containing `p`.
    pub fn grad_at(&self, p: Point2) -> Option<[[f64; 2]; 2]> {
        let (i, j, s, t) = self.grid.locate(p)?;
        Some(match self.cell(i, j) {
            CellModel::Whole(piece) => piece.grad,
            CellModel::Split(pieces) => {
                let vertical = self.cut_x(i, j).is_some() || self.cut_x(i, j + 1).is_some();
                let second = if vertical { s >= 0.5 } else { t >= 0.5 };
                pieces[usize::from(second)].grad
            }
        })
    }

    /// Interpolated unit vector at `p`, respecting jump edges.
    pub fn sample(&self, p: Point2) -> Option<[f64; 2]> {
        let (i, j, s, t) = self.grid.locate(p)?;
        let [bl, br, tl, tr] = [
            self.unit_at(i, j),
            self.unit_at(i + 1, j),
            self.unit_at(i, j + 1),
            self.unit_at(i + 1, j + 1),
        ];
        let bilinear = |c: [[f64; 2]; 4], s: f64, t: f64| -> [f64; 2] {
            let mut v = [0.0; 2];
            for k in 0..2 {
                v[k] = (1.0 - s) * (1.0 - t) * c[0][k]
                    + s * (1.0 - t) * c[1][k]
                    + (1.0 - s) * t * c[2][k]
                    + s * t * c[3][k];
            }
            v
        };
        let traces = |e: Option<&JumpEdge>, a: [f64; 2], b: [f64; 2]| match e {
            Some(e) => (unit(e.theta_minus), unit(e.theta_plus)),
            None => (avg2(a, b), avg2(a, b)),
        };
        let v = if !self.has_cut(i, j) {
            bilinear([bl, br, tl, tr], s, t)
        } else {
            let (bottom, top) = (self.cut_x(i, j), self.cut_x(i, j + 1));
            let (left, right) = (self.cut_y(i, j), self.cut_y(i + 1, j));
            let vertical = bottom.is_some() || top.is_some();
            let horizontal = left.is_some() || right.is_some();
            if vertical && !horizontal {
                let (bm, bp) = traces(bottom, bl, br);
                let (tm, tp) = traces(top, tl, tr);
                if s < 0.5 {
                    bilinear([bl, bm, tl, tm], 2.0 * s, t)
                } else {
                    bilinear([bp, br, tp, tr], 2.0 * s - 1.0, t)
                }
            } else if horizontal && !vertical {
                let (lm, lp) = traces(left, bl, tl);
                let (rm, rp) = traces(right, br, tr);
                if t < 0.5 {
                    bilinear([bl, br, lm, rm], s, 2.0 * t)
                } else {
                    bilinear([lp, rp, tl, tr], s, 2.0 * t - 1.0)
                }
            } else {
                let corners = [(0.0, 0.0, bl), (1.0, 0.0, br), (0.0, 1.0, tl), (1.0, 1.0, tr)];
                let nearest = corners
                    .iter()
                    .min_by(|a, b| {
                        let da = (a.0 - s).hypot(a.1 - t);
                        let db = (b.0 - s).hypot(b.1 - t);
                        da.total_cmp(&db)
                    })
                    .map(|c| c.2)
                    .unwrap_or(bl);
                nearest
            }
        };
        let n = v[0].hypot(v[1]);
        if n < 1e-12 {
            return None;
        }
        Some([v[0] / n, v[1] / n])
    }
}
