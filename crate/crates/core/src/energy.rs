//! Energies of grid fields: `F_ε`, the core-radius energy, Ginzburg–Landau,
//! and the constrained minimal Dirichlet integral on perforated regions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, BallFamily, Point2, Rect};
use crate::grid_field::{vartheta, wrap, Grid, S1Field};
use crate::measures::AtomicMeasure;

/// Parts of an energy evaluation. Unused parts are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `½∫|∇u|²`.
    pub dirichlet: f64,
    /// `H¹(S̄_u)/ε`.
    pub jump: f64,
    /// `(1/ε²)∫(1−|u|²)²`.
    pub gl_penalty: f64,
    /// `|μ|(Ω)` in the core-radius energy.
    pub plastic: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn summed(dirichlet: f64, jump: f64, gl_penalty: f64, plastic: f64) -> Self {
        Self {
            dirichlet,
            jump,
            gl_penalty,
            plastic,
            total: dirichlet + jump + gl_penalty + plastic,
        }
    }

    /// The value taken off the admissible class.
    pub fn infinite() -> Self {
        Self {
            total: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("eps must be positive, got {eps}")))
    }
}

fn overlap_area(g: &Grid, i: usize, j: usize, region: &Rect) -> f64 {
    let lo = g.node(i, j);
    let hi = g.node(i + 1, j + 1);
    let w = (hi.x1.min(region.max.x1) - lo.x1.max(region.min.x1)).max(0.0);
    let t = (hi.x2.min(region.max.x2) - lo.x2.max(region.min.x2)).max(0.0);
    w * t
}

/// `F_ε(u; A) = ½∫_A |∇u|² + H¹(S̄_u ∩ A)/ε`, with `A = Ω` by default.
///
/// Cells are weighted by their overlap with `A`; jump edges count when their
/// crossing point lies in `A`.
pub fn f_eps(u: &S1Field, eps: f64, region: Option<&Rect>) -> Result<EnergyBreakdown> {
    check_eps(eps)?;
    let region = region.copied().unwrap_or(u.domain().outer);
    let g = *u.grid();
    let mut dirichlet = 0.0;
    u.for_each_cell(|i, j, m| {
        let area = overlap_area(&g, i, j, &region);
        if area > 0.0 {
            dirichlet += 0.5 * m.grad_norm2() * area;
        }
    });
    let jump = u.jump_length_in(&region) / eps;
    Ok(EnergyBreakdown::summed(dirichlet, jump, 0.0, 0.0))
}

/// `F_ε` on the whole space: fields that failed admissibility get `+∞`.
pub fn f_eps_extended(u: Result<S1Field>, eps: f64) -> Result<EnergyBreakdown> {
    match u {
        Ok(u) => f_eps(&u, eps, None),
        Err(Error::Admissibility(_)) => {
            check_eps(eps)?;
            Ok(EnergyBreakdown::infinite())
        }
        Err(e) => Err(e),
    }
}

/// Fraction of a cell outside every closed disk `B̄_ε(ξ)`, from a 4×4
/// sub-sampling on cells that straddle a circle.
fn punctured_fraction(g: &Grid, i: usize, j: usize, centres: &[Point2], eps: f64) -> f64 {
    let c = g.cell_center(i, j);
    let half_diag = std::f64::consts::FRAC_1_SQRT_2 * g.h;
    let mut straddles = false;
    for x in centres {
        let d = c.dist(*x);
        if d + half_diag <= eps {
            return 0.0;
        }
        if d - half_diag <= eps {
            straddles = true;
        }
    }
    if !straddles {
        return 1.0;
    }
    let lo = g.node(i, j);
    let mut outside = 0;
    for a in 0..4 {
        for b in 0..4 {
            let p = lo + Point2::new((a as f64 + 0.5) * g.h / 4.0, (b as f64 + 0.5) * g.h / 4.0);
            if centres.iter().all(|x| p.dist(*x) > eps) {
                outside += 1;
            }
        }
    }
    outside as f64 / 16.0
}

/// Core-radius energy `½∫_{Ω_ε(μ)} |∇u|² + |μ|(Ω)` with
/// `Ω_ε(μ) = Ω ∖ ∪ B̄_ε(ξ)`.
pub fn cr_energy(mu: &AtomicMeasure, u: &S1Field, eps: f64) -> Result<EnergyBreakdown> {
    check_eps(eps)?;
    let g = *u.grid();
    let region = u.domain().outer;
    let centres: Vec<Point2> = mu.atoms.iter().map(|a| a.point).collect();
    let mut dirichlet = 0.0;
    u.for_each_cell(|i, j, m| {
        let area = overlap_area(&g, i, j, &region);
        if area > 0.0 {
            let f = punctured_fraction(&g, i, j, &centres, eps);
            if f > 0.0 {
                dirichlet += 0.5 * m.grad_norm2() * area * f;
            }
        }
    });
    Ok(EnergyBreakdown::summed(dirichlet, 0.0, 0.0, mu.total_variation()))
}

/// Unconstrained `R²`-valued nodal field, bilinear on cells.
#[derive(Clone, Debug, PartialEq)]
pub struct R2Field {
    pub grid: Grid,
    pub values: Vec<[f64; 2]>,
}

impl R2Field {
    pub fn new(grid: Grid, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "expected {} node values, got {}",
                grid.n_nodes(),
                values.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite node value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point2) -> [f64; 2]) -> Self {
        let mut values = Vec::with_capacity(grid.n_nodes());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.node(i, j)));
            }
        }
        Self { grid, values }
    }

    fn at(&self, i: usize, j: usize) -> [f64; 2] {
        self.values[self.grid.idx(i, j)]
    }
}

/// `½∫|∇u|² + (1/ε²)∫(1−|u|²)²` over the extent of the grid. The Dirichlet
/// part is exact for the bilinear interpolant; the penalty uses 3×3 Gauss
/// points per cell.
pub fn gl_energy(u: &R2Field, eps: f64) -> Result<EnergyBreakdown> {
    check_eps(eps)?;
    let g = &u.grid;
    let h = g.h;
    const GAUSS3: [(f64, f64); 3] = [
        (0.112_701_665_379_258_3, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.887_298_334_620_741_7, 5.0 / 18.0),
    ];
    let mut grad2 = 0.0;
    let mut penalty = 0.0;
    for j in 0..g.ny - 1 {
        for i in 0..g.nx - 1 {
            let [bl, br, tl, tr] = [u.at(i, j), u.at(i + 1, j), u.at(i, j + 1), u.at(i + 1, j + 1)];
            for k in 0..2 {
                // ∂₁u is affine in the vertical coordinate, ∂₂u in the horizontal one
                let (a, b) = (br[k] - bl[k], tr[k] - tl[k]);
                let (c, d) = (tl[k] - bl[k], tr[k] - br[k]);
                grad2 += (a * a + a * b + b * b) / 3.0 + (c * c + c * d + d * d) / 3.0;
            }
            for (s, ws) in GAUSS3 {
                for (t, wt) in GAUSS3 {
                    let mut v = [0.0; 2];
                    for k in 0..2 {
                        v[k] = (1.0 - s) * (1.0 - t) * bl[k] + s * (1.0 - t) * br[k] + (1.0 - s) * t * tl[k] + s * t * tr[k];
                    }
                    let defect = 1.0 - v[0] * v[0] - v[1] * v[1];
                    penalty += ws * wt * defect * defect * h * h;
                }
            }
        }
    }
    Ok(EnergyBreakdown::summed(0.5 * grad2, 0.0, penalty / (eps * eps), 0.0))
}

/// Where the minimal Dirichlet integral is taken before removing the balls
/// of the family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Rect(Rect),
    Disk(Ball),
    /// Union of open disks.
    Union(Vec<Ball>),
}

impl Region {
    fn contains(&self, p: Point2) -> bool {
        match self {
            Region::Rect(r) => r.contains(p),
            Region::Disk(b) => p.dist(b.center) <= b.radius,
            Region::Union(bs) => bs.iter().any(|b| p.dist(b.center) < b.radius),
        }
    }

    fn bounds(&self) -> Option<Rect> {
        let of_ball = |b: &Ball| {
            Rect {
                min: Point2::new(b.center.x1 - b.radius, b.center.x2 - b.radius),
                max: Point2::new(b.center.x1 + b.radius, b.center.x2 + b.radius),
            }
        };
        match self {
            Region::Rect(r) => Some(*r),
            Region::Disk(b) => Some(of_ball(b)),
            Region::Union(bs) => bs.iter().map(of_ball).reduce(|a, b| Rect {
                min: Point2::new(a.min.x1.min(b.min.x1), a.min.x2.min(b.min.x2)),
                max: Point2::new(a.max.x1.max(b.max.x1), a.max.x2.max(b.max.x2)),
            }),
        }
    }
}

/// Result of [`annulus_min_energy`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinEnergy {
    /// `∫_V |∇u|²`, without the ½ of `F_ε`.
    pub integral: f64,
    pub iterations: usize,
    pub relative_residual: f64,
    pub unknowns: usize,
    pub edges: usize,
}

impl MinEnergy {
    /// `½∫_V |∇u|²`, the normalisation of `F_ε`.
    pub fn half_integral(&self) -> f64 {
        0.5 * self.integral
    }
}

pub const CG_TOLERANCE: f64 = 1e-10;

/// `min ∫_V |∇u|²` over `S¹`-valued `u` on `V = region ∖ ∪ B̄` (balls of
/// `family`) with `deg(u, ∂B) = μ(B)` for every ball.
///
/// The lift is `θ = Σ zⁱ ϑ(· − xⁱ) + ψ` with `ψ` single valued. On a lattice
/// of spacing `h`, an edge belongs to `V` when its midpoint does, and its
/// contribution is the squared increment of `θ`. The normal equations for
/// `ψ` are solved by Jacobi-preconditioned conjugate gradients.
pub fn annulus_min_energy(family: &BallFamily, mu: &AtomicMeasure, region: &Region, h: f64) -> Result<MinEnergy> {
    annulus_minimizer(family, mu, region, h).map(|(e, _)| e)
}

/// Minimising lift on the lattice: increments `g + ψ_q − ψ_p` on the edges
/// of `V`.
#[derive(Clone, Debug)]
pub struct MinimalLift {
    origin_index: (i64, i64),
    h: f64,
    increments: HashMap<(i64, i64, u8), f64>,
}

impl MinimalLift {
    /// Lattice node nearest to `p`.
    pub fn snap(&self, p: Point2) -> (i64, i64) {
        ((p.x1 / self.h).round() as i64, (p.x2 / self.h).round() as i64)
    }

    pub fn node(&self, k: (i64, i64)) -> Point2 {
        Point2::new(k.0 as f64 * self.h, k.1 as f64 * self.h)
    }

    /// Increment of the lift from node `p` to its lattice neighbour `q`.
    pub fn increment(&self, p: (i64, i64), q: (i64, i64)) -> Option<f64> {
        match (q.0 - p.0, q.1 - p.1) {
            (1, 0) => self.increments.get(&(p.0, p.1, 0)).copied(),
            (0, 1) => self.increments.get(&(p.0, p.1, 1)).copied(),
            (-1, 0) => self.increments.get(&(q.0, q.1, 0)).map(|v| -v),
            (0, -1) => self.increments.get(&(q.0, q.1, 1)).map(|v| -v),
            _ => None,
        }
    }

    /// `(1/2π)` times the circulation of the lift around the lattice square
    /// of half-width `k` cells centred at the node nearest `center`; `None`
    /// if the loop leaves `V`.
    pub fn winding_on_square(&self, center: Point2, k: i64) -> Option<f64> {
        let c = self.snap(center);
        let mut path = Vec::with_capacity(8 * k as usize + 1);
        for s in -k..k {
            path.push((c.0 + s, c.1 - k));
        }
        for s in -k..k {
            path.push((c.0 + k, c.1 + s));
        }
        for s in -k..k {
            path.push((c.0 - s, c.1 + k));
        }
        for s in -k..k {
            path.push((c.0 - k, c.1 - s));
        }
        path.push(path[0]);
        let mut total = 0.0;
        for w in path.windows(2) {
            total += self.increment(w[0], w[1])?;
        }
        Some(total / std::f64::consts::TAU)
    }

    /// Lattice index of the lower-left node used by the solve.
    pub fn origin_index(&self) -> (i64, i64) {
        self.origin_index
    }
}

/// [`annulus_min_energy`] together with the minimising lift.
///
/// The lattice is `hZ²`, so nested regions give nested edge sets.
pub fn annulus_minimizer(
    family: &BallFamily,
    mu: &AtomicMeasure,
    region: &Region,
    h: f64,
) -> Result<(MinEnergy, MinimalLift)> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("lattice spacing must be positive, got {h}")));
    }
    for a in &mu.atoms {
        if !family.balls.iter().any(|b| a.point.dist(b.center) < b.radius) {
            return Err(Error::InvalidInput(format!(
                "atom ({}, {}) lies outside every ball of the family",
                a.point.x1, a.point.x2
            )));
        }
    }
    let empty = MinEnergy {
        integral: 0.0,
        iterations: 0,
        relative_residual: 0.0,
        unknowns: 0,
        edges: 0,
    };
    let Some(bounds) = region.bounds() else {
        let lift = MinimalLift {
            origin_index: (0, 0),
            h,
            increments: HashMap::new(),
        };
        return Ok((empty, lift));
    };
    let i0 = (bounds.min.x1 / h).floor() as i64 - 1;
    let j0 = (bounds.min.x2 / h).floor() as i64 - 1;
    let nx = ((bounds.max.x1 / h).ceil() as i64 + 2 - i0) as usize;
    let ny = ((bounds.max.x2 / h).ceil() as i64 + 2 - j0) as usize;
    let node = |i: usize, j: usize| Point2::new((i0 + i as i64) as f64 * h, (j0 + j as i64) as f64 * h);
    let in_v = |p: Point2| region.contains(p) && family.balls.iter().all(|b| p.dist(b.center) > b.radius);

    let mut ids: HashMap<usize, usize> = HashMap::new();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut keys: Vec<(i64, i64, u8)> = Vec::new();
    let id_of = |k: usize, ids: &mut HashMap<usize, usize>| {
        let next = ids.len();
        *ids.entry(k).or_insert(next)
    };
    for j in 0..ny {
        for i in 0..nx {
            let p = node(i, j);
            for (dir, (di, dj)) in [(1usize, 0usize), (0, 1)].into_iter().enumerate() {
                let (i2, j2) = (i + di, j + dj);
                if i2 >= nx || j2 >= ny {
                    continue;
                }
                let q = node(i2, j2);
                if !in_v(Point2::new(0.5 * (p.x1 + q.x1), 0.5 * (p.x2 + q.x2))) {
                    continue;
                }
                let g: f64 = mu
                    .atoms
                    .iter()
                    .map(|a| a.weight * wrap(vartheta(q - a.point) - vartheta(p - a.point)))
                    .sum();
                let a = id_of(j * nx + i, &mut ids);
                let b = id_of(j2 * nx + i2, &mut ids);
                edges.push((a, b, g));
                keys.push((i0 + i as i64, j0 + j as i64, dir as u8));
            }
        }
    }
    let n = ids.len();
    let cap = (20.0 * ((nx * ny) as f64).sqrt()).ceil() as usize;
    let (psi, iterations, relative_residual) = solve_normal_equations(n, &edges, cap)?;
    let mut integral = 0.0;
    let mut increments = HashMap::with_capacity(edges.len());
    for (&(a, b, g), key) in edges.iter().zip(keys) {
        let d = g + psi[b] - psi[a];
        integral += d * d;
        increments.insert(key, d);
    }
    let energy = MinEnergy {
        integral,
        iterations,
        relative_residual,
        unknowns: n,
        edges: edges.len(),
    };
    let lift = MinimalLift {
        origin_index: (i0, j0),
        h,
        increments,
    };
    Ok((energy, lift))
}

/// Solves `BᵀB ψ = −Bᵀg` for the edge–node incidence `B`.
fn solve_normal_equations(n: usize, edges: &[(usize, usize, f64)], cap: usize) -> Result<(Vec<f64>, usize, f64)> {
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for &(a, b, g) in edges {
        diag[a] += 1.0;
        diag[b] += 1.0;
        rhs[a] += g;
        rhs[b] -= g;
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(a, b, _) in edges {
            let d = x[b] - x[a];
            y[b] += d;
            y[a] -= d;
        }
    };
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let norm_b = dot(&rhs, &rhs).sqrt();
    let mut x = vec![0.0; n];
    if norm_b == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut r = rhs;
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=cap {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let res = dot(&r, &r).sqrt() / norm_b;
        if res <= CG_TOLERANCE {
            return Ok((x, it, res));
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    let res = dot(&r, &r).sqrt() / norm_b;
    if res <= CG_TOLERANCE {
        return Ok((x, cap, res));
    }
    Err(Error::Numerical(format!(
        "conjugate gradients stopped after {cap} iterations at relative residual {res:.3e}"
    )))
}
