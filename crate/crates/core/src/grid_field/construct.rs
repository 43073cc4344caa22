//! Field generators: winding fields, recovery fields with cored jump
//! segments, seeded dipole noise and the boundary-matched variant.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use super::{wrap, EdgeAxis, Grid, JumpEdge, S1Field};
use crate::error::{Error, Result};
use crate::geometry::{DirichletDomain, Domain, Point2};
use crate::measures::AtomicMeasure;

/// Side of a cut half-line from which a limit is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Limit from `x₁ < c₁`.
    Minus,
    /// Limit from `x₁ > c₁`.
    Plus,
}

/// Polar angle with values in `(−π/2, 3π/2]`; the cut is the half-line
/// `{x₁ = 0, x₂ < 0}`.
pub fn vartheta(v: Point2) -> f64 {
    let a = v.x2.atan2(v.x1);
    if a > -FRAC_PI_2 {
        a
    } else {
        a + TAU
    }
}

fn vartheta_side(v: Point2, side: Option<Side>) -> f64 {
    match side {
        Some(s) if v.x1 == 0.0 && v.x2 < 0.0 => match s {
            Side::Minus => 1.5 * PI,
            Side::Plus => -FRAC_PI_2,
        },
        _ => vartheta(v),
    }
}

/// Cubic smoothstep clamped to `[0, 1]`.
pub fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// A `+1` core at `plus` and a `−1` core at `minus`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dipole {
    pub plus: Point2,
    pub minus: Point2,
}

struct RecoveryPlan {
    atoms: Vec<(Point2, f64)>,
    cores: Vec<(Point2, f64)>,
    eps: f64,
    r_outer: f64,
}

impl RecoveryPlan {
    fn sigma_eps(&self, rho: f64) -> f64 {
        smoothstep((rho - 0.25 * self.eps) / (0.5 * self.eps))
    }

    fn sigma_r(&self, rho: f64) -> f64 {
        smoothstep((rho - 1.25 * self.r_outer) / (0.5 * self.r_outer))
    }

    fn angle(&self, p: Point2, side: Option<Side>) -> f64 {
        let two_r = 2.0 * self.r_outer;
        let home = self
            .atoms
            .iter()
            .position(|(c, _)| p.dist(*c) < two_r);
        let mut theta = match home {
            Some(i) => {
                let (c, z) = self.atoms[i];
                let rho = p.dist(c);
                let own = z * vartheta_side(p - c, side);
                // far atoms seen from `c`; the blend moves only the deviation
                // from this constant
                let base: f64 = self
                    .atoms
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i)
                    .map(|(_, (x, zk))| zk * vartheta(c - *x))
                    .sum();
                if rho < self.eps {
                    base + self.sigma_eps(rho) * own
                } else if rho < self.r_outer {
                    base + own
                } else {
                    let far: f64 = self
                        .atoms
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != i)
                        .map(|(_, (x, zk))| {
                            let reference = vartheta(c - *x);
                            zk * wrap(vartheta(p - *x) - reference)
                        })
                        .sum();
                    base + own + self.sigma_r(rho) * far
                }
            }
            None => self
                .atoms
                .iter()
                .map(|(x, z)| z * vartheta_side(p - *x, side))
                .sum(),
        };
        for (c, z) in &self.cores {
            let rho = p.dist(*c);
            let s = if rho < self.eps { self.sigma_eps(rho) } else { 1.0 };
            theta += s * z * vartheta_side(p - *c, side);
        }
        theta
    }

    /// All core centres whose cut segments are jump edges.
    fn centres(&self) -> impl Iterator<Item = Point2> + '_ {
        self.atoms.iter().chain(self.cores.iter()).map(|(c, _)| *c)
    }

    fn jump_edges(&self, grid: &Grid) -> Vec<JumpEdge> {
        let m = (0.25 * self.eps / grid.h).round() as i64;
        let mut edges = Vec::new();
        for c in self.centres() {
            let ic = ((c.x1 - grid.origin.x1) / grid.h - 0.5).round() as i64;
            let jc = ((c.x2 - grid.origin.x2) / grid.h - 0.5).round() as i64;
            for j in (jc - 3 * m + 1)..=(jc - m) {
                if j < 0 || ic < 0 || j as usize >= grid.ny || ic as usize + 1 >= grid.nx {
                    continue;
                }
                let p = Point2::new(c.x1, grid.node(0, j as usize).x2);
                edges.push(JumpEdge {
                    axis: EdgeAxis::X,
                    i: ic as usize,
                    j: j as usize,
                    theta_minus: self.angle(p, Some(Side::Minus)),
                    theta_plus: self.angle(p, Some(Side::Plus)),
                });
            }
        }
        edges
    }

    fn node_angles(&self, grid: &Grid) -> Vec<f64> {
        let mut theta = Vec::with_capacity(grid.n_nodes());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                theta.push(self.angle(grid.node(i, j), None));
            }
        }
        theta
    }
}

fn unit_weights(mu: &AtomicMeasure) -> Result<Vec<(Point2, f64)>> {
    mu.atoms
        .iter()
        .map(|a| {
            if a.weight == 1.0 || a.weight == -1.0 {
                Ok((a.point, a.weight))
            } else {
                Err(Error::InvalidInput(format!(
                    "recovery fields need unit weights, got {} at ({}, {})",
                    a.weight, a.point.x1, a.point.x2
                )))
            }
        })
        .collect()
}

fn check_resolution(eps: f64, r_outer: f64, grid: &Grid) -> Result<()> {
    if !(eps > 0.0 && eps < r_outer) {
        return Err(Error::InvalidInput(format!(
            "need 0 < eps < R, got eps = {eps}, R = {r_outer}"
        )));
    }
    if eps < 8.0 * grid.h * (1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!(
            "resolution rule eps >= 8h violated: eps = {eps}, h = {}",
            grid.h
        )));
    }
    let m = 0.25 * eps / grid.h;
    if (m - m.round()).abs() > 1e-9 {
        return Err(Error::InvalidInput(
            "eps/4 must be a multiple of the grid spacing".into(),
        ));
    }
    Ok(())
}

fn check_centres(points: &[Point2], grid: &Grid) -> Result<()> {
    for p in points {
        if !grid.is_cell_center(*p) {
            return Err(Error::InvalidInput(format!(
                "core centre ({}, {}) is not a cell centre of the grid",
                p.x1, p.x2
            )));
        }
    }
    Ok(())
}

fn check_atom_layout(atoms: &[(Point2, f64)], r_outer: f64, container: &crate::geometry::Rect) -> Result<()> {
    for (k, (x, _)) in atoms.iter().enumerate() {
        if container.dist_to_boundary(*x) < 2.0 * r_outer || !container.contains(*x) {
            return Err(Error::InvalidInput(format!(
                "atom ({}, {}) too close to the boundary for R = {r_outer}",
                x.x1, x.x2
            )));
        }
        for (y, _) in &atoms[k + 1..] {
            if x.dist(*y) < 4.0 * r_outer {
                return Err(Error::InvalidInput(format!(
                    "atoms ({}, {}) and ({}, {}) closer than 4R",
                    x.x1, x.x2, y.x1, y.x2
                )));
            }
        }
    }
    Ok(())
}

/// `u = e^{izϑ(· − center)}`; continuous off the centre, so no jump edges.
pub fn make_winding_field(center: Point2, z: i32, grid: Grid, domain: Domain) -> Result<S1Field> {
    if !domain.outer.contains_strictly(center) {
        return Err(Error::InvalidInput("winding centre outside the domain".into()));
    }
    if grid.dist_to_node(center) < 1e-9 * grid.h {
        return Err(Error::InvalidInput("winding centre sits on a grid node".into()));
    }
    let zf = f64::from(z);
    let mut theta = Vec::with_capacity(grid.n_nodes());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            theta.push(if z == 0 { 0.0 } else { zf * vartheta(grid.node(i, j) - center) });
        }
    }
    S1Field::new(grid, domain, theta, Vec::new())
}

/// Field `e^{iθ}` for a smooth lifted angle, with no jumps.
pub fn make_smooth_field(grid: Grid, domain: Domain, angle: impl Fn(Point2) -> f64) -> Result<S1Field> {
    let mut theta = Vec::with_capacity(grid.n_nodes());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            theta.push(angle(grid.node(i, j)));
        }
    }
    S1Field::new(grid, domain, theta, Vec::new())
}

/// Recovery field `e^{iϑ_ε}` for unit-weight atoms.
pub fn make_recovery_field(
    mu: &AtomicMeasure,
    eps: f64,
    r_outer: f64,
    grid: Grid,
    domain: Domain,
) -> Result<S1Field> {
    make_noisy_recovery_field(mu, &[], eps, r_outer, grid, domain)
}

/// Recovery field plus zero-degree dipoles, each core regularised by the same
/// `σ_ε` cutoff and carrying its own jump segment.
pub fn make_noisy_recovery_field(
    mu: &AtomicMeasure,
    dipoles: &[Dipole],
    eps: f64,
    r_outer: f64,
    grid: Grid,
    domain: Domain,
) -> Result<S1Field> {
    let atoms = unit_weights(mu)?;
    check_resolution(eps, r_outer, &grid)?;
    check_atom_layout(&atoms, r_outer, &domain.outer)?;
    let plan = build_plan(atoms, dipoles, eps, r_outer, &grid)?;
    let theta = plan.node_angles(&grid);
    let jumps = plan.jump_edges(&grid);
    S1Field::new(grid, domain, theta, jumps)
}

fn build_plan(
    atoms: Vec<(Point2, f64)>,
    dipoles: &[Dipole],
    eps: f64,
    r_outer: f64,
    grid: &Grid,
) -> Result<RecoveryPlan> {
    let mut cores = Vec::with_capacity(2 * dipoles.len());
    for d in dipoles {
        if d.plus.x1 == d.minus.x1 {
            return Err(Error::InvalidInput(
                "dipole cores must sit in different columns".into(),
            ));
        }
        cores.push((d.plus, 1.0));
        cores.push((d.minus, -1.0));
    }
    for (c, _) in &cores {
        for (x, _) in &atoms {
            if c.dist(*x) < 2.0 * eps {
                return Err(Error::InvalidInput(format!(
                    "dipole core ({}, {}) overlaps an atom core",
                    c.x1, c.x2
                )));
            }
        }
    }
    let all: Vec<Point2> = atoms.iter().chain(cores.iter()).map(|(c, _)| *c).collect();
    check_centres(&all, grid)?;
    Ok(RecoveryPlan {
        atoms,
        cores,
        eps,
        r_outer,
    })
}

/// Boundary datum `w` on `Ω̂ ∖ Ω̃`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundaryField {
    Constant { phase: f64 },
    Winding { center: Point2, degree: i32, phase: f64 },
}

impl BoundaryField {
    pub fn angle(&self, p: Point2) -> f64 {
        match *self {
            BoundaryField::Constant { phase } => phase,
            BoundaryField::Winding {
                center,
                degree,
                phase,
            } => phase + f64::from(degree) * vartheta(p - center),
        }
    }

    /// `deg(w, ∂Ω)`.
    pub fn degree(&self) -> i32 {
        match *self {
            BoundaryField::Constant { .. } => 0,
            BoundaryField::Winding { degree, .. } => degree,
        }
    }
}

/// Recovery field inside `Ω′` glued to `w` outside `Ω` through the cutoff
/// `η`: `θ = θ̃ + η ψ` where `ψ` is the continuous lift of `w · e^{−iθ̃}` on
/// `Ω̂ ∖ Ω′`.
pub fn make_dirichlet_field(
    mu: &AtomicMeasure,
    eps: f64,
    r_outer: f64,
    boundary: &BoundaryField,
    dd: &DirichletDomain,
    h: f64,
) -> Result<S1Field> {
    let total: f64 = mu.atoms.iter().map(|a| a.weight).sum();
    if total != f64::from(boundary.degree()) {
        return Err(Error::InvalidInput(format!(
            "total weight {total} differs from the boundary degree {}",
            boundary.degree()
        )));
    }
    if let BoundaryField::Winding { center, .. } = boundary {
        if !dd.core.contains_strictly(*center) {
            return Err(Error::InvalidInput(
                "boundary datum must be regular outside the core rectangle".into(),
            ));
        }
    }
    let grid = Grid::covering(&dd.hull, h)?;
    let atoms = unit_weights(mu)?;
    check_resolution(eps, r_outer, &grid)?;
    check_atom_layout(&atoms, r_outer, &dd.inner)?;
    let plan = build_plan(atoms, &[], eps, r_outer, &grid)?;
    let mut theta = plan.node_angles(&grid);

    let outside = |p: Point2| !dd.inner.contains_strictly(p);
    let mismatch = |k: usize, p: Point2| boundary.angle(p) - theta[k];
    let raw: Vec<f64> = (0..grid.n_nodes())
        .map(|k| {
            let p = grid.node(k % grid.nx, k / grid.nx);
            if outside(p) {
                mismatch(k, p)
            } else {
                0.0
            }
        })
        .collect();
    let mut lift = vec![f64::NAN; grid.n_nodes()];
    let mut queue = VecDeque::new();
    for start in 0..grid.n_nodes() {
        let p = grid.node(start % grid.nx, start / grid.nx);
        if !outside(p) || !lift[start].is_nan() {
            continue;
        }
        lift[start] = wrap(raw[start]);
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k % grid.nx, k / grid.nx);
            let mut nbrs = [None; 4];
            if i > 0 {
                nbrs[0] = Some(k - 1);
            }
            if i + 1 < grid.nx {
                nbrs[1] = Some(k + 1);
            }
            if j > 0 {
                nbrs[2] = Some(k - grid.nx);
            }
            if j + 1 < grid.ny {
                nbrs[3] = Some(k + grid.nx);
            }
            for n in nbrs.into_iter().flatten() {
                let q = grid.node(n % grid.nx, n / grid.nx);
                if outside(q) && lift[n].is_nan() {
                    lift[n] = lift[k] + wrap(raw[n] - raw[k]);
                    queue.push_back(n);
                }
            }
        }
    }
    let gap = dd.omega.margin_to(&dd.inner);
    for (k, t) in theta.iter_mut().enumerate() {
        let p = grid.node(k % grid.nx, k / grid.nx);
        if outside(p) {
            let eta = smoothstep((dd.inner.dist_outside(p) - 0.25 * gap) / (0.5 * gap));
            *t += eta * lift[k];
        }
    }
    let jumps = plan.jump_edges(&grid);
    S1Field::new(grid, dd.detection_domain(), theta, jumps)
}

/// Angle of the recovery construction at `p` (with one-sided limits on cuts).
pub fn recovery_angle(mu: &AtomicMeasure, eps: f64, r_outer: f64, p: Point2, side: Option<Side>) -> Result<f64> {
    let plan = RecoveryPlan {
        atoms: unit_weights(mu)?,
        cores: Vec::new(),
        eps,
        r_outer,
    };
    Ok(plan.angle(p, side))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::measures::Atom;

    #[test]
    fn vartheta_branch_values() {
        assert!((vartheta(Point2::new(1.0, 1.0)) - PI / 4.0).abs() < 1e-15);
        assert!((vartheta(Point2::new(0.0, 1.0)) - PI / 2.0).abs() < 1e-15);
        assert!((vartheta(Point2::new(-1.0, 0.0)) - PI).abs() < 1e-15);
        assert!((vartheta(Point2::new(0.0, -1.0)) - 1.5 * PI).abs() < 1e-15);
        assert!((vartheta(Point2::new(1e-12, -1.0)) + PI / 2.0).abs() < 1e-9);
        assert_eq!(vartheta_side(Point2::new(0.0, -1.0), Some(Side::Plus)), -FRAC_PI_2);
    }

    #[test]
    fn recovery_jump_count_matches_segment_length() {
        let outer = Rect::unit_square();
        let domain = Domain::with_margin(outer, 0.125).unwrap();
        let eps = 1.0 / 32.0;
        let grid = Grid::covering(&outer, eps / 8.0).unwrap();
        let mu = AtomicMeasure::new(vec![Atom::new(Point2::new(0.5, 0.5), 1.0)]);
        let u = make_recovery_field(&mu, eps, 0.2, grid, domain).unwrap();
        assert_eq!(u.jumps().len(), 4);
        assert_eq!(u.jump_length(), 1.0 / 64.0);
    }

    #[test]
    fn recovery_rejects_crowded_atoms() {
        let outer = Rect::unit_square();
        let domain = Domain::with_margin(outer, 0.125).unwrap();
        let grid = Grid::covering(&outer, 1.0 / 256.0).unwrap();
        let mu = AtomicMeasure::new(vec![
            Atom::new(Point2::new(0.375, 0.5), 1.0),
            Atom::new(Point2::new(0.625, 0.5), 1.0),
        ]);
        let err = make_recovery_field(&mu, 1.0 / 32.0, 0.1, grid, domain).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }
}
