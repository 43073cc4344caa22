//! Atomic measures and flat-norm distances by linear programming.

use std::f64::consts::SQRT_2;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Rect};
use crate::grid_field::{Grid, S1Field};
use crate::jacobian::{ju_hat_loads, CurrentJ};
use crate::lp::dense::{DenseLp, Sense};
use crate::lp::network::NetworkSimplex;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Point2,
    pub weight: f64,
}

impl Atom {
    pub fn new(point: Point2, weight: f64) -> Self {
        Self { point, weight }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn dirac(p: Point2) -> Self {
        Self::new(vec![Atom::new(p, 1.0)])
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight.abs()).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.atoms
                .iter()
                .map(|a| Atom::new(a.point, a.weight * factor))
                .collect(),
        )
    }

    /// `self − other`, with coincident points combined and zero atoms dropped.
    pub fn minus(&self, other: &AtomicMeasure) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().map(|a| Atom::new(a.point, -a.weight)));
        Self::new(atoms).combined()
    }

    /// Merges atoms at identical points and drops zero weights.
    pub fn combined(&self) -> Self {
        let mut out: Vec<Atom> = Vec::new();
        for a in &self.atoms {
            match out.iter_mut().find(|b| b.point == a.point) {
                Some(b) => b.weight += a.weight,
                None => out.push(*a),
            }
        }
        out.retain(|a| a.weight != 0.0);
        Self::new(out)
    }

    /// Membership in X(Ω): nonzero integer weights at points inside `omega`.
    pub fn check_in_x(&self, omega: &Rect) -> Result<()> {
        for a in &self.atoms {
            if a.weight == 0.0 || a.weight.fract() != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "atom weight {} is not a nonzero integer",
                    a.weight
                )));
            }
            if !omega.contains_strictly(a.point) {
                return Err(Error::Admissibility(format!(
                    "atom ({}, {}) outside the domain",
                    a.point.x1, a.point.x2
                )));
            }
        }
        Ok(())
    }

    /// `w@x:y` entries joined by `;`.
    pub fn encode(&self) -> String {
        self.atoms
            .iter()
            .map(|a| format!("{}@{}:{}", a.weight, a.point.x1, a.point.x2))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Pairing `Σ wᵢ φ(xᵢ)`.
    pub fn pair(&self, phi: impl Fn(Point2) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * phi(a.point)).sum()
    }
}

/// Writes `x,y,weight` rows after a header line.
pub fn write_atoms_csv<W: Write>(mu: &AtomicMeasure, mut w: W) -> Result<()> {
    writeln!(w, "x,y,weight")?;
    for a in &mu.atoms {
        writeln!(w, "{},{},{}", a.point.x1, a.point.x2, a.weight)?;
    }
    Ok(())
}

pub fn read_atoms_csv<R: BufRead>(r: R) -> Result<AtomicMeasure> {
    let mut atoms = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || (k == 0 && t == "x,y,weight") {
            continue;
        }
        let f: Vec<&str> = t.split(',').map(str::trim).collect();
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                line: k + 1,
                msg: format!("cannot parse `{s}`"),
            })
        };
        if f.len() != 3 {
            return Err(Error::Parse {
                line: k + 1,
                msg: "expected x,y,weight".into(),
            });
        }
        atoms.push(Atom::new(Point2::new(parse(f[0])?, parse(f[1])?), parse(f[2])?));
    }
    Ok(AtomicMeasure::new(atoms))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlatStatus {
    Exact,
    GridApprox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatNormResult {
    pub value: f64,
    /// Points carrying the optimal test-function values.
    pub witness_points: Vec<Point2>,
    pub witness: Vec<f64>,
    pub status: FlatStatus,
    /// Sup bound of the optimal split.
    pub alpha: f64,
    /// Lipschitz bound of the optimal split.
    pub beta: f64,
}

impl FlatNormResult {
    pub fn write_witness_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,phi")?;
        for (p, v) in self.witness_points.iter().zip(&self.witness) {
            writeln!(w, "{},{},{}", p.x1, p.x2, v)?;
        }
        Ok(())
    }

    fn zero(status: FlatStatus) -> Self {
        Self {
            value: 0.0,
            witness_points: Vec::new(),
            witness: Vec::new(),
            status,
            alpha: 0.5,
            beta: 0.5,
        }
    }
}

fn check_inside(mu: &AtomicMeasure, omega: &Rect) -> Result<()> {
    for a in &mu.atoms {
        if !omega.contains_strictly(a.point) || !a.weight.is_finite() {
            return Err(Error::Admissibility(format!(
                "atom ({}, {}) not inside the domain",
                a.point.x1, a.point.x2
            )));
        }
    }
    Ok(())
}

/// Exact flat distance `‖μ − ν‖` between atomic measures on a rectangle.
pub fn flat_distance_atomic(mu: &AtomicMeasure, nu: &AtomicMeasure, omega: &Rect) -> Result<FlatNormResult> {
    check_inside(mu, omega)?;
    check_inside(nu, omega)?;
    let diff = mu.minus(nu);
    let k = diff.len();
    if k == 0 {
        return Ok(FlatNormResult::zero(FlatStatus::Exact));
    }
    // variables: φ⁺ᵢ (0..k), φ⁻ᵢ (k..2k), α (2k), β (2k+1)
    let (ia, ib) = (2 * k, 2 * k + 1);
    let mut lp = DenseLp::new(2 * k + 2);
    let mut c = vec![0.0; 2 * k + 2];
    for (i, a) in diff.atoms.iter().enumerate() {
        c[i] = a.weight;
        c[k + i] = -a.weight;
    }
    lp.set_objective(c);
    for (i, a) in diff.atoms.iter().enumerate() {
        let d_bdry = omega.dist_to_boundary(a.point);
        for sign in [1.0, -1.0] {
            lp.add_row(&[(i, sign), (k + i, -sign), (ia, -1.0)], Sense::Le, 0.0);
            lp.add_row(&[(i, sign), (k + i, -sign), (ib, -d_bdry)], Sense::Le, 0.0);
        }
        for (j, b) in diff.atoms.iter().enumerate().skip(i + 1) {
            let d = a.point.dist(b.point);
            for sign in [1.0, -1.0] {
                lp.add_row(
                    &[(i, sign), (k + i, -sign), (j, -sign), (k + j, sign), (ib, -d)],
                    Sense::Le,
                    0.0,
                );
            }
        }
    }
    lp.add_row(&[(ia, 1.0), (ib, 1.0)], Sense::Le, 1.0);
    let sol = lp.solve()?;
    let witness: Vec<f64> = (0..k).map(|i| sol.x[i] - sol.x[k + i]).collect();
    Ok(FlatNormResult {
        value: sol.value.max(0.0),
        witness_points: diff.atoms.iter().map(|a| a.point).collect(),
        witness,
        status: FlatStatus::Exact,
        alpha: sol.x[ia],
        beta: sol.x[ib],
    })
}

/// Hat-function loads `⟨μ, ψ_n⟩` of an atomic measure on a lattice.
pub fn atomic_hat_loads(mu: &AtomicMeasure, lattice: &Grid) -> Result<Vec<f64>> {
    let mut loads = vec![0.0; lattice.n_nodes()];
    for a in &mu.atoms {
        let (i, j, s, t) = lattice.locate(a.point).ok_or_else(|| {
            Error::Admissibility(format!("atom ({}, {}) outside the lattice", a.point.x1, a.point.x2))
        })?;
        let w = a.weight;
        loads[lattice.idx(i, j)] += w * (1.0 - s) * (1.0 - t);
        loads[lattice.idx(i + 1, j)] += w * s * (1.0 - t);
        loads[lattice.idx(i, j + 1)] += w * (1.0 - s) * t;
        loads[lattice.idx(i + 1, j + 1)] += w * s * t;
    }
    Ok(loads)
}

/// Flat distance `‖J − target‖` with `J` given by its current.
pub fn flat_distance_current(
    j: &CurrentJ,
    target: &AtomicMeasure,
    omega: &Rect,
    lattice: &Grid,
) -> Result<FlatNormResult> {
    check_lattice(omega, lattice)?;
    let mut loads = j.hat_loads(lattice);
    subtract_target(&mut loads, target, omega, lattice)?;
    flat_distance_loads(&loads, lattice)
}

/// As [`flat_distance_current`], streaming the current of `u` directly.
pub fn flat_distance_field(u: &S1Field, target: &AtomicMeasure, omega: &Rect, lattice: &Grid) -> Result<FlatNormResult> {
    check_lattice(omega, lattice)?;
    let mut loads = ju_hat_loads(u, lattice);
    subtract_target(&mut loads, target, omega, lattice)?;
    flat_distance_loads(&loads, lattice)
}

/// Grid-LP flat distance between two atomic measures (used to cross-check the exact LP).
pub fn flat_distance_atomic_grid(mu: &AtomicMeasure, nu: &AtomicMeasure, omega: &Rect, lattice: &Grid) -> Result<FlatNormResult> {
    check_lattice(omega, lattice)?;
    check_inside(mu, omega)?;
    let mut loads = atomic_hat_loads(mu, lattice)?;
    subtract_target(&mut loads, nu, omega, lattice)?;
    flat_distance_loads(&loads, lattice)
}

fn check_lattice(omega: &Rect, lattice: &Grid) -> Result<()> {
    let e = lattice.extent();
    let tol = 1e-9 * lattice.h;
    if (e.min.x1 - omega.min.x1).abs() > tol
        || (e.min.x2 - omega.min.x2).abs() > tol
        || (e.max.x1 - omega.max.x1).abs() > tol
        || (e.max.x2 - omega.max.x2).abs() > tol
    {
        return Err(Error::InvalidInput("lattice must span the domain exactly".into()));
    }
    Ok(())
}

fn subtract_target(loads: &mut [f64], target: &AtomicMeasure, omega: &Rect, lattice: &Grid) -> Result<()> {
    check_inside(target, omega)?;
    for (l, t) in loads.iter_mut().zip(atomic_hat_loads(target, lattice)?) {
        *l -= t;
    }
    Ok(())
}

/// Maximises `Σ loads·φ` over nodal `φ` vanishing on the boundary ring with
/// `|φ| ≤ α`, `|φ_a − φ_b| ≤ β·|a − b|` on axis and diagonal lattice edges,
/// `α + β ≤ 1`.
///
/// For fixed `α` the dual is an uncapacitated transport problem: lattice arcs
/// cost `β·length`, arcs to a ground node (the boundary ring) cost `α`. The
/// value is concave piecewise linear in `α`; cutting-plane search over `α`
/// reuses the flow basis between solves.
pub fn flat_distance_loads(loads: &[f64], lattice: &Grid) -> Result<FlatNormResult> {
    let g = lattice;
    if loads.len() != g.n_nodes() {
        return Err(Error::InvalidInput("load vector size mismatch".into()));
    }
    if g.nx < 3 || g.ny < 3 {
        return Err(Error::InvalidInput("lattice has no interior nodes".into()));
    }
    let (ix, iy) = (g.nx - 2, g.ny - 2);
    let n_int = ix * iy;
    let ground = n_int;
    let node_of = |i: usize, j: usize| -> usize {
        if i == 0 || j == 0 || i == g.nx - 1 || j == g.ny - 1 {
            ground
        } else {
            (j - 1) * ix + (i - 1)
        }
    };
    let mut arcs: Vec<(usize, usize)> = Vec::new();
    let mut lengths: Vec<f64> = Vec::new();
    let mut add_pair = |a: usize, b: usize, len: f64, arcs: &mut Vec<(usize, usize)>| {
        if a == b {
            return;
        }
        arcs.push((a, b));
        lengths.push(len);
        arcs.push((b, a));
        lengths.push(len);
    };
    for j in 0..g.ny {
        for i in 0..g.nx {
            let a = node_of(i, j);
            if i + 1 < g.nx {
                add_pair(a, node_of(i + 1, j), g.h, &mut arcs);
            }
            if j + 1 < g.ny {
                add_pair(a, node_of(i, j + 1), g.h, &mut arcs);
            }
            if i + 1 < g.nx && j + 1 < g.ny {
                add_pair(a, node_of(i + 1, j + 1), SQRT_2 * g.h, &mut arcs);
                add_pair(node_of(i + 1, j), node_of(i, j + 1), SQRT_2 * g.h, &mut arcs);
            }
        }
    }
    let n_lattice_arcs = arcs.len();
    for v in 0..n_int {
        arcs.push((v, ground));
        arcs.push((ground, v));
    }
    let mut supply = vec![0.0; n_int + 1];
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            supply[node_of(i, j)] = -loads[g.idx(i, j)];
        }
    }
    supply[ground] = -supply[..n_int].iter().sum::<f64>();
    let load_scale: f64 = supply.iter().map(|s| s.abs()).sum();
    if load_scale == 0.0 {
        return Ok(FlatNormResult::zero(FlatStatus::GridApprox));
    }
    let mut ns = NetworkSimplex::new(n_int + 1, &arcs, supply)?;
    let mut costs = vec![0.0; arcs.len()];

    struct Probe {
        alpha: f64,
        value: f64,
        transport: f64,
        mass: f64,
    }
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    let mut solve_at = |alpha: f64, ns: &mut NetworkSimplex| -> Result<Probe> {
        let beta = 1.0 - alpha;
        for (k, c) in costs.iter_mut().enumerate() {
            *c = if k < n_lattice_arcs { beta * lengths[k] } else { alpha };
        }
        let value = ns.solve(&costs)?;
        let flows = ns.flows();
        let transport: f64 = (0..n_lattice_arcs).map(|k| lengths[k] * flows[k]).sum();
        let mass: f64 = flows[n_lattice_arcs..].iter().sum();
        if best.as_ref().is_none_or(|b| value > b.0) {
            let pi = ns.potentials();
            let phi: Vec<f64> = pi[..n_int].iter().map(|p| p - pi[ground]).collect();
            best = Some((value, alpha, phi));
        }
        Ok(Probe {
            alpha,
            value,
            transport,
            mass,
        })
    };
    // the supporting line of the value at a probe is L(s) = (1 − s)·T + s·M
    let line = |p: &Probe, s: f64| (1.0 - s) * p.transport + s * p.mass;
    let mut left = solve_at(0.0, &mut ns)?;
    let mut right = solve_at(1.0, &mut ns)?;
    for _ in 0..200 {
        let slope_l = left.mass - left.transport;
        let slope_r = right.mass - right.transport;
        if slope_l <= slope_r {
            break;
        }
        let s = ((right.transport - left.transport) / (slope_l - slope_r)).clamp(left.alpha, right.alpha);
        let upper = line(&left, s);
        let probe = solve_at(s, &mut ns)?;
        if upper - probe.value <= 1e-12 * upper.abs().max(load_scale * g.h) {
            break;
        }
        let slope = probe.mass - probe.transport;
        if slope > 0.0 {
            left = probe;
        } else if slope < 0.0 {
            right = probe;
        } else {
            break;
        }
    }
    let (value, alpha, phi) = best.expect("at least one probe");
    let mut witness = vec![0.0; g.n_nodes()];
    let mut points = Vec::with_capacity(g.n_nodes());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let v = node_of(i, j);
            if v != ground {
                witness[g.idx(i, j)] = phi[v];
            }
            points.push(g.node(i, j));
        }
    }
    Ok(FlatNormResult {
        value: value.max(0.0),
        witness_points: points,
        witness,
        status: FlatStatus::GridApprox,
        alpha,
        beta: 1.0 - alpha,
    })
}
