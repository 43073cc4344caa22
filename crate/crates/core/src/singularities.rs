//! Singularity detection: jump covering, ball growth, fattening, dipole
//! elimination, cluster covering and the extracted atomic measures.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::energy::{self, annulus_min_energy, Region};
use crate::error::{Error, Result};
use crate::geometry::{enclosing_ball, merge_family, Ball, BallFamily, Domain, Point2};
use crate::grid_field::{EdgeAxis, S1Field};
use crate::jacobian::{circle_gradient_integral, circle_hits_jump, circle_samples, degree_on_circle, degree_on_union_boundary};
use crate::measures::{Atom, AtomicMeasure};

/// Radius nudge attempts when a boundary circle meets a jump edge.
pub const NUDGE_ATTEMPTS: usize = 16;
/// Sampled radii in Case 1a and sampled levels in the cluster covering.
pub const SAMPLED_LEVELS: usize = 33;
/// Iteration cap of the elimination loop, per input ball.
pub const WATCHDOG_FACTOR: usize = 4;

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("eps must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

fn eps_log(eps: f64) -> f64 {
    eps * eps.ln().abs()
}

fn cell_vorticity(u: &S1Field, i: usize, j: usize) -> i32 {
    let s = u.edge_increment(EdgeAxis::X, i, j) + u.edge_increment(EdgeAxis::Y, i + 1, j)
        - u.edge_increment(EdgeAxis::X, i, j + 1)
        - u.edge_increment(EdgeAxis::Y, i, j);
    (s / TAU).round() as i32
}

/// Sum of plaquette vorticities over the cells centred in the closed ball.
fn plaquette_degree(u: &S1Field, b: &Ball) -> i32 {
    let g = u.grid();
    let span = |c: f64, o: f64, n: usize| {
        let lo = ((c - b.radius - o) / g.h - 0.5).floor().max(0.0) as usize;
        let hi = (((c + b.radius - o) / g.h - 0.5).ceil().max(0.0) as usize).min(n - 2);
        (lo, hi)
    };
    let (i0, i1) = span(b.center.x1, g.origin.x1, g.nx);
    let (j0, j1) = span(b.center.x2, g.origin.x2, g.ny);
    let reach = b.radius + 1e-9 * g.h;
    let mut total = 0;
    for j in j0..=j1 {
        for i in i0..=i1 {
            if g.cell_center(i, j).dist(b.center) <= reach {
                total += cell_vorticity(u, i, j);
            }
        }
    }
    total
}

/// Degree of `u` on `∂B`. Radii below `4h` fall back to the plaquette count;
/// otherwise the circle is nudged by `±h/3` steps until it misses the jumps.
pub fn ball_degree(u: &S1Field, b: &Ball) -> Result<i32> {
    let h = u.grid().h;
    if b.radius < 4.0 * h {
        return Ok(plaquette_degree(u, b));
    }
    let mut last = None;
    for k in 0..NUDGE_ATTEMPTS {
        let step = k.div_ceil(2) as f64 * if k % 2 == 1 { 1.0 } else { -1.0 };
        let r = b.radius + step * h / 3.0;
        if r < 4.0 * h * (1.0 - 1e-12) || circle_hits_jump(u, b.center, r) {
            continue;
        }
        match degree_on_circle(u, b.center, r) {
            Ok(d) => return Ok(d),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| {
        Error::Numerical(format!(
            "no circle near radius {} around ({}, {}) avoids the jump set after {NUDGE_ATTEMPTS} attempts",
            b.radius, b.center.x1, b.center.x2
        ))
    }))
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, a: usize) -> usize {
        let mut r = a;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut a = a;
        while self.0[a] != r {
            let next = self.0[a];
            self.0[a] = r;
            a = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }

    fn groups(&mut self) -> Vec<Vec<usize>> {
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); self.0.len()];
        for k in 0..self.0.len() {
            let r = self.find(k);
            by_root[r].push(k);
        }
        by_root.into_iter().filter(|g| !g.is_empty()).collect()
    }
}

/// One ball per connected component of the jump set, before merging: centred
/// at the component's bounding box with the half-diagonal as radius.
pub fn jump_component_balls(u: &S1Field) -> BallFamily {
    let g = u.grid();
    let jumps = u.jumps();
    let key = |p: Point2| ((2.0 * p.x1 / g.h).round() as i64, (2.0 * p.x2 / g.h).round() as i64);
    let mut uf = UnionFind::new(jumps.len());
    let mut owner: HashMap<(i64, i64), usize> = HashMap::new();
    for (k, e) in jumps.iter().enumerate() {
        let (a, b) = e.segment(g);
        for p in [a, b] {
            match owner.get(&key(p)) {
                Some(&o) => uf.union(o, k),
                None => {
                    owner.insert(key(p), k);
                }
            }
        }
    }
    let balls = uf
        .groups()
        .into_iter()
        .map(|members| {
            let (mut lo, mut hi) = (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
            for &k in &members {
                let (a, b) = jumps[k].segment(g);
                for p in [a, b] {
                    lo = Point2::new(lo.x1.min(p.x1), lo.x2.min(p.x2));
                    hi = Point2::new(hi.x1.max(p.x1), hi.x2.max(p.x2));
                }
            }
            Ball::new((lo + hi) * 0.5, 0.5 * lo.dist(hi))
        })
        .collect();
    BallFamily::new(balls)
}

/// Merged family of balls covering the jump set.
pub fn cover_jump_set(u: &S1Field, eps: f64) -> Result<BallFamily> {
    check_eps(eps)?;
    Ok(merge_family(&jump_component_balls(u)))
}

/// Contact between balls during growth.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MergeEvent {
    pub time: f64,
    /// Balls at `time` that took part in the merge.
    pub absorbed: Vec<Ball>,
    /// Balls produced by the merge.
    pub product: Vec<Ball>,
}

/// Family right after the merges at `time`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub time: f64,
    pub family: BallFamily,
}

/// `𝓑(t)` for `t ∈ [0, t_end]`, stored as post-merge snapshots; between two
/// snapshots every radius grows by the common factor `(1+t)/(1+s)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrownFamily {
    pub initial: BallFamily,
    pub t_end: f64,
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<MergeEvent>,
}

/// Outcome of the exact checks of the growth log.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GrowthReport {
    pub starts_at_input: bool,
    pub nested: bool,
    pub disjoint: bool,
    pub radius_bound: bool,
}

impl GrowthReport {
    pub fn all(&self) -> bool {
        self.starts_at_input && self.nested && self.disjoint && self.radius_bound
    }
}

impl GrownFamily {
    pub fn family_at(&self, t: f64) -> BallFamily {
        let s = self
            .snapshots
            .iter()
            .rev()
            .find(|s| s.time <= t)
            .unwrap_or(&self.snapshots[0]);
        s.family.dilate((1.0 + t) / (1.0 + s.time))
    }

    pub fn final_family(&self) -> BallFamily {
        self.family_at(self.t_end)
    }

    /// Snapshot times followed by `t_end`.
    pub fn logged_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.snapshots.iter().map(|s| s.time).collect();
        if t.last().is_none_or(|&l| l < self.t_end) {
            t.push(self.t_end);
        }
        t
    }

    /// Properties (1), (2), (3) and (5) on every logged time.
    pub fn check(&self) -> GrowthReport {
        let rad0 = self.initial.rad();
        let times = self.logged_times();
        let fams: Vec<BallFamily> = times.iter().map(|&t| self.family_at(t)).collect();
        GrowthReport {
            starts_at_input: self.snapshots[0].time == 0.0 && self.snapshots[0].family == self.initial,
            nested: fams.windows(2).all(|w| w[1].covers(&w[0])),
            disjoint: fams.iter().all(BallFamily::is_pairwise_disjoint),
            radius_bound: times.iter().zip(&fams).all(|(&t, f)| f.rad() <= (1.0 + t) * rad0 + 1e-12),
        }
    }
}

/// Grows a pairwise disjoint family up to `t_end`, merging on contact.
pub fn ball_grow(f: &BallFamily, t_end: f64) -> Result<GrownFamily> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("t_end must be finite and nonnegative, got {t_end}")));
    }
    if f.balls.iter().any(|b| !(b.radius > 0.0 && b.center.is_finite())) {
        return Err(Error::InvalidInput("balls need positive radii and finite centres".into()));
    }
    if !f.is_pairwise_disjoint() {
        return Err(Error::InvalidInput("initial balls must have disjoint closures".into()));
    }
    let mut time = 0.0;
    let mut balls = f.balls.clone();
    let mut snapshots = vec![Snapshot { time, family: f.clone() }];
    let mut events = Vec::new();
    loop {
        let mut next: Option<(f64, usize, usize)> = None;
        for i in 0..balls.len() {
            for j in i + 1..balls.len() {
                let base = (balls[i].radius + balls[j].radius) / (1.0 + time);
                let t = (balls[i].center.dist(balls[j].center) / base - 1.0).max(time);
                if next.is_none_or(|(tn, _, _)| t < tn) {
                    next = Some((t, i, j));
                }
            }
        }
        let Some((t, i, j)) = next.filter(|&(t, _, _)| t <= t_end) else {
            break;
        };
        let factor = (1.0 + t) / (1.0 + time);
        let before: Vec<Ball> = balls.iter().map(|b| b.dilate(factor)).collect();
        time = t;
        let mut merged = merge_family(&BallFamily::new(before.clone()));
        if merged.len() == before.len() {
            // rounding left the touching pair a hair apart
            let mut forced = before.clone();
            forced[i] = enclosing_ball(before[i], before[j]);
            forced.remove(j);
            merged = merge_family(&BallFamily::new(forced));
        }
        events.push(MergeEvent {
            time,
            absorbed: before.iter().filter(|b| !merged.balls.contains(b)).copied().collect(),
            product: merged.balls.iter().filter(|b| !before.contains(b)).copied().collect(),
        });
        balls = merged.balls.clone();
        snapshots.push(Snapshot { time, family: merged });
    }
    Ok(GrownFamily {
        initial: f.clone(),
        t_end,
        snapshots,
        events,
    })
}

/// One annulus between consecutive logged times, compared with property (4).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerCheck {
    pub t1: f64,
    pub t2: f64,
    pub center: Point2,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub degree: i32,
    pub h: f64,
    /// `½∫|∇v|²` of the minimiser on the annulus.
    pub energy: f64,
    /// `π |μ(B)| log((1+t₂)/(1+t₁))`.
    pub bound: f64,
}

impl LayerCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.energy >= self.bound * (1.0 - slack)
    }
}

/// Largest lattice size used by [`check_layer_bounds`].
pub const LAYER_NODE_CAP: f64 = 4.0e6;

/// Minimal energies of the annuli swept between logged times, with the
/// initial balls carrying `degrees` as atoms at their centres.
pub fn check_layer_bounds(g: &GrownFamily, degrees: &[i32]) -> Result<Vec<LayerCheck>> {
    if degrees.len() != g.initial.len() {
        return Err(Error::InvalidInput("one degree per initial ball is required".into()));
    }
    let times = g.logged_times();
    let mut out = Vec::new();
    for w in times.windows(2) {
        let (t1, t2) = (w[0], w[1]);
        if t2 <= t1 {
            continue;
        }
        let inner = g.family_at(t1);
        let rho = (1.0 + t2) / (1.0 + t1);
        for b in &inner.balls {
            let atoms: Vec<Atom> = g
                .initial
                .balls
                .iter()
                .zip(degrees)
                .filter(|(a, _)| b.contains_ball(a))
                .map(|(a, &d)| Atom::new(a.center, f64::from(d)))
                .collect();
            let degree: i32 = atoms.iter().map(|a| a.weight as i32).sum();
            let outer = b.dilate(rho);
            let mut h = (b.radius / 12.0).min((outer.radius - b.radius) / 8.0);
            let side = 2.0 * outer.radius / h;
            if side * side > LAYER_NODE_CAP {
                h = 2.0 * outer.radius / LAYER_NODE_CAP.sqrt();
            }
            let energy = if degree == 0 {
                0.0
            } else {
                let fam = BallFamily::new(vec![*b]);
                annulus_min_energy(&fam, &AtomicMeasure::new(atoms), &Region::Disk(outer), h)?.half_integral()
            };
            out.push(LayerCheck {
                t1,
                t2,
                center: b.center,
                inner_radius: b.radius,
                outer_radius: outer.radius,
                degree,
                h,
                energy,
                bound: PI * f64::from(degree.abs()) * rho.ln(),
            });
        }
    }
    Ok(out)
}

/// `μ̃ = Σ deg(u, ∂B) δ_{x(B)}` over the balls of `𝓑(t_end)` inside `Ω`.
pub fn extract_mu_tilde(g: &GrownFamily, u: &S1Field, omega: &Domain) -> Result<AtomicMeasure> {
    let mut atoms = Vec::new();
    for b in &g.final_family().balls {
        if !omega.outer.contains_ball(b) {
            continue;
        }
        let d = ball_degree(u, b)?;
        if d != 0 {
            atoms.push(Atom::new(b.center, f64::from(d)));
        }
    }
    Ok(AtomicMeasure::new(atoms))
}

/// Raises the radius of every ball of nonzero degree to at least `eps`, then merges.
pub fn fatten_nonzero(f: &BallFamily, u: &S1Field, eps: f64) -> Result<BallFamily> {
    check_eps(eps)?;
    let mut balls = Vec::with_capacity(f.len());
    for b in &f.balls {
        let d = ball_degree(u, b)?;
        balls.push(if d != 0 && b.radius < eps { Ball::new(b.center, eps) } else { *b });
    }
    Ok(merge_family(&BallFamily::new(balls)))
}

/// How a ball of the eliminated family came about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BallOrigin {
    /// Large input ball never absorbed.
    Carried,
    /// Small ball regrown to a free radius below `ε/2`.
    Regrown,
    /// Small ball grown to a free radius at least `ε/2`.
    Promoted,
    /// Product of merging into blocking balls, at least `ε/2`.
    Merged,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EliminatedBall {
    pub ball: Ball,
    pub origin: BallOrigin,
    /// `∫_{∂B}|∇u|`, recorded for regrown balls.
    pub circle_integral: Option<f64>,
    pub degree: Option<i32>,
}

/// Output of the dipole elimination.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DipoleFamilies {
    pub eps: f64,
    pub input: BallFamily,
    /// Balls of radius below `ε/2`.
    pub small: Vec<EliminatedBall>,
    /// Balls of radius at least `ε/2`.
    pub large: Vec<EliminatedBall>,
    /// `4√π ‖∇u‖_{L²(Ω)}`, the bound on circle integrals of regrown balls.
    pub budget: f64,
    pub iterations: usize,
    pub watchdog: usize,
}

impl DipoleFamilies {
    pub fn family(&self) -> BallFamily {
        BallFamily::new(self.small.iter().chain(&self.large).map(|b| b.ball).collect())
    }

    pub fn radius_sum(&self) -> f64 {
        self.family().rad()
    }

    pub fn radii_within_bound(&self) -> bool {
        self.radius_sum() <= 5.0 * self.input.rad() * (1.0 + 1e-12)
    }

    pub fn covers_input(&self) -> bool {
        self.family().covers(&self.input)
    }

    /// Every ball has `r ≥ ε/2` or a circle integral within the budget.
    pub fn dichotomy_holds(&self) -> bool {
        self.small
            .iter()
            .chain(&self.large)
            .all(|b| b.ball.radius >= 0.5 * self.eps || b.circle_integral.is_some_and(|c| c <= self.budget))
    }

    /// Largest `∫_{∂B}|∇u| / |log ε|^{1/2}` over regrown balls.
    pub fn max_circle_ratio(&self) -> Option<f64> {
        let s = self.eps.ln().abs().sqrt();
        self.small
            .iter()
            .filter_map(|b| b.circle_integral)
            .map(|c| c / s)
            .reduce(f64::max)
    }
}

/// Free radii around `x`: sorted, merged open intervals of `s` for which
/// `∂B_s(x)` meets one of `others`, clipped to `s > from`.
fn blocked_intervals(x: Point2, from: f64, others: &[Ball]) -> Vec<(f64, f64)> {
    let mut iv: Vec<(f64, f64)> = others
        .iter()
        .map(|b| {
            let d = x.dist(b.center);
            ((d - b.radius).max(from), d + b.radius)
        })
        .filter(|(a, b)| b > a)
        .collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn free_measure(blocked: &[(f64, f64)], a: f64, b: f64) -> f64 {
    let covered: f64 = blocked.iter().map(|&(lo, hi)| (hi.min(b) - lo.max(a)).max(0.0)).sum();
    (b - a) - covered
}

/// `inf{t ≥ 2r : H¹(A(t)) ≥ (t − r)/2}`.
fn escape_radius(r: f64, blocked: &[(f64, f64)]) -> f64 {
    let gap = |t: f64| free_measure(blocked, r, t) - 0.5 * (t - r);
    let mut t = 2.0 * r;
    let mut g = gap(t);
    if g >= 0.0 {
        return t;
    }
    // alternate free and blocked stretches beyond 2r
    for &(lo, hi) in blocked {
        if hi <= t {
            continue;
        }
        if lo > t {
            if g + 0.5 * (lo - t) >= 0.0 {
                return t - 2.0 * g;
            }
            g += 0.5 * (lo - t);
            t = lo;
        }
        g -= 0.5 * (hi - t);
        t = hi;
    }
    t - 2.0 * g
}

/// Points of the free set `[r, t] ∖ blocked` at the given quantiles of its measure.
fn free_quantiles(r: f64, t: f64, blocked: &[(f64, f64)], n: usize) -> Vec<f64> {
    let mut pieces = Vec::new();
    let mut s = r;
    for &(lo, hi) in blocked {
        if lo >= t {
            break;
        }
        if lo > s {
            pieces.push((s, lo));
        }
        s = s.max(hi);
    }
    if t > s {
        pieces.push((s, t));
    }
    let total: f64 = pieces.iter().map(|(a, b)| b - a).sum();
    (0..n)
        .map(|k| {
            let mut q = total * (k as f64 + 0.5) / n as f64;
            for &(a, b) in &pieces {
                if q <= b - a {
                    return a + q;
                }
                q -= b - a;
            }
            t
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Input,
    Eliminated,
}

struct Pool {
    balls: Vec<(Ball, Kind, Option<EliminatedBall>)>,
}

impl Pool {
    fn balls_except(&self, skip: Option<usize>) -> Vec<Ball> {
        self.balls
            .iter()
            .enumerate()
            .filter(|(k, _)| Some(*k) != skip)
            .map(|(_, b)| b.0)
            .collect()
    }

    /// Removes every ball whose closure meets `b`, growing `b` to enclose them.
    fn absorb_into(&mut self, mut b: Ball) -> Ball {
        loop {
            let Some(k) = self.balls.iter().position(|o| o.0.closures_meet(&b)) else {
                return b;
            };
            b = enclosing_ball(b, self.balls[k].0);
            self.balls.remove(k);
        }
    }

    /// Removes the balls contained in `b`.
    fn drop_inside(&mut self, b: &Ball) {
        self.balls.retain(|o| !b.contains_ball(&o.0));
    }
}

/// Dipole elimination on a pairwise disjoint family: every ball below `ε/2`
/// is regrown, promoted or merged until only the two output classes remain.
pub fn dipole_eliminate(f: &BallFamily, u: &S1Field, eps: f64) -> Result<DipoleFamilies> {
    check_eps(eps)?;
    if !f.is_pairwise_disjoint() {
        return Err(Error::InvalidInput("input balls must have disjoint closures".into()));
    }
    let grad_l2 = (2.0 * energy::f_eps(u, eps, None)?.dirichlet).sqrt();
    let budget = 4.0 * PI.sqrt() * grad_l2;
    let half = 0.5 * eps;
    let watchdog = WATCHDOG_FACTOR * f.len();
    let mut pool = Pool {
        balls: f.balls.iter().map(|b| (*b, Kind::Input, None)).collect(),
    };
    let mut iterations = 0;
    let small_input = |pool: &Pool| pool.balls.iter().position(|b| b.1 == Kind::Input && b.0.radius < half);
    while let Some(k) = small_input(&pool) {
        let mut current = pool.balls.remove(k).0;
        loop {
            iterations += 1;
            if iterations > watchdog {
                return Err(Error::Numerical(format!(
                    "dipole elimination exceeded {watchdog} iterations"
                )));
            }
            let (x, r) = (current.center, current.radius);
            let others = pool.balls_except(None);
            let blocked = blocked_intervals(x, r, &others);
            let t = escape_radius(r, &blocked);
            let d = pool
                .balls
                .iter()
                .filter(|b| b.1 == Kind::Eliminated)
                .map(|b| x.dist(b.0.center) - b.0.radius)
                .fold(f64::INFINITY, f64::min);
            if t <= d {
                if t < half {
                    let radii = free_quantiles(r, t, &blocked, SAMPLED_LEVELS);
                    let mut best = (f64::INFINITY, r);
                    for &s in &radii {
                        let v = circle_gradient_integral(u, x, s)?;
                        if v < best.0 {
                            best = (v, s);
                        }
                    }
                    let b = Ball::new(x, best.1);
                    pool.drop_inside(&b);
                    let b = pool.absorb_into(b);
                    pool.balls.push((
                        b,
                        Kind::Eliminated,
                        Some(EliminatedBall {
                            ball: b,
                            origin: BallOrigin::Regrown,
                            circle_integral: Some(best.0),
                            degree: None,
                        }),
                    ));
                } else {
                    let b = Ball::new(x, t);
                    pool.drop_inside(&b);
                    let b = pool.absorb_into(b);
                    pool.balls.push((
                        b,
                        Kind::Eliminated,
                        Some(EliminatedBall {
                            ball: b,
                            origin: BallOrigin::Promoted,
                            circle_integral: None,
                            degree: None,
                        }),
                    ));
                }
                break;
            }
            // blocked before escaping: stop at the last free radius below d
            let radius = match blocked.iter().find(|iv| iv.0 < d && d < iv.1) {
                Some(iv) => iv.0,
                None => d,
            };
            let merged = pool.absorb_into(Ball::new(x, radius.max(r)));
            if merged.radius >= half {
                pool.balls.push((
                    merged,
                    Kind::Eliminated,
                    Some(EliminatedBall {
                        ball: merged,
                        origin: BallOrigin::Merged,
                        circle_integral: None,
                        degree: None,
                    }),
                ));
                break;
            }
            current = merged;
        }
    }
    let mut small = Vec::new();
    let mut large = Vec::new();
    for (b, kind, record) in pool.balls {
        let mut rec = match kind {
            Kind::Eliminated => record.expect("eliminated balls carry a record"),
            Kind::Input => EliminatedBall {
                ball: b,
                origin: BallOrigin::Carried,
                circle_integral: None,
                degree: None,
            },
        };
        rec.degree = ball_degree(u, &b).ok();
        if b.radius < half {
            small.push(rec);
        } else {
            large.push(rec);
        }
    }
    Ok(DipoleFamilies {
        eps,
        input: f.clone(),
        small,
        large,
        budget,
        iterations,
        watchdog,
    })
}

/// A connected cluster of dilated large balls cut at a sampled level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterRegion {
    pub members: Vec<Ball>,
    pub member_degrees: Vec<i32>,
    /// Small balls lying inside `D^m`.
    pub enclosed_small: Vec<Ball>,
    pub enclosed_degrees: Vec<i32>,
    /// Radius multiplier defining the connected components.
    pub dilation: f64,
    /// Selected level `t^m ∈ (0, 1)`.
    pub level: f64,
    /// `D^m`: the members dilated by `1 + (F − 1) t^m`.
    pub balls: Vec<Ball>,
    pub degree: i32,
    pub boundary_integral: f64,
    pub diameter: f64,
}

impl ClusterRegion {
    pub fn member_degree_sum(&self) -> i32 {
        self.member_degrees.iter().chain(&self.enclosed_degrees).sum()
    }

    /// Ball of `D^m` whose centre becomes the atom of `μ̂`.
    pub fn anchor(&self) -> Point2 {
        self.members
            .iter()
            .fold(None::<Ball>, |best, b| match best {
                Some(c) if c.radius >= b.radius => Some(c),
                _ => Some(*b),
            })
            .map(|b| b.center)
            .expect("regions have members")
    }
}

/// Radius multiplier for the cluster covering: `max(16 Rad(𝓘^<)/ε, 2)`.
pub fn cluster_dilation(d: &DipoleFamilies) -> f64 {
    let rad: f64 = d.small.iter().map(|b| b.ball.radius).sum();
    (16.0 * rad / d.eps).max(2.0)
}

fn union_diameter(balls: &[Ball]) -> f64 {
    let mut diam: f64 = 0.0;
    for a in balls {
        for b in balls {
            diam = diam.max(a.center.dist(b.center) + a.radius + b.radius);
        }
    }
    diam
}

/// `∫|∇u|` over the arcs of the circles not covered by the other disks.
fn union_boundary_integral(u: &S1Field, balls: &[Ball]) -> Result<f64> {
    let h = u.grid().h;
    let mut sum = 0.0;
    for (k, b) in balls.iter().enumerate() {
        let n = circle_samples(b.radius, h);
        let dl = TAU * b.radius / n as f64;
        for q in 0..n {
            let a = TAU * q as f64 / n as f64;
            let p = b.center + Point2::new(a.cos(), a.sin()) * b.radius;
            if balls.iter().enumerate().any(|(m, o)| m != k && o.center.dist(p) < o.radius) {
                continue;
            }
            let g = u
                .grad_at(p)
                .ok_or_else(|| Error::InvalidInput("cluster boundary leaves the grid".into()))?;
            sum += g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt() * dl;
        }
    }
    Ok(sum)
}

/// Groups the dilated large balls into connected components and cuts each
/// at the sampled level minimising the boundary integral.
pub fn cluster_cover(d: &DipoleFamilies, u: &S1Field) -> Result<Vec<ClusterRegion>> {
    if d.large.is_empty() {
        return Ok(Vec::new());
    }
    let omega = u.domain().outer;
    let f = cluster_dilation(d);
    let large: Vec<Ball> = d.large.iter().map(|b| b.ball).collect();
    let dilated: Vec<Ball> = large.iter().map(|b| b.dilate(f)).collect();
    if let Some(b) = dilated.iter().find(|b| !omega.contains_ball(b)) {
        return Err(Error::InvalidInput(format!(
            "dilated ball B_{}({}, {}) leaves the domain; eps is too large",
            b.radius, b.center.x1, b.center.x2
        )));
    }
    let mut uf = UnionFind::new(large.len());
    for i in 0..large.len() {
        for j in i + 1..large.len() {
            if dilated[i].overlap_depth(&dilated[j]) > 0.0 {
                uf.union(i, j);
            }
        }
    }
    let small: Vec<Ball> = d.small.iter().map(|b| b.ball).collect();
    let mut out = Vec::new();
    for group in uf.groups() {
        let members: Vec<Ball> = group.iter().map(|&k| large[k]).collect();
        // f^m(y) = min_k dist(y, B_k) / ((F − 1) r_k), bounded on each small ball
        let level_range = |s: &Ball| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::INFINITY);
            for b in &members {
                let dc = s.center.dist(b.center) - b.radius;
                let scale = (f - 1.0) * b.radius;
                lo = lo.min((dc - s.radius).max(0.0) / scale);
                hi = hi.min((dc + s.radius).max(0.0) / scale);
            }
            (lo, hi)
        };
        let blocked = {
            let mut iv: Vec<(f64, f64)> = small.iter().map(level_range).filter(|iv| iv.0 < 1.0).collect();
            iv.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut merged: Vec<(f64, f64)> = Vec::new();
            for (a, b) in iv {
                match merged.last_mut() {
                    Some(last) if a <= last.1 => last.1 = last.1.max(b),
                    _ => merged.push((a, b)),
                }
            }
            merged
        };
        let levels = free_quantiles(0.0, 1.0, &blocked, SAMPLED_LEVELS);
        let mut best: Option<(f64, f64, Vec<Ball>, i32)> = None;
        for t in levels {
            let balls: Vec<Ball> = members.iter().map(|b| b.dilate(1.0 + (f - 1.0) * t)).collect();
            if balls.iter().any(|b| circle_hits_jump(u, b.center, b.radius)) {
                continue;
            }
            let Ok(degree) = degree_on_union_boundary(u, &balls) else {
                continue;
            };
            let integral = union_boundary_integral(u, &balls)?;
            if best.as_ref().is_none_or(|b| integral < b.1) {
                best = Some((t, integral, balls, degree));
            }
        }
        let Some((level, boundary_integral, balls, degree)) = best else {
            return Err(Error::Numerical(format!(
                "no sampled level of the cluster around ({}, {}) avoids the jump set",
                members[0].center.x1, members[0].center.x2
            )));
        };
        let member_degrees = members.iter().map(|b| ball_degree(u, b)).collect::<Result<Vec<_>>>()?;
        let enclosed_small: Vec<Ball> = small
            .iter()
            .filter(|s| balls.iter().any(|b| b.contains_ball(s)))
            .copied()
            .collect();
        let enclosed_degrees = enclosed_small.iter().map(|b| ball_degree(u, b)).collect::<Result<Vec<_>>>()?;
        out.push(ClusterRegion {
            diameter: union_diameter(&balls),
            members,
            member_degrees,
            enclosed_small,
            enclosed_degrees,
            dilation: f,
            level,
            balls,
            degree,
            boundary_integral,
        });
    }
    Ok(out)
}

/// `μ̂ = Σ deg(u, ∂D^m) δ_{x̂^m}`, with `x̂^m` the centre of the largest member.
pub fn extract_mu_hat(regions: &[ClusterRegion]) -> AtomicMeasure {
    AtomicMeasure::new(
        regions
            .iter()
            .filter(|r| r.degree != 0)
            .map(|r| Atom::new(r.anchor(), f64::from(r.degree)))
            .collect(),
    )
}

/// Stage-by-stage record of one detection run.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub eps: f64,
    pub h: f64,
    pub jump_length: f64,
    pub components: BallFamily,
    pub cover: BallFamily,
    pub cover_rad: f64,
    pub cover_degrees: Vec<Option<i32>>,
    pub growth: GrownFamily,
    pub grown: BallFamily,
    pub grown_rad: f64,
    pub mu_tilde: AtomicMeasure,
    pub fattened: BallFamily,
    pub fattened_rad: f64,
    /// `Rad / (ε|log ε|)` after covering and after fattening.
    pub cover_constant: f64,
    pub fattened_constant: f64,
    pub dipoles: DipoleFamilies,
    pub eliminated_rad: f64,
    pub max_circle_ratio: Option<f64>,
    pub clusters: Vec<ClusterRegion>,
    pub diameter_sum: f64,
    pub mu_hat: AtomicMeasure,
}

#[derive(Clone, Debug, Serialize)]
pub struct Detection {
    pub mu_hat: AtomicMeasure,
    pub diagnostics: Diagnostics,
}

impl Detection {
    pub fn diagnostics_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.diagnostics)?)
    }
}

/// Full pipeline from the jump set of `u` to `μ̂`.
pub fn detect(u: &S1Field, eps: f64) -> Result<Detection> {
    check_eps(eps)?;
    let components = jump_component_balls(u);
    let cover = merge_family(&components);
    let cover_degrees = cover.balls.iter().map(|b| ball_degree(u, b).ok()).collect();
    let growth = ball_grow(&cover, 1.0)?;
    let omega = u.domain();
    let grown = BallFamily::new(
        growth
            .final_family()
            .balls
            .into_iter()
            .filter(|b| omega.outer.contains_ball(b))
            .collect(),
    );
    let mu_tilde = extract_mu_tilde(&growth, u, omega)?;
    let fattened = fatten_nonzero(&grown, u, eps)?;
    let dipoles = dipole_eliminate(&fattened, u, eps)?;
    let clusters = cluster_cover(&dipoles, u)?;
    let mu_hat = extract_mu_hat(&clusters);
    let diagnostics = Diagnostics {
        eps,
        h: u.grid().h,
        jump_length: u.jump_length(),
        cover_rad: cover.rad(),
        cover_constant: cover.rad() / eps_log(eps),
        components,
        cover,
        cover_degrees,
        grown_rad: grown.rad(),
        growth,
        grown,
        mu_tilde,
        fattened_rad: fattened.rad(),
        fattened_constant: fattened.rad() / eps_log(eps),
        fattened,
        eliminated_rad: dipoles.radius_sum(),
        max_circle_ratio: dipoles.max_circle_ratio(),
        dipoles,
        diameter_sum: clusters.iter().map(|c| c.diameter).sum(),
        clusters,
        mu_hat: mu_hat.clone(),
    };
    Ok(Detection { mu_hat, diagnostics })
}
