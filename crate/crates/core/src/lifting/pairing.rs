//! Pairings of the minimal lifting `μ_u`, the measures `ν_u` and `λ^I_j`,
//! and the weak 2×2 minors built from them.

use super::map::{abs_integral_affine, split_all, Cell, JumpFace, PwAffineMap};
use super::quadrature::{gauss_legendre_8, grundmann_moller, SimplexRule};
use crate::error::{Error, Result};

/// Grundmann–Möller order: exact to degree `2·GM_ORDER + 1`.
pub const GM_ORDER: usize = 6;

/// Ordered row pair `(i, i′)` of `R^m` and column pair `(j, j′)` of `R^n`, zero based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MultiIndexPair {
    pub rows: [usize; 2],
    pub cols: [usize; 2],
    sign: i8,
}

/// Sign of the permutation listing `first` then the rest of `0..len` in order.
fn leading_pair_sign(first: [usize; 2], len: usize) -> i8 {
    let mut order = vec![first[0], first[1]];
    order.extend((0..len).filter(|k| !first.contains(k)));
    let mut inversions = 0;
    for a in 0..order.len() {
        for b in a + 1..order.len() {
            if order[a] > order[b] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

impl MultiIndexPair {
    pub fn new(rows: [usize; 2], cols: [usize; 2], target_dim: usize, dim: usize) -> Result<Self> {
        if rows[0] == rows[1] || cols[0] == cols[1] {
            return Err(Error::InvalidInput("multi-index entries must differ".into()));
        }
        if rows.iter().any(|&r| r >= target_dim) || cols.iter().any(|&c| c >= dim) {
            return Err(Error::InvalidInput("multi-index out of range".into()));
        }
        let sign = leading_pair_sign(rows, target_dim) * leading_pair_sign(cols, dim);
        Ok(Self { rows, cols, sign })
    }

    /// `σ(I, Î) σ(J, Ĵ)`.
    pub fn sign(&self) -> f64 {
        f64::from(self.sign)
    }
}

fn check_indices(u: &PwAffineMap, comps: &[usize], dir: usize) -> Result<()> {
    if comps.iter().any(|&c| c >= u.target_dim()) || dir >= u.dim() {
        return Err(Error::InvalidInput("component or direction out of range".into()));
    }
    Ok(())
}

fn piece_rule(u: &PwAffineMap) -> SimplexRule {
    grundmann_moller(u.dim(), GM_ORDER)
}

fn face_rule(u: &PwAffineMap) -> SimplexRule {
    grundmann_moller(u.dim() - 1, GM_ORDER)
}

/// Sum over jump faces of `|F| Σ_q w_q f(face, x_q, u⁻(x_q), u⁺(x_q))`.
fn over_faces(u: &PwAffineMap, mut f: impl FnMut(&JumpFace, &[f64], &[f64], &[f64]) -> f64) -> f64 {
    let rule = face_rule(u);
    let mut total = 0.0;
    for face in u.jumps() {
        let mut acc = 0.0;
        for (bary, w) in rule.nodes.iter().zip(&rule.weights) {
            let x = face.point(bary);
            let (minus, plus) = face.traces(bary);
            acc += w * f(face, &x, &minus, &plus);
        }
        total += face.area() * acc;
    }
    total
}

/// `⟨(μ_u)^i_j, φ⟩` for a test function `φ(x, y)` on `Ω × R^m`: the diffuse
/// part `∫ φ(x, u) ∂_j u^i` plus the jump part with the segment average
/// `∫₀¹ φ(x, θu⁺ + (1−θ)u⁻) dθ` against `[u^i] ν_j`.
pub fn minimal_lifting_pairing(
    u: &PwAffineMap,
    phi: &dyn Fn(&[f64], &[f64]) -> f64,
    comp: usize,
    dir: usize,
) -> Result<f64> {
    check_indices(u, &[comp], dir)?;
    let rule = piece_rule(u);
    let mut total = 0.0;
    for p in u.pieces() {
        let slope = p.gradient()[comp][dir];
        if slope == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for (bary, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * phi(&p.point(bary), &p.value(bary));
        }
        total += p.volume() * acc * slope;
    }
    let gl = gauss_legendre_8();
    total += over_faces(u, |face, x, minus, plus| {
        let jump = (plus[comp] - minus[comp]) * face.normal[dir];
        if jump == 0.0 {
            return 0.0;
        }
        let mut y = vec![0.0; minus.len()];
        let mut avg = 0.0;
        for (theta, w) in gl {
            for (k, yk) in y.iter_mut().enumerate() {
                *yk = theta * plus[k] + (1.0 - theta) * minus[k];
            }
            avg += w * phi(x, &y);
        }
        avg * jump
    });
    Ok(total)
}

/// `∫ ψ d[u^h D_j u^i]`: diffuse `∫ ψ u^h ∂_j u^i` plus jump `∫ ψ ū^h [u^i] ν_j`
/// with `ū` the trace average.
pub fn nu_pairing(u: &PwAffineMap, psi: &dyn Fn(&[f64]) -> f64, comp: usize, h: usize, dir: usize) -> Result<f64> {
    check_indices(u, &[comp, h], dir)?;
    let mass = lifted_abs_mass(u, h, comp, dir)?;
    if !mass.is_finite() {
        return Err(Error::Admissibility(format!(
            "y^{h} is not integrable against the lifting of D_{dir} u^{comp}"
        )));
    }
    let rule = piece_rule(u);
    let mut total = 0.0;
    for p in u.pieces() {
        let slope = p.gradient()[comp][dir];
        if slope == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for (bary, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * psi(&p.point(bary)) * p.value(bary)[h];
        }
        total += p.volume() * acc * slope;
    }
    total += over_faces(u, |face, x, minus, plus| {
        psi(x) * 0.5 * (minus[h] + plus[h]) * (plus[comp] - minus[comp]) * face.normal[dir]
    });
    Ok(total)
}

/// `∫ ψ dλ^I_j` with `λ^I_j = ½([u^i D_j u^{i′}] − [u^{i′} D_j u^i])`.
pub fn lambda_pairing(u: &PwAffineMap, psi: &dyn Fn(&[f64]) -> f64, rows: [usize; 2], dir: usize) -> Result<f64> {
    let [i, k] = rows;
    Ok(0.5 * (nu_pairing(u, psi, k, i, dir)? - nu_pairing(u, psi, i, k, dir)?))
}

/// Whether `y^h` is integrable against the lifting measures entering the
/// minors for `(I, J)`, with the summed right-hand masses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropertyP {
    pub holds: bool,
    pub value: f64,
}

/// `∫|ū^h| d|D_j u^i|` off the jump set plus `∫∫₀¹ |(ū^θ)^h| dθ d|D_j u^i|` on it.
pub fn lifted_abs_mass(u: &PwAffineMap, h: usize, comp: usize, dir: usize) -> Result<f64> {
    check_indices(u, &[comp, h], dir)?;
    let mut total = 0.0;
    for p in u.pieces() {
        let slope = p.gradient()[comp][dir].abs();
        if slope == 0.0 {
            continue;
        }
        let cell = Cell {
            points: p.vertices.clone(),
            data: p.values.clone(),
        };
        total += slope * abs_integral_affine(cell, h);
    }
    let m = u.target_dim();
    let rule = face_rule(u);
    for face in u.jumps() {
        let nu = face.normal[dir].abs();
        if nu == 0.0 {
            continue;
        }
        // channels: minus ‖ plus ‖ jump of `comp`
        let data = face
            .minus
            .iter()
            .zip(&face.plus)
            .map(|(a, b)| {
                let mut d = [a.clone(), b.clone()].concat();
                d.push(b[comp] - a[comp]);
                d
            })
            .collect();
        let mut cells = vec![Cell {
            points: face.vertices.clone(),
            data,
        }];
        for channel in [h, m + h, 2 * m] {
            cells = split_all(cells, channel, 0.0);
        }
        for c in cells {
            let mut acc = 0.0;
            for (bary, w) in rule.nodes.iter().zip(&rule.weights) {
                let d = super::map::interpolate(&c.data, bary);
                acc += w * segment_abs_mean(d[h], d[m + h]) * d[2 * m].abs();
            }
            total += nu * c.measure() * acc;
        }
    }
    Ok(total)
}

/// `∫₀¹ |θb + (1−θ)a| dθ`.
fn segment_abs_mean(a: f64, b: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * (a + b).abs()
    } else {
        0.5 * (a * a + b * b) / (b - a).abs()
    }
}

pub fn check_property_p(u: &PwAffineMap, pair: &MultiIndexPair) -> Result<PropertyP> {
    let [i, k] = pair.rows;
    let mut value = 0.0;
    for &dir in &pair.cols {
        value += lifted_abs_mass(u, i, k, dir)? + lifted_abs_mass(u, k, i, dir)?;
    }
    Ok(PropertyP {
        holds: value.is_finite(),
        value,
    })
}

fn require_property_p(u: &PwAffineMap, pair: &MultiIndexPair) -> Result<()> {
    if !check_property_p(u, pair)?.holds {
        return Err(Error::Admissibility("property (P) fails for this multi-index".into()));
    }
    Ok(())
}

/// `⟨M^J_I(Du), φ⟩ = ∫ ∂_{j′}φ dλ^I_j − ∫ ∂_jφ dλ^I_{j′}`, from the gradient of φ.
/// On smooth maps this is `∫ φ (∂_j u^i ∂_{j′} u^{i′} − ∂_{j′} u^i ∂_j u^{i′})`.
pub fn minor_apply(u: &PwAffineMap, pair: &MultiIndexPair, grad_phi: &dyn Fn(&[f64]) -> Vec<f64>) -> Result<f64> {
    require_property_p(u, pair)?;
    let [j, k] = pair.cols;
    let first = lambda_pairing(u, &|x| grad_phi(x)[k], pair.rows, j)?;
    let second = lambda_pairing(u, &|x| grad_phi(x)[j], pair.rows, k)?;
    Ok(first - second)
}

/// `∂(T_u)_{I,J}(φ) = σ^I_J ⟨M^J_I(Du), φ⟩`.
pub fn boundary_apply(u: &PwAffineMap, pair: &MultiIndexPair, grad_phi: &dyn Fn(&[f64]) -> Vec<f64>) -> Result<f64> {
    Ok(pair.sign() * minor_apply(u, pair, grad_phi)?)
}

/// `|λ^I_j|(Ω)`.
pub fn lambda_mass(u: &PwAffineMap, rows: [usize; 2], dir: usize) -> Result<f64> {
    let [i, k] = rows;
    check_indices(u, &[i, k], dir)?;
    let mut total = 0.0;
    for p in u.pieces() {
        let g = p.gradient();
        let (gi, gk) = (g[i][dir], g[k][dir]);
        let data = p
            .values
            .iter()
            .map(|v| vec![0.5 * (v[i] * gk - v[k] * gi)])
            .collect();
        total += abs_integral_affine(
            Cell {
                points: p.vertices.clone(),
                data,
            },
            0,
        );
    }
    let rule = face_rule(u);
    for face in u.jumps() {
        let nu = face.normal[dir];
        if nu == 0.0 {
            continue;
        }
        // ½(ū^i [u^k] − ū^k [u^i]) = ½(u⁻^i u⁺^k − u⁺^i u⁻^k)
        let density = |bary: &[f64]| {
            let (a, b) = face.traces(bary);
            0.5 * (a[i] * b[k] - b[i] * a[k]) * nu
        };
        total += abs_integral_adaptive(&face.vertices, &density, &rule, face.area());
    }
    Ok(total)
}

/// `∫ |f|` over a simplex for smooth `f` given in barycentric coordinates of
/// the original simplex; cells where `f` changes sign are bisected.
fn abs_integral_adaptive(points: &[Vec<f64>], f: &dyn Fn(&[f64]) -> f64, rule: &SimplexRule, measure: f64) -> f64 {
    let k = points.len();
    let corners: Vec<Vec<f64>> = (0..k)
        .map(|a| (0..k).map(|b| if a == b { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut stack = vec![(corners, measure, 0usize)];
    let mut total = 0.0;
    while let Some((cell, size, depth)) = stack.pop() {
        let samples: Vec<f64> = rule
            .nodes
            .iter()
            .map(|b| f(&super::map::interpolate(&cell, b)))
            .chain(cell.iter().map(|b| f(b)))
            .collect();
        let integral = size * rule.weights.iter().zip(&samples).map(|(w, s)| w * s).sum::<f64>();
        let definite = samples.iter().all(|s| *s >= 0.0) || samples.iter().all(|s| *s <= 0.0);
        if definite || depth >= 40 || size <= 1e-13 * measure {
            total += integral.abs();
            continue;
        }
        let (mut ea, mut eb, mut best) = (0, 1, -1.0);
        for a in 0..k {
            for b in a + 1..k {
                let d = super::map::dist(&super::map::interpolate(points, &cell[a]), &super::map::interpolate(points, &cell[b]));
                if d > best {
                    (ea, eb, best) = (a, b, d);
                }
            }
        }
        let mid: Vec<f64> = cell[ea].iter().zip(&cell[eb]).map(|(x, y)| 0.5 * (x + y)).collect();
        let mut first = cell.clone();
        first[eb] = mid.clone();
        let mut second = cell;
        second[ea] = mid;
        stack.push((first, 0.5 * size, depth + 1));
        stack.push((second, 0.5 * size, depth + 1));
    }
    total
}

/// `|λ^I_j|(Ω) + |λ^I_{j′}|(Ω)`, the flat-norm bound for `∂(T_u)_{I,J}`.
pub fn flat_bound_boundary(u: &PwAffineMap, pair: &MultiIndexPair) -> Result<f64> {
    require_property_p(u, pair)?;
    Ok(lambda_mass(u, pair.rows, pair.cols[0])? + lambda_mass(u, pair.rows, pair.cols[1])?)
}

/// `|D_j u^i|(Ω)`.
pub fn variation(u: &PwAffineMap, comp: usize, dir: usize) -> Result<f64> {
    check_indices(u, &[comp], dir)?;
    let mut total: f64 = u.pieces().iter().map(|p| p.gradient()[comp][dir].abs() * p.volume()).sum();
    for face in u.jumps() {
        let data = face.minus.iter().zip(&face.plus).map(|(a, b)| vec![b[comp] - a[comp]]).collect();
        total += face.normal[dir].abs()
            * abs_integral_affine(
                Cell {
                    points: face.vertices.clone(),
                    data,
                },
                0,
            );
    }
    Ok(total)
}
