//! Piecewise-affine maps `U ⊂ R^n → R^m` stored as independent simplicial
//! pieces plus an explicit list of jump faces carrying both traces.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Conforming simplicial mesh in `R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexMesh {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub simplices: Vec<Vec<usize>>,
}

impl SimplexMesh {
    pub fn new(dim: usize, vertices: Vec<Vec<f64>>, simplices: Vec<Vec<usize>>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInput("mesh dimension must be at least 2".into()));
        }
        if vertices.iter().any(|v| v.len() != dim || v.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidInput("vertex coordinates must be finite and of mesh dimension".into()));
        }
        for (k, s) in simplices.iter().enumerate() {
            if s.len() != dim + 1 || s.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidInput(format!("simplex {k} has bad vertex indices")));
            }
            let pts: Vec<Vec<f64>> = s.iter().map(|&v| vertices[v].clone()).collect();
            if simplex_measure(&pts) <= 1e-14 * diameter(&pts).powi(dim as i32) {
                return Err(Error::InvalidInput(format!("simplex {k} is degenerate")));
            }
        }
        Ok(Self {
            dim,
            vertices,
            simplices,
        })
    }

    /// Kuhn triangulation of the cube `[lo, hi]^dim` with `cells` cells per side.
    pub fn kuhn_cube(dim: usize, cells: usize, lo: f64, hi: f64) -> Result<Self> {
        if cells == 0 || hi <= lo {
            return Err(Error::InvalidInput("cube needs cells ≥ 1 and lo < hi".into()));
        }
        let side = cells + 1;
        let h = (hi - lo) / cells as f64;
        let index = |c: &[usize]| c.iter().rev().fold(0, |acc, &x| acc * side + x);
        let mut vertices = Vec::new();
        let mut coord = vec![0usize; dim];
        for _ in 0..side.pow(dim as u32) {
            vertices.push(coord.iter().map(|&c| lo + h * c as f64).collect());
            for c in coord.iter_mut() {
                *c += 1;
                if *c < side {
                    break;
                }
                *c = 0;
            }
        }
        let perms = permutations(dim);
        let mut simplices = Vec::new();
        let mut cell = vec![0usize; dim];
        for _ in 0..cells.pow(dim as u32) {
            for p in &perms {
                let mut v = cell.clone();
                let mut s = vec![index(&v)];
                for &axis in p {
                    v[axis] += 1;
                    s.push(index(&v));
                }
                simplices.push(s);
            }
            for c in cell.iter_mut() {
                *c += 1;
                if *c < cells {
                    break;
                }
                *c = 0;
            }
        }
        Self::new(dim, vertices, simplices)
    }

    fn points(&self, s: usize) -> Vec<Vec<f64>> {
        self.simplices[s].iter().map(|&v| self.vertices[v].clone()).collect()
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn diameter(pts: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for a in pts {
        for b in pts {
            d = d.max(dist(a, b));
        }
    }
    d
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// k-dimensional measure of a k-simplex embedded in `R^n`, from the Gram determinant.
pub fn simplex_measure(pts: &[Vec<f64>]) -> f64 {
    let k = pts.len() - 1;
    if k == 0 {
        return 1.0;
    }
    let n = pts[0].len();
    let e = DMatrix::from_fn(n, k, |r, c| pts[c + 1][r] - pts[0][r]);
    let gram = e.transpose() * e;
    gram.determinant().max(0.0).sqrt() / factorial(k)
}

/// Normal to the hyperplane through `n` points of `R^n` (generalised cross product).
fn hyperplane_normal(pts: &[Vec<f64>]) -> Vec<f64> {
    let n = pts[0].len();
    let rows = DMatrix::from_fn(n - 1, n, |r, c| pts[r + 1][c] - pts[0][c]);
    (0..n)
        .map(|k| {
            let minor = rows.clone().remove_column(k);
            let d = if n == 1 { 1.0 } else { minor.determinant() };
            if k % 2 == 0 {
                d
            } else {
                -d
            }
        })
        .collect()
}

pub(crate) fn interpolate(points: &[Vec<f64>], bary: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; points[0].len()];
    for (p, &l) in points.iter().zip(bary) {
        for (o, v) in out.iter_mut().zip(p) {
            *o += l * v;
        }
    }
    out
}

/// One simplex with the nodal values of its affine map.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePiece {
    pub vertices: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

impl AffinePiece {
    pub fn volume(&self) -> f64 {
        simplex_measure(&self.vertices)
    }

    pub fn point(&self, bary: &[f64]) -> Vec<f64> {
        interpolate(&self.vertices, bary)
    }

    pub fn value(&self, bary: &[f64]) -> Vec<f64> {
        interpolate(&self.values, bary)
    }

    /// Row `c` is `∇u^c`.
    pub fn gradient(&self) -> Vec<Vec<f64>> {
        let n = self.vertices[0].len();
        let m = self.values[0].len();
        let e = DMatrix::from_fn(n, n, |r, c| self.vertices[r + 1][c] - self.vertices[0][c]);
        let lu = e.lu();
        (0..m)
            .map(|comp| {
                let d = nalgebra::DVector::from_fn(n, |r, _| self.values[r + 1][comp] - self.values[0][comp]);
                lu.solve(&d).map(|g| g.iter().copied().collect()).unwrap_or_else(|| vec![0.0; n])
            })
            .collect()
    }
}

/// Codimension-one face of the jump set with affine one-sided traces.
/// `normal` is a unit vector pointing from the `minus` side to the `plus` side.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpFace {
    pub vertices: Vec<Vec<f64>>,
    pub minus: Vec<Vec<f64>>,
    pub plus: Vec<Vec<f64>>,
    pub normal: Vec<f64>,
}

impl JumpFace {
    pub fn area(&self) -> f64 {
        simplex_measure(&self.vertices)
    }

    pub fn point(&self, bary: &[f64]) -> Vec<f64> {
        interpolate(&self.vertices, bary)
    }

    pub fn traces(&self, bary: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (interpolate(&self.minus, bary), interpolate(&self.plus, bary))
    }
}

/// Per-simplex affine map `u(x) = offset + linear · x`, `linear` being `m × n`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineCoefficients {
    pub offset: Vec<f64>,
    pub linear: Vec<Vec<f64>>,
}

impl AffineCoefficients {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.offset
            .iter()
            .zip(&self.linear)
            .map(|(o, row)| o + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PwAffineMap {
    dim: usize,
    target_dim: usize,
    pieces: Vec<AffinePiece>,
    jumps: Vec<JumpFace>,
}

fn same_trace(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-13 * (1.0 + x.abs().max(y.abs())))
}

impl PwAffineMap {
    pub fn new(dim: usize, target_dim: usize, pieces: Vec<AffinePiece>, jumps: Vec<JumpFace>) -> Result<Self> {
        if dim < 2 || target_dim < 2 {
            return Err(Error::InvalidInput("need n ≥ 2 and m ≥ 2".into()));
        }
        for p in &pieces {
            if p.vertices.len() != dim + 1
                || p.values.len() != dim + 1
                || p.vertices.iter().any(|v| v.len() != dim)
                || p.values.iter().any(|v| v.len() != target_dim)
            {
                return Err(Error::InvalidInput("piece shape mismatch".into()));
            }
        }
        for f in &jumps {
            let norm: f64 = f.normal.iter().map(|v| v * v).sum::<f64>().sqrt();
            if f.vertices.len() != dim
                || f.minus.len() != dim
                || f.plus.len() != dim
                || f.normal.len() != dim
                || f.minus.iter().chain(&f.plus).any(|v| v.len() != target_dim)
                || (norm - 1.0).abs() > 1e-9
            {
                return Err(Error::InvalidInput("jump face shape mismatch".into()));
            }
        }
        Ok(Self {
            dim,
            target_dim,
            pieces,
            jumps,
        })
    }

    /// Builds pieces from per-simplex nodal values and detects the jump faces
    /// as the interior faces whose two traces disagree. The face normal points
    /// from the lower-numbered simplex into the higher-numbered one.
    pub fn from_mesh(mesh: &SimplexMesh, target_dim: usize, values: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if values.len() != mesh.simplices.len() {
            return Err(Error::InvalidInput("one value table per simplex expected".into()));
        }
        let pieces: Vec<AffinePiece> = values
            .into_iter()
            .enumerate()
            .map(|(s, vals)| AffinePiece {
                vertices: mesh.points(s),
                values: vals,
            })
            .collect();
        let mut faces: HashMap<Vec<usize>, Vec<(usize, usize)>> = HashMap::new();
        for (s, simplex) in mesh.simplices.iter().enumerate() {
            for opposite in 0..=mesh.dim {
                let mut key: Vec<usize> = simplex
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != opposite)
                    .map(|(_, &v)| v)
                    .collect();
                key.sort_unstable();
                faces.entry(key).or_default().push((s, opposite));
            }
        }
        let mut keys: Vec<&Vec<usize>> = faces.keys().collect();
        keys.sort();
        let mut jumps = Vec::new();
        for key in keys {
            let owners = &faces[key];
            if owners.len() > 2 {
                return Err(Error::InvalidInput("face shared by more than two simplices".into()));
            }
            if owners.len() < 2 {
                continue;
            }
            let (a, opp_a) = owners[0].min(owners[1]);
            let (b, _) = owners[0].max(owners[1]);
            let trace = |s: usize| -> Vec<Vec<f64>> {
                key.iter()
                    .map(|v| {
                        let local = mesh.simplices[s].iter().position(|w| w == v).unwrap();
                        pieces[s].values[local].clone()
                    })
                    .collect()
            };
            let (minus, plus) = (trace(a), trace(b));
            if minus.iter().zip(&plus).all(|(x, y)| same_trace(x, y)) {
                continue;
            }
            let vertices: Vec<Vec<f64>> = key.iter().map(|&v| mesh.vertices[v].clone()).collect();
            let mut normal = hyperplane_normal(&vertices);
            let len = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
            normal.iter_mut().for_each(|v| *v /= len);
            let apex = &pieces[a].vertices[opp_a];
            let out: f64 = normal.iter().zip(apex.iter().zip(&vertices[0])).map(|(n, (p, q))| n * (q - p)).sum();
            if out < 0.0 {
                normal.iter_mut().for_each(|v| *v = -*v);
            }
            jumps.push(JumpFace {
                vertices,
                minus,
                plus,
                normal,
            });
        }
        Self::new(mesh.dim, target_dim, pieces, jumps)
    }

    pub fn from_affine(mesh: &SimplexMesh, target_dim: usize, coefficients: &[AffineCoefficients]) -> Result<Self> {
        if coefficients.len() != mesh.simplices.len() {
            return Err(Error::InvalidInput("one coefficient set per simplex expected".into()));
        }
        if coefficients
            .iter()
            .any(|c| c.offset.len() != target_dim || c.linear.len() != target_dim || c.linear.iter().any(|r| r.len() != mesh.dim))
        {
            return Err(Error::InvalidInput("affine coefficient shape mismatch".into()));
        }
        let values = coefficients
            .iter()
            .enumerate()
            .map(|(s, c)| mesh.points(s).iter().map(|x| c.eval(x)).collect())
            .collect();
        Self::from_mesh(mesh, target_dim, values)
    }

    /// Continuous P1 map from values at the mesh vertices.
    pub fn continuous(mesh: &SimplexMesh, target_dim: usize, nodal: &[Vec<f64>]) -> Result<Self> {
        if nodal.len() != mesh.vertices.len() || nodal.iter().any(|v| v.len() != target_dim) {
            return Err(Error::InvalidInput("nodal value table mismatch".into()));
        }
        let values = mesh
            .simplices
            .iter()
            .map(|s| s.iter().map(|&v| nodal[v].clone()).collect())
            .collect();
        Self::from_mesh(mesh, target_dim, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn jumps(&self) -> &[JumpFace] {
        &self.jumps
    }

    pub fn sup_norm(&self) -> f64 {
        self.pieces
            .iter()
            .flat_map(|p| p.values.iter())
            .chain(self.jumps.iter().flat_map(|f| f.minus.iter().chain(&f.plus)))
            .flat_map(|v| v.iter())
            .fold(0.0, |a: f64, b| a.max(b.abs()))
    }

    /// Componentwise truncation `(−N) ∨ u ∧ N`. Pieces and faces are split
    /// along the level sets `u^h = ±N` so the result stays piecewise affine.
    pub fn truncate(&self, level: f64) -> Result<Self> {
        if !(level > 0.0) {
            return Err(Error::InvalidInput("truncation level must be positive".into()));
        }
        let m = self.target_dim;
        let clamp = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = x.clamp(-level, level));
        let mut pieces = Vec::new();
        for p in &self.pieces {
            let mut cells = vec![Cell {
                points: p.vertices.clone(),
                data: p.values.clone(),
            }];
            for c in 0..m {
                for target in [level, -level] {
                    cells = split_all(cells, c, target);
                }
            }
            for mut cell in cells {
                cell.data.iter_mut().for_each(clamp);
                pieces.push(AffinePiece {
                    vertices: cell.points,
                    values: cell.data,
                });
            }
        }
        let mut jumps = Vec::new();
        for f in &self.jumps {
            let data: Vec<Vec<f64>> = f.minus.iter().zip(&f.plus).map(|(a, b)| [a.clone(), b.clone()].concat()).collect();
            let mut cells = vec![Cell {
                points: f.vertices.clone(),
                data,
            }];
            for c in 0..2 * m {
                for target in [level, -level] {
                    cells = split_all(cells, c, target);
                }
            }
            for mut cell in cells {
                cell.data.iter_mut().for_each(clamp);
                let minus: Vec<Vec<f64>> = cell.data.iter().map(|d| d[..m].to_vec()).collect();
                let plus: Vec<Vec<f64>> = cell.data.iter().map(|d| d[m..].to_vec()).collect();
                if minus.iter().zip(&plus).all(|(a, b)| a == b) {
                    continue;
                }
                jumps.push(JumpFace {
                    vertices: cell.points,
                    minus,
                    plus,
                    normal: f.normal.clone(),
                });
            }
        }
        Self::new(self.dim, self.target_dim, pieces, jumps)
    }
}

/// Simplex of any dimension carrying a data vector at each vertex.
#[derive(Clone, Debug)]
pub(crate) struct Cell {
    pub points: Vec<Vec<f64>>,
    pub data: Vec<Vec<f64>>,
}

impl Cell {
    pub fn measure(&self) -> f64 {
        simplex_measure(&self.points)
    }
}

/// Splits every cell by edge bisection along `data[channel] = target`, so no
/// output cell has vertices strictly on both sides of the level.
pub(crate) fn split_all(cells: Vec<Cell>, channel: usize, target: f64) -> Vec<Cell> {
    let mut out = Vec::with_capacity(cells.len());
    let mut stack = cells;
    while let Some(cell) = stack.pop() {
        let level: Vec<f64> = cell.data.iter().map(|d| d[channel] - target).collect();
        let k = cell.points.len();
        let crossing = (0..k)
            .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
            .find(|&(a, b)| (level[a] > 0.0 && level[b] < 0.0) || (level[a] < 0.0 && level[b] > 0.0));
        let Some((a, b)) = crossing else {
            out.push(cell);
            continue;
        };
        let t = level[a] / (level[a] - level[b]);
        let lerp = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p + t * (q - p)).collect() };
        let point = lerp(&cell.points[a], &cell.points[b]);
        let mut data = lerp(&cell.data[a], &cell.data[b]);
        data[channel] = target;
        let mut first = cell.clone();
        first.points[b] = point.clone();
        first.data[b] = data.clone();
        let mut second = cell;
        second.points[a] = point;
        second.data[a] = data;
        stack.push(first);
        stack.push(second);
    }
    out
}

/// `∫ |f|` over a cell for `f` affine, given by its vertex values in `data[channel]`.
pub(crate) fn abs_integral_affine(cell: Cell, channel: usize) -> f64 {
    split_all(vec![cell], channel, 0.0)
        .into_iter()
        .map(|c| {
            let mean = c.data.iter().map(|d| d[channel]).sum::<f64>() / c.data.len() as f64;
            c.measure() * mean.abs()
        })
        .sum()
}

/// Self-similar P1 map on `(−1, 1)²` with `|u| ~ |x|^{−β}` towards the origin:
/// `layers` square rings of half-width `2^{−k}`, each triangulated identically,
/// and a core fan around the origin. Nodal values are `r^{−β} (1, x₁/r)`;
/// the origin takes the mean of the innermost ring.
pub fn graded_power_map(beta: f64, layers: usize) -> Result<PwAffineMap> {
    if !(beta > 0.0) || layers == 0 {
        return Err(Error::InvalidInput("graded map needs β > 0 and at least one layer".into()));
    }
    const RING: [(f64, f64); 8] = [
        (1.0, 0.0),
        (1.0, 1.0),
        (0.0, 1.0),
        (-1.0, 1.0),
        (-1.0, 0.0),
        (-1.0, -1.0),
        (0.0, -1.0),
        (1.0, -1.0),
    ];
    let mut vertices = Vec::new();
    let mut nodal = Vec::new();
    for k in 0..=layers {
        let s = 0.5f64.powi(k as i32);
        for (a, b) in RING {
            let x = vec![a * s, b * s];
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            nodal.push(vec![r.powf(-beta), x[0] / r * r.powf(-beta)]);
            vertices.push(x);
        }
    }
    let inner = layers * 8;
    let centre: Vec<f64> = (0..2)
        .map(|c| (0..8).map(|a| nodal[inner + a][c]).sum::<f64>() / 8.0)
        .collect();
    vertices.push(vec![0.0, 0.0]);
    nodal.push(centre);
    let origin = vertices.len() - 1;
    let mut simplices = Vec::new();
    for k in 0..layers {
        for a in 0..8 {
            let (p, p1) = (8 * k + a, 8 * k + (a + 1) % 8);
            let (q, q1) = (8 * (k + 1) + a, 8 * (k + 1) + (a + 1) % 8);
            simplices.push(vec![p, p1, q1]);
            simplices.push(vec![p, q1, q]);
        }
    }
    for a in 0..8 {
        simplices.push(vec![inner + a, inner + (a + 1) % 8, origin]);
    }
    let mesh = SimplexMesh::new(2, vertices, simplices)?;
    PwAffineMap::continuous(&mesh, 2, &nodal)
}
