//! Fixtures shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use topsing_core::lifting::{AffineCoefficients, PwAffineMap, SimplexMesh};

/// Tensor mesh of the rectangle spanned by the breakpoints, two triangles per box.
pub fn rect_mesh(xs: &[f64], ys: &[f64]) -> SimplexMesh {
    let mut vertices = Vec::new();
    for &y in ys {
        for &x in xs {
            vertices.push(vec![x, y]);
        }
    }
    let nx = xs.len();
    let mut simplices = Vec::new();
    for j in 0..ys.len() - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            simplices.push(vec![a, a + 1, a + nx + 1]);
            simplices.push(vec![a, a + nx + 1, a + nx]);
        }
    }
    SimplexMesh::new(2, vertices, simplices).unwrap()
}

pub fn centroid(mesh: &SimplexMesh, s: usize) -> Vec<f64> {
    let k = mesh.simplices[s].len() as f64;
    (0..mesh.dim)
        .map(|c| mesh.simplices[s].iter().map(|&v| mesh.vertices[v][c]).sum::<f64>() / k)
        .collect()
}

/// `a` on `{x₁ < 0}`, `b` on `{x₁ ≥ 0}` in `(−1, 1)²`.
pub fn one_jump_map(a: &[f64], b: &[f64]) -> PwAffineMap {
    let mesh = rect_mesh(&[-1.0, -0.5, 0.0, 0.5, 1.0], &[-1.0, 0.0, 1.0]);
    let values = (0..mesh.simplices.len())
        .map(|s| {
            let v = if centroid(&mesh, s)[0] < 0.0 { a } else { b };
            vec![v.to_vec(); 3]
        })
        .collect();
    PwAffineMap::from_mesh(&mesh, a.len(), values).unwrap()
}

pub fn unit_square_affine(linear: [[f64; 2]; 2], offset: [f64; 2]) -> PwAffineMap {
    let mesh = SimplexMesh::kuhn_cube(2, 3, 0.0, 1.0).unwrap();
    let c = AffineCoefficients {
        offset: offset.to_vec(),
        linear: linear.iter().map(|r| r.to_vec()).collect(),
    };
    PwAffineMap::from_affine(&mesh, 2, &vec![c; mesh.simplices.len()]).unwrap()
}

/// Integral over a simplex by collapsed-coordinate Gauss–Legendre (Duffy).
pub fn duffy_integral(pts: &[Vec<f64>], f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let gl: Vec<(f64, f64)> = gl_nodes(10);
    let n = pts.len() - 1;
    let e = DMatrix::from_fn(n, n, |r, c| pts[c + 1][r] - pts[0][r]);
    let jac = e.determinant().abs();
    let mut total = 0.0;
    let mut idx = vec![0usize; n];
    loop {
        // collapsed map of the unit cube onto the reference simplex
        let mut rest = 1.0;
        let mut weight = 1.0;
        let mut bary = Vec::with_capacity(n);
        for &k in &idx {
            let (t, w) = gl[k];
            bary.push(rest * t);
            weight *= w * rest;
            rest *= 1.0 - t;
        }
        let mut x = pts[0].clone();
        for (c, l) in bary.iter().enumerate() {
            for d in 0..n {
                x[d] += l * (pts[c + 1][d] - pts[0][d]);
            }
        }
        total += weight * f(&x);
        let mut carry = true;
        for k in idx.iter_mut() {
            if carry {
                *k += 1;
                carry = *k == gl.len();
                if carry {
                    *k = 0;
                }
            }
        }
        if carry {
            break;
        }
    }
    total * jac
}

/// Gauss–Legendre on [0, 1] by Newton iteration on `P_n`.
pub fn gl_nodes(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for k in 1..=n {
        let mut x = (std::f64::consts::PI * (k as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for l in 2..=n {
                let p2 = ((2 * l - 1) as f64 * x * p1 - (l - 1) as f64 * p0) / l as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((0.5 * (1.0 - x), 1.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

pub fn piece_gradient(pts: &[Vec<f64>], vals: &[Vec<f64>], comp: usize) -> Vec<f64> {
    let n = pts.len() - 1;
    let e = DMatrix::from_fn(n, n, |r, c| pts[r + 1][c] - pts[0][c]);
    let d = DVector::from_fn(n, |r, _| vals[r + 1][comp] - vals[0][comp]);
    e.lu().solve(&d).unwrap().iter().copied().collect()
}
