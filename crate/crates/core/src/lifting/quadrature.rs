//! Grundmann–Möller rules on simplices and Gauss–Legendre on `[0, 1]`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Barycentric nodes with weights summing to one.
#[derive(Clone, Debug)]
pub struct SimplexRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Exact for polynomials of degree `2s + 1` on a `dim`-simplex.
pub fn grundmann_moller(dim: usize, s: usize) -> SimplexRule {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), SimplexRule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&(dim, s)) {
        return r.clone();
    }
    let rule = build_gm(dim, s);
    cache.lock().unwrap().insert((dim, s), rule.clone());
    rule
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

fn compositions(parts: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in 0..=total {
        prefix.push(first);
        compositions(parts - 1, total - first, prefix, out);
        prefix.pop();
    }
}

fn build_gm(dim: usize, s: usize) -> SimplexRule {
    let d = 2 * s + 1;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for i in 0..=s {
        let denom = (d + dim - 2 * i) as f64;
        let w = if i % 2 == 0 { 1.0 } else { -1.0 } * 2f64.powi(-(2 * s as i32)) * denom.powi(d as i32)
            / (factorial(i) * factorial(d + dim - i))
            * factorial(dim);
        let mut comps = Vec::new();
        compositions(dim + 1, s - i, &mut Vec::new(), &mut comps);
        for beta in comps {
            nodes.push(beta.iter().map(|&b| (2.0 * b as f64 + 1.0) / denom).collect());
            weights.push(w);
        }
    }
    SimplexRule { nodes, weights }
}

/// Eight-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_8() -> [(f64, f64); 8] {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    let mut out = [(0.0, 0.0); 8];
    for k in 0..4 {
        out[2 * k] = (0.5 - 0.5 * X[k], 0.5 * W[k]);
        out[2 * k + 1] = (0.5 + 0.5 * X[k], 0.5 * W[k]);
    }
    out
}
