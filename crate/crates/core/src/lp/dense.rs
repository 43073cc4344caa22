//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Maximises `c·x` over `x ≥ 0` subject to rows `a·x (≤ | ≥ | =) b`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, Default)]
pub struct DenseLp {
    n: usize,
    rows: Vec<(Vec<f64>, Sense, f64)>,
    objective: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

const TOL: f64 = 1e-11;
/// Smallest admissible pivot element.
const PIVOT_TOL: f64 = 1e-9;

impl DenseLp {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n: n_vars,
            rows: Vec::new(),
            objective: vec![0.0; n_vars],
        }
    }

    pub fn set_objective(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.n);
        self.objective = c;
    }

    /// Adds a constraint given as sparse `(variable, coefficient)` terms.
    pub fn add_row(&mut self, terms: &[(usize, f64)], sense: Sense, rhs: f64) {
        let mut a = vec![0.0; self.n];
        for &(k, v) in terms {
            a[k] += v;
        }
        self.rows.push((a, sense, rhs));
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let m = self.rows.len();
        let n = self.n;
        // normalise to b ≥ 0
        let rows: Vec<(Vec<f64>, Sense, f64)> = self
            .rows
            .iter()
            .map(|(a, s, b)| {
                if *b < 0.0 {
                    let flipped = match s {
                        Sense::Le => Sense::Ge,
                        Sense::Ge => Sense::Le,
                        Sense::Eq => Sense::Eq,
                    };
                    (a.iter().map(|v| -v).collect(), flipped, -b)
                } else {
                    (a.clone(), *s, *b)
                }
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
        let width = n + n_slack + n_art;
        let art0 = n + n_slack;
        let mut t = vec![vec![0.0; width + 1]; m];
        let mut basis = vec![0usize; m];
        let (mut sk, mut ak) = (n, art0);
        for (r, (a, s, b)) in rows.iter().enumerate() {
            t[r][..n].copy_from_slice(a);
            t[r][width] = *b;
            match s {
                Sense::Le => {
                    t[r][sk] = 1.0;
                    basis[r] = sk;
                    sk += 1;
                }
                Sense::Ge => {
                    t[r][sk] = -1.0;
                    sk += 1;
                    t[r][ak] = 1.0;
                    basis[r] = ak;
                    ak += 1;
                }
                Sense::Eq => {
                    t[r][ak] = 1.0;
                    basis[r] = ak;
                    ak += 1;
                }
            }
        }
        let original = t.clone();
        let mut pivots = 0;
        if n_art > 0 {
            // phase one: maximise −Σ artificials
            let mut cost = vec![0.0; width];
            for c in cost.iter_mut().skip(art0) {
                *c = -1.0;
            }
            run(&mut t, &mut basis, &cost, width, width, &mut pivots)?;
            let infeas: f64 = basis
                .iter()
                .enumerate()
                .filter(|(_, &v)| v >= art0)
                .map(|(r, _)| t[r][width])
                .sum();
            if infeas > 1e-9 {
                return Err(Error::Numerical(format!("LP infeasible (residual {infeas})")));
            }
            // drive remaining zero-level artificials out of the basis
            for r in 0..m {
                if basis[r] >= art0 {
                    if let Some(col) = (0..art0).find(|&c| t[r][c].abs() > PIVOT_TOL) {
                        pivot(&mut t, &mut basis, r, col);
                        pivots += 1;
                    }
                }
            }
        }
        let mut cost = vec![0.0; width];
        cost[..n].copy_from_slice(&self.objective);
        run(&mut t, &mut basis, &cost, width, art0, &mut pivots)?;
        let basic = refine(&original, &basis, width).unwrap_or_else(|| t.iter().map(|row| row[width]).collect());
        let mut x = vec![0.0; n];
        for (r, &v) in basis.iter().enumerate() {
            if v < n {
                x[v] = basic[r].max(0.0);
            }
        }
        let value = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { value, x, pivots })
    }
}

/// Re-solves `B x_B = b` from the original rows by Gaussian elimination with
/// partial pivoting, discarding the round-off accumulated in the tableau.
fn refine(original: &[Vec<f64>], basis: &[usize], width: usize) -> Option<Vec<f64>> {
    let m = original.len();
    let mut a: Vec<Vec<f64>> = original
        .iter()
        .map(|row| {
            let mut r: Vec<f64> = basis.iter().map(|&c| row[c]).collect();
            r.push(row[width]);
            r
        })
        .collect();
    for col in 0..m {
        let piv = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let mut v = a[r][m];
        for c in r + 1..m {
            v -= a[r][c] * x[c];
        }
        x[r] = v / a[r][r];
    }
    Some(x)
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, col: usize) {
    let p = t[r][col];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let prow = t[r].clone();
    for (k, row) in t.iter_mut().enumerate() {
        if k == r {
            continue;
        }
        let f = row[col];
        if f != 0.0 {
            for (v, pv) in row.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            row[col] = 0.0;
        }
    }
    basis[r] = col;
}

/// Primal simplex on columns `< allowed`, Bland's rule for entering and leaving.
fn run(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    width: usize,
    allowed: usize,
    pivots: &mut usize,
) -> Result<()> {
    let m = t.len();
    let cap = 50_000 + 200 * (m + width);
    loop {
        // reduced cost d_j = c_j − c_B B⁻¹ a_j
        let mut entering = None;
        for col in 0..allowed {
            if basis.contains(&col) {
                continue;
            }
            let mut d = cost[col];
            for r in 0..m {
                d -= cost[basis[r]] * t[r][col];
            }
            if d > TOL {
                entering = Some(col);
                break;
            }
        }
        let Some(col) = entering else {
            return Ok(());
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let a = t[r][col];
            if a > PIVOT_TOL {
                let ratio = t[r][width].max(0.0) / a;
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => {
                        let tie = 1e-12 * (1.0 + lratio.abs());
                        ratio < lratio - tie || (ratio <= lratio + tie && basis[r] < basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((r, _)) = leave else {
            return Err(Error::Numerical("LP unbounded".into()));
        };
        pivot(t, basis, r, col);
        *pivots += 1;
        if *pivots > cap {
            return Err(Error::Numerical("simplex pivot cap exceeded".into()));
        }
    }
}
