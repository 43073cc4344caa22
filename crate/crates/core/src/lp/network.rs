//! Primal network simplex for uncapacitated min-cost flow.
//!
//! Spanning-tree basis with an artificial root, strongly feasible leaving-arc
//! choice and block pricing. The basis survives cost changes, so successive
//! solves with new costs warm-start from the previous tree.

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Clone, Debug)]
pub struct NetworkSimplex {
    n: usize,
    m: usize,
    src: Vec<usize>,
    dst: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    supply: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    depth: Vec<u32>,
    children: Vec<Vec<usize>>,
    child_pos: Vec<usize>,
    pi: Vec<f64>,
    in_tree: Vec<bool>,
    next_arc: usize,
    pub pivots: usize,
}

impl NetworkSimplex {
    /// `supply[v] > 0` is a source; supplies must sum to zero.
    pub fn new(n_nodes: usize, arcs: &[(usize, usize)], supply: Vec<f64>) -> Result<Self> {
        if supply.len() != n_nodes {
            return Err(Error::InvalidInput("supply length mismatch".into()));
        }
        let total: f64 = supply.iter().sum();
        let scale: f64 = supply.iter().map(|s| s.abs()).sum::<f64>().max(1.0);
        if total.abs() > 1e-9 * scale {
            return Err(Error::InvalidInput(format!("unbalanced supplies (sum {total})")));
        }
        let m = arcs.len();
        let root = n_nodes;
        let mut src = Vec::with_capacity(m + n_nodes);
        let mut dst = Vec::with_capacity(m + n_nodes);
        for &(a, b) in arcs {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::InvalidInput("arc endpoint out of range".into()));
            }
            src.push(a);
            dst.push(b);
        }
        let mut flow = vec![0.0; m + n_nodes];
        let mut parent = vec![NONE; n_nodes + 1];
        let mut pred = vec![NONE; n_nodes + 1];
        let mut depth = vec![0u32; n_nodes + 1];
        let mut children = vec![Vec::new(); n_nodes + 1];
        let mut child_pos = vec![0usize; n_nodes + 1];
        for v in 0..n_nodes {
            let a = m + v;
            if supply[v] >= 0.0 {
                src.push(v);
                dst.push(root);
                flow[a] = supply[v];
            } else {
                src.push(root);
                dst.push(v);
                flow[a] = -supply[v];
            }
            parent[v] = root;
            pred[v] = a;
            depth[v] = 1;
            child_pos[v] = children[root].len();
            children[root].push(v);
        }
        let mut in_tree = vec![false; m + n_nodes];
        for t in in_tree.iter_mut().skip(m) {
            *t = true;
        }
        Ok(Self {
            n: n_nodes,
            m,
            src,
            dst,
            cost: vec![0.0; m + n_nodes],
            flow,
            supply,
            parent,
            pred,
            depth,
            children,
            child_pos,
            pi: vec![0.0; n_nodes + 1],
            in_tree,
            next_arc: 0,
            pivots: 0,
        })
    }

    pub fn flows(&self) -> &[f64] {
        &self.flow[..self.m]
    }

    /// Node potentials with the reduced cost `c + π_src − π_dst ≥ 0` at optimum.
    pub fn potentials(&self) -> &[f64] {
        &self.pi[..self.n]
    }

    pub fn total_cost(&self) -> f64 {
        (0..self.m).map(|a| self.cost[a] * self.flow[a]).sum()
    }

    fn reduced(&self, a: usize) -> f64 {
        self.cost[a] + self.pi[self.src[a]] - self.pi[self.dst[a]]
    }

    /// Recomputes potentials (and depths) by a walk from the root.
    fn refresh_potentials(&mut self, from: usize) {
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            let p = self.parent[v];
            if p != NONE {
                let a = self.pred[v];
                self.depth[v] = self.depth[p] + 1;
                self.pi[v] = if self.src[a] == v {
                    self.pi[p] - self.cost[a]
                } else {
                    self.pi[p] + self.cost[a]
                };
            }
            stack.extend_from_slice(&self.children[v]);
        }
    }

    fn detach(&mut self, v: usize) {
        let p = self.parent[v];
        let pos = self.child_pos[v];
        let list = &mut self.children[p];
        list.swap_remove(pos);
        if pos < list.len() {
            let moved = list[pos];
            self.child_pos[moved] = pos;
        }
    }

    fn attach(&mut self, v: usize, p: usize, arc: usize) {
        self.parent[v] = p;
        self.pred[v] = arc;
        self.child_pos[v] = self.children[p].len();
        self.children[p].push(v);
    }

    /// Solves for the given arc costs, starting from the current basis.
    pub fn solve(&mut self, costs: &[f64]) -> Result<f64> {
        if costs.len() != self.m {
            return Err(Error::InvalidInput("cost length mismatch".into()));
        }
        let cmax = costs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let big = 1.0 + (self.n as f64 + 1.0) * cmax.max(1.0);
        self.cost[..self.m].copy_from_slice(costs);
        for a in self.m..self.m + self.n {
            self.cost[a] = big;
        }
        let root = self.n;
        self.pi[root] = 0.0;
        self.refresh_potentials(root);
        let tol = 1e-12 * cmax.max(1e-300);
        let flow_scale = self.supply.iter().map(|s| s.abs()).sum::<f64>().max(1e-300);
        let flow_tol = 1e-14 * flow_scale;
        let total = self.m + self.n;
        let block = ((total as f64).sqrt() as usize).max(10);
        loop {
            // block pricing
            let mut best = NONE;
            let mut best_rc = -tol;
            let mut scanned = 0;
            let mut k = self.next_arc;
            while scanned < total {
                if !self.in_tree[k] {
                    let rc = self.reduced(k);
                    if rc < best_rc {
                        best_rc = rc;
                        best = k;
                    }
                }
                scanned += 1;
                k += 1;
                if k == total {
                    k = 0;
                }
                if best != NONE && scanned % block == 0 {
                    break;
                }
            }
            self.next_arc = k;
            if best == NONE {
                break;
            }
            self.pivot(best, flow_tol)?;
            self.pivots += 1;
        }
        let residual: f64 = (self.m..self.m + self.n).map(|a| self.flow[a]).sum();
        if residual > 1e-9 * flow_scale.max(1.0) {
            return Err(Error::Numerical(format!(
                "flow problem infeasible (artificial flow {residual})"
            )));
        }
        Ok(self.total_cost())
    }

    fn pivot(&mut self, e: usize, flow_tol: f64) -> Result<()> {
        let s = self.src[e];
        let t = self.dst[e];
        // join node
        let (mut a, mut b) = (s, t);
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a];
            } else {
                b = self.parent[b];
            }
        }
        let join = a;
        // flow goes join → … → s → t → … → join; arcs on the s-path pointing
        // up (child → parent) lose flow, arcs on the t-path pointing down lose
        let mut delta = f64::INFINITY;
        let mut leave_node = NONE;
        let mut leave_on_s_side = true;
        let mut v = s;
        while v != join {
            let a = self.pred[v];
            if self.src[a] == v && self.flow[a] < delta {
                delta = self.flow[a];
                leave_node = v;
            }
            v = self.parent[v];
        }
        let mut v = t;
        while v != join {
            let a = self.pred[v];
            if self.dst[a] == v && self.flow[a] <= delta {
                delta = self.flow[a];
                leave_node = v;
                leave_on_s_side = false;
            }
            v = self.parent[v];
        }
        if leave_node == NONE {
            return Err(Error::Numerical("negative-cost cycle of unbounded flow".into()));
        }
        if delta > 0.0 {
            self.flow[e] += delta;
            let mut v = s;
            while v != join {
                let a = self.pred[v];
                self.flow[a] += if self.src[a] == v { -delta } else { delta };
                if self.flow[a].abs() < flow_tol {
                    self.flow[a] = 0.0;
                }
                v = self.parent[v];
            }
            let mut v = t;
            while v != join {
                let a = self.pred[v];
                self.flow[a] += if self.dst[a] == v { -delta } else { delta };
                if self.flow[a].abs() < flow_tol {
                    self.flow[a] = 0.0;
                }
                v = self.parent[v];
            }
        }
        let leaving_arc = self.pred[leave_node];
        self.in_tree[leaving_arc] = false;
        self.in_tree[e] = true;
        // re-hang the subtree of leave_node below the far endpoint of e
        let (u_in, v_in) = if leave_on_s_side { (s, t) } else { (t, s) };
        let mut stem = vec![u_in];
        while *stem.last().unwrap() != leave_node {
            let x = *stem.last().unwrap();
            stem.push(self.parent[x]);
        }
        let old_pred: Vec<usize> = stem.iter().map(|&x| self.pred[x]).collect();
        for &x in &stem {
            self.detach(x);
        }
        self.attach(u_in, v_in, e);
        for k in 0..stem.len() - 1 {
            self.attach(stem[k + 1], stem[k], old_pred[k]);
        }
        self.refresh_potentials(u_in);
        Ok(())
    }
}
