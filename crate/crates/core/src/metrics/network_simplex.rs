//! Primal network simplex for the uncapacitated transshipment problem that arises
//! from the bounded-Lipschitz dual: atoms exchange mass along pair arcs or dump it
//! into a ground node.
//!
//! The tree is kept strongly feasible (every zero-flow tree arc points toward the
//! root) and the leaving arc is the last blocking arc along the pivot cycle, which
//! rules out cycling regardless of the entering rule.

use std::collections::HashSet;

use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

/// Reduced costs above this are treated as nonnegative.
const RC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArcKind {
    Ground,
    Pair,
}

pub(crate) struct NetworkSimplex {
    atoms: usize,
    root: u32,
    src: Vec<u32>,
    dst: Vec<u32>,
    kind: Vec<ArcKind>,
    dist: Vec<f64>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    parent: Vec<u32>,
    pred: Vec<u32>,
    depth: Vec<u32>,
    first_child: Vec<u32>,
    next_sib: Vec<u32>,
    prev_sib: Vec<u32>,
    pot: Vec<f64>,
    pairs: HashSet<u64>,
    cursor: usize,
    pub pivots: u64,
}

impl NetworkSimplex {
    /// `supply[i]` is the net mass leaving atom i; the ground node absorbs the balance.
    pub fn new(supply: &[f64]) -> Self {
        let m = supply.len();
        let nodes = m + 1;
        let root = m as u32;
        let mut ns = NetworkSimplex {
            atoms: m,
            root,
            src: Vec::with_capacity(2 * m),
            dst: Vec::with_capacity(2 * m),
            kind: Vec::with_capacity(2 * m),
            dist: Vec::with_capacity(2 * m),
            cost: Vec::with_capacity(2 * m),
            flow: Vec::with_capacity(2 * m),
            in_tree: Vec::with_capacity(2 * m),
            parent: vec![NONE; nodes],
            pred: vec![NONE; nodes],
            depth: vec![0; nodes],
            first_child: vec![NONE; nodes],
            next_sib: vec![NONE; nodes],
            prev_sib: vec![NONE; nodes],
            pot: vec![0.0; nodes],
            pairs: HashSet::new(),
            cursor: 0,
            pivots: 0,
        };
        for (i, &c) in supply.iter().enumerate() {
            let i = i as u32;
            ns.push_arc(i, root, ArcKind::Ground, 0.0);
            ns.push_arc(root, i, ArcKind::Ground, 0.0);
            // zero-supply atoms hang on an upward arc so the tree starts strongly feasible
            let (arc, f) = if c >= 0.0 { (2 * i, c) } else { (2 * i + 1, -c) };
            ns.flow[arc as usize] = f;
            ns.in_tree[arc as usize] = true;
            ns.pred[i as usize] = arc;
            ns.depth[i as usize] = 1;
            ns.add_child(root, i);
        }
        ns
    }

    fn push_arc(&mut self, u: u32, v: u32, kind: ArcKind, dist: f64) {
        self.src.push(u);
        self.dst.push(v);
        self.kind.push(kind);
        self.dist.push(dist);
        self.cost.push(0.0);
        self.flow.push(0.0);
        self.in_tree.push(false);
    }

    fn pair_key(&self, i: usize, j: usize) -> u64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        a as u64 * self.atoms as u64 + b as u64
    }

    pub fn has_pair(&self, i: usize, j: usize) -> bool {
        self.pairs.contains(&self.pair_key(i, j))
    }

    /// Add both directed arcs between atoms i and j with base length d.
    /// The cost is set from the current (s, ell) by the caller via `set_costs`.
    pub fn add_pair(&mut self, i: usize, j: usize, d: f64, ell: f64) -> bool {
        let key = self.pair_key(i, j);
        if !self.pairs.insert(key) {
            return false;
        }
        self.push_arc(i as u32, j as u32, ArcKind::Pair, d);
        *self.cost.last_mut().unwrap() = ell * d;
        self.push_arc(j as u32, i as u32, ArcKind::Pair, d);
        *self.cost.last_mut().unwrap() = ell * d;
        true
    }

    /// Ground arcs cost `s`, pair arcs cost `ell * d`.
    pub fn set_costs(&mut self, s: f64, ell: f64) {
        for a in 0..self.src.len() {
            self.cost[a] = match self.kind[a] {
                ArcKind::Ground => s,
                ArcKind::Pair => ell * self.dist[a],
            };
        }
        self.recompute_potentials();
    }

    fn recompute_potentials(&mut self) {
        let root = self.root;
        self.pot[root as usize] = 0.0;
        self.depth[root as usize] = 0;
        let mut stack = Vec::with_capacity(64);
        let mut c = self.first_child[root as usize];
        while c != NONE {
            stack.push(c);
            c = self.next_sib[c as usize];
        }
        while let Some(z) = stack.pop() {
            self.set_from_parent(z);
            let mut c = self.first_child[z as usize];
            while c != NONE {
                stack.push(c);
                c = self.next_sib[c as usize];
            }
        }
    }

    #[inline]
    fn set_from_parent(&mut self, z: u32) {
        let z = z as usize;
        let p = self.parent[z] as usize;
        let a = self.pred[z] as usize;
        self.pot[z] = if self.src[a] as usize == z {
            self.pot[p] - self.cost[a]
        } else {
            self.pot[p] + self.cost[a]
        };
        self.depth[z] = self.depth[p] + 1;
    }

    #[inline]
    fn reduced_cost(&self, a: usize) -> f64 {
        self.cost[a] + self.pot[self.src[a] as usize] - self.pot[self.dst[a] as usize]
    }

    /// Block pricing: scan blocks of arcs cyclically and return the most negative
    /// reduced cost found in the first block that contains a candidate.
    fn select_entering(&mut self) -> Option<usize> {
        let e = self.src.len();
        if e == 0 {
            return None;
        }
        let block = ((e as f64).sqrt() as usize).max(16);
        let mut best = None;
        let mut best_rc = -RC_TOL;
        let mut scanned = 0;
        let mut a = self.cursor % e;
        while scanned < e {
            let end = (scanned + block).min(e);
            while scanned < end {
                if !self.in_tree[a] {
                    let rc = self.reduced_cost(a);
                    if rc < best_rc {
                        best_rc = rc;
                        best = Some(a);
                    }
                }
                a += 1;
                if a == e {
                    a = 0;
                }
                scanned += 1;
            }
            if best.is_some() {
                self.cursor = a;
                return best;
            }
        }
        None
    }

    fn join(&self, mut a: u32, mut b: u32) -> u32 {
        while a != b {
            let (da, db) = (self.depth[a as usize], self.depth[b as usize]);
            if da > db {
                a = self.parent[a as usize];
            } else if db > da {
                b = self.parent[b as usize];
            } else {
                a = self.parent[a as usize];
                b = self.parent[b as usize];
            }
        }
        a
    }

    fn remove_child(&mut self, p: u32, c: u32) {
        let (prev, next) = (self.prev_sib[c as usize], self.next_sib[c as usize]);
        if prev != NONE {
            self.next_sib[prev as usize] = next;
        } else {
            self.first_child[p as usize] = next;
        }
        if next != NONE {
            self.prev_sib[next as usize] = prev;
        }
        self.prev_sib[c as usize] = NONE;
        self.next_sib[c as usize] = NONE;
    }

    fn add_child(&mut self, p: u32, c: u32) {
        let first = self.first_child[p as usize];
        self.next_sib[c as usize] = first;
        self.prev_sib[c as usize] = NONE;
        if first != NONE {
            self.prev_sib[first as usize] = c;
        }
        self.first_child[p as usize] = c;
        self.parent[c as usize] = p;
    }

    fn pivot(&mut self, e: usize) -> Result<()> {
        let u = self.src[e];
        let v = self.dst[e];
        let w = self.join(u, v);

        // Cycle orientation follows e: u -> v, then v up to w, then w down to u.
        let mut theta = f64::INFINITY;
        let mut z = v;
        while z != w {
            let a = self.pred[z as usize] as usize;
            if self.dst[a] == z {
                theta = theta.min(self.flow[a]);
            }
            z = self.parent[z as usize];
        }
        z = u;
        while z != w {
            let a = self.pred[z as usize] as usize;
            if self.src[a] == z {
                theta = theta.min(self.flow[a]);
            }
            z = self.parent[z as usize];
        }
        if !theta.is_finite() {
            return Err(Error::Lp("unbounded transshipment cycle".into()));
        }

        // last blocking arc along the orientation starting at the apex
        let mut leave = NONE;
        let mut on_v_side = false;
        z = v;
        while z != w {
            let a = self.pred[z as usize] as usize;
            if self.dst[a] == z && self.flow[a] == theta {
                leave = z;
                on_v_side = true;
            }
            z = self.parent[z as usize];
        }
        if leave == NONE {
            z = u;
            while z != w {
                let a = self.pred[z as usize] as usize;
                if self.src[a] == z && self.flow[a] == theta {
                    leave = z;
                    break;
                }
                z = self.parent[z as usize];
            }
        }
        debug_assert!(leave != NONE);

        if theta > 0.0 {
            z = v;
            while z != w {
                let a = self.pred[z as usize] as usize;
                if self.src[a] == z {
                    self.flow[a] += theta;
                } else {
                    self.flow[a] -= theta;
                }
                z = self.parent[z as usize];
            }
            z = u;
            while z != w {
                let a = self.pred[z as usize] as usize;
                if self.dst[a] == z {
                    self.flow[a] += theta;
                } else {
                    self.flow[a] -= theta;
                }
                z = self.parent[z as usize];
            }
        }
        self.flow[e] = theta;
        let leaving_arc = self.pred[leave as usize] as usize;
        self.flow[leaving_arc] = 0.0;
        self.in_tree[leaving_arc] = false;
        self.in_tree[e] = true;

        let rc = self.reduced_cost(e);
        let (q, p, delta) = if on_v_side { (v, u, rc) } else { (u, v, -rc) };

        // detach the subtree hanging below the leaving arc and re-hang it from p via e
        let y = leave;
        let x = self.parent[y as usize];
        self.remove_child(x, y);
        let mut prev_node = p;
        let mut prev_arc = e as u32;
        let mut z = q;
        loop {
            let next = self.parent[z as usize];
            let next_arc = self.pred[z as usize];
            if z != y {
                self.remove_child(next, z);
            }
            self.add_child(prev_node, z);
            self.pred[z as usize] = prev_arc;
            if z == y {
                break;
            }
            prev_node = z;
            prev_arc = next_arc;
            z = next;
        }

        let mut stack = vec![q];
        while let Some(z) = stack.pop() {
            let zi = z as usize;
            self.pot[zi] += delta;
            self.depth[zi] = self.depth[self.parent[zi] as usize] + 1;
            let mut c = self.first_child[zi];
            while c != NONE {
                stack.push(c);
                c = self.next_sib[c as usize];
            }
        }
        self.pivots += 1;
        Ok(())
    }

    /// Pivot until no arc has negative reduced cost.
    pub fn solve(&mut self) -> Result<()> {
        let cap = 50_000_000u64;
        let start = self.pivots;
        while let Some(e) = self.select_entering() {
            self.pivot(e)?;
            if self.pivots - start > cap {
                return Err(Error::Lp("pivot limit exceeded".into()));
            }
        }
        // refresh potentials to shed accumulated shifts
        self.recompute_potentials();
        Ok(())
    }

    /// Dual potentials φ_i = π_root - π_i; feasible for |φ| <= s and |φ_i - φ_j| <= ell d_ij
    /// on the arcs present.
    pub fn potentials(&self) -> Vec<f64> {
        let r = self.pot[self.root as usize];
        (0..self.atoms).map(|i| r - self.pot[i]).collect()
    }

    /// (A, D): mass routed through ground and distance-weighted pair flow.
    pub fn flow_summary(&self) -> (f64, f64) {
        let mut a = 0.0;
        let mut d = 0.0;
        for k in 0..self.src.len() {
            match self.kind[k] {
                ArcKind::Ground => a += self.flow[k],
                ArcKind::Pair => d += self.flow[k] * self.dist[k],
            }
        }
        (a, d)
    }
}
