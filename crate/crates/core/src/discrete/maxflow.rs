//! Maximum flow by highest-label push-relabel with the gap heuristic.
//!
//! Capacities are generic over [`Capacity`]: `f64` for the default solver
//! and `i64` for fixed-point runs. With floats every push either saturates
//! its arc or empties the excess exactly, so the usual termination argument
//! carries over; rounding dust left on a node with no residual arc is
//! discarded.

use std::collections::VecDeque;
use std::fmt::Debug;
use std::ops::{Add, Sub};

use crate::{Error, Result};

pub trait Capacity: Copy + PartialOrd + Debug + Add<Output = Self> + Sub<Output = Self> {
    const ZERO: Self;
    /// Capacity treated as unbounded.
    const INFINITY: Self;

    fn is_valid(self) -> bool;
}

impl Capacity for f64 {
    const ZERO: f64 = 0.0;
    const INFINITY: f64 = f64::INFINITY;

    fn is_valid(self) -> bool {
        self >= 0.0 && !self.is_nan()
    }
}

impl Capacity for i64 {
    const ZERO: i64 = 0;
    const INFINITY: i64 = i64::MAX / 4;

    fn is_valid(self) -> bool {
        (0..=Self::INFINITY).contains(&self)
    }
}

#[derive(Debug, Clone)]
pub struct FlowNetwork<C> {
    to: Vec<usize>,
    res: Vec<C>,
    adj: Vec<Vec<usize>>,
    finite_total: C,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxFlow<C> {
    pub value: C,
    /// Nodes reachable from the source in the residual graph (the smallest
    /// source side of a minimum cut).
    pub source_side: Vec<bool>,
    /// Nodes that can reach the sink in the residual graph (the smallest
    /// sink side of a minimum cut).
    pub sink_side: Vec<bool>,
}

impl<C: Capacity> FlowNetwork<C> {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            to: Vec::new(),
            res: Vec::new(),
            adj: vec![Vec::new(); nodes],
            finite_total: C::ZERO,
        }
    }

    pub fn nodes(&self) -> usize {
        self.adj.len()
    }

    /// Adds arc `u -> v` and returns its id.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: C) -> Result<usize> {
        let n = self.nodes();
        if u >= n || v >= n || u == v {
            return Err(Error::Argument(format!("bad arc {u} -> {v}")));
        }
        if !cap.is_valid() {
            return Err(Error::Numeric(format!("invalid capacity {cap:?}")));
        }
        if cap < C::INFINITY {
            let total = self.finite_total + cap;
            // both terms are below INFINITY = MAX/4 for i64, so this cannot wrap
            if !(total < C::INFINITY) {
                return Err(Error::Numeric("capacity total overflows".into()));
            }
            self.finite_total = total;
        }
        let id = self.to.len();
        self.to.push(v);
        self.res.push(cap);
        self.adj[u].push(id);
        self.to.push(u);
        self.res.push(C::ZERO);
        self.adj[v].push(id + 1);
        Ok(id)
    }

    /// Flow on arc `id` after [`FlowNetwork::max_flow`].
    pub fn flow(&self, id: usize) -> C {
        self.res[id ^ 1]
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.to.len()).step_by(2).map(|id| (id, self.to[id + 1], self.to[id]))
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> Result<MaxFlow<C>> {
        let n = self.nodes();
        if s >= n || t >= n || s == t {
            return Err(Error::Argument("source and sink must be distinct nodes".into()));
        }
        let mut height = self.distances_to(t, n);
        height[s] = n;
        let mut excess = vec![C::ZERO; n];
        let mut count = vec![0usize; 2 * n + 1];
        for &h in &height {
            count[h] += 1;
        }
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); 2 * n + 1];
        let mut top = 0usize;

        for k in 0..self.adj[s].len() {
            let e = self.adj[s][k];
            let c = self.res[e];
            if c > C::ZERO {
                if !(c < C::INFINITY) {
                    return Err(Error::Numeric("infinite arc out of the source".into()));
                }
                let v = self.to[e];
                self.res[e] = C::ZERO;
                self.res[e ^ 1] = self.res[e ^ 1] + c;
                if v != t && excess[v] == C::ZERO && height[v] < 2 * n {
                    buckets[height[v]].push(v);
                    top = top.max(height[v]);
                }
                excess[v] = excess[v] + c;
            }
        }

        let mut current = vec![0usize; n];
        loop {
            while top > 0 && buckets[top].is_empty() {
                top -= 1;
            }
            let Some(u) = buckets[top].pop() else { break };
            if height[u] != top {
                // lifted by a gap since it was queued
                if height[u] < 2 * n {
                    buckets[height[u]].push(u);
                    top = top.max(height[u]);
                }
                continue;
            }
            // discharge
            while excess[u] > C::ZERO {
                if current[u] == self.adj[u].len() {
                    let old = height[u];
                    let new = self.adj[u]
                        .iter()
                        .filter(|&&e| self.res[e] > C::ZERO)
                        .map(|&e| height[self.to[e]] + 1)
                        .min();
                    let Some(new) = new.filter(|&h| h < 2 * n) else {
                        excess[u] = C::ZERO;
                        break;
                    };
                    count[old] -= 1;
                    height[u] = new;
                    count[new] += 1;
                    current[u] = 0;
                    if old < n && count[old] == 0 {
                        for w in 0..n {
                            if height[w] > old && height[w] < n && w != s {
                                count[height[w]] -= 1;
                                height[w] = n + 1;
                                count[n + 1] += 1;
                                current[w] = 0;
                            }
                        }
                    }
                    continue;
                }
                let e = self.adj[u][current[u]];
                let v = self.to[e];
                if self.res[e] > C::ZERO && height[u] == height[v] + 1 {
                    let (delta, saturating) = if self.res[e] <= excess[u] {
                        (self.res[e], true)
                    } else {
                        (excess[u], false)
                    };
                    self.res[e] = if saturating { C::ZERO } else { self.res[e] - delta };
                    self.res[e ^ 1] = self.res[e ^ 1] + delta;
                    excess[u] = if saturating { excess[u] - delta } else { C::ZERO };
                    if v != s && v != t && excess[v] == C::ZERO {
                        buckets[height[v]].push(v);
                        top = top.max(height[v]);
                    }
                    excess[v] = excess[v] + delta;
                } else {
                    current[u] += 1;
                }
            }
        }

        let sink_side = self.reaches(t, true);
        let source_side = self.reaches(s, false);
        Ok(MaxFlow {
            value: excess[t],
            source_side,
            sink_side,
        })
    }

    /// Residual BFS distances to `t`; unreachable nodes get `n`.
    fn distances_to(&self, t: usize, n: usize) -> Vec<usize> {
        let mut dist = vec![n; n];
        dist[t] = 0;
        let mut queue = VecDeque::from([t]);
        while let Some(x) = queue.pop_front() {
            for &e in &self.adj[x] {
                let y = self.to[e];
                if dist[y] == n && self.res[e ^ 1] > C::ZERO {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// Nodes reachable from `root` along residual arcs, or with `backward`
    /// the nodes from which `root` is reachable.
    fn reaches(&self, root: usize, backward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.nodes()];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            for &e in &self.adj[x] {
                let y = self.to[e];
                let r = if backward { self.res[e ^ 1] } else { self.res[e] };
                if !seen[y] && r > C::ZERO {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen
    }
}

/// Shortest-augmenting-path max flow on a dense capacity matrix. Slow but
/// simple; used to cross-check [`FlowNetwork::max_flow`].
pub fn reference_max_flow(nodes: usize, arcs: &[(usize, usize, f64)], s: usize, t: usize) -> f64 {
    let mut cap = vec![vec![0.0f64; nodes]; nodes];
    for &(u, v, c) in arcs {
        cap[u][v] += c;
    }
    let mut total = 0.0;
    loop {
        let mut prev = vec![usize::MAX; nodes];
        prev[s] = s;
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for y in 0..nodes {
                if prev[y] == usize::MAX && cap[x][y] > 0.0 {
                    prev[y] = x;
                    queue.push_back(y);
                }
            }
        }
        if prev[t] == usize::MAX {
            return total;
        }
        let mut bottleneck = f64::INFINITY;
        let mut y = t;
        while y != s {
            bottleneck = bottleneck.min(cap[prev[y]][y]);
            y = prev[y];
        }
        let mut y = t;
        while y != s {
            let x = prev[y];
            cap[x][y] -= bottleneck;
            cap[y][x] += bottleneck;
            y = x;
        }
        total += bottleneck;
    }
}
