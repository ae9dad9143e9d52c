//! The discretized Bethe minimization as a multi-label MAP problem.
//!
//! Each variable takes one of its mesh points; unary tables hold the
//! singleton terms of `F` and pairwise tables the edge terms, so the cost of
//! a labeling is exactly `F` at the corresponding point.

pub mod graphcut;
pub mod maxflow;

pub use graphcut::solve_graphcut;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::sigmoid;
use crate::energy::{pairwise_f, unary_f};
use crate::mesh::Mesh;
use crate::model::Model;
use crate::{Error, Result};

/// Slack allowed in the submodularity test of 2×2 minors.
pub const SUBMODULAR_SLACK: f64 = 1e-12;
/// Default cap on the number of states enumerated by brute force.
pub const BRUTE_FORCE_CAP: f64 = 1e6;
/// Cap on the total number of table entries materialized.
pub const MAX_TABLE_ENTRIES: u64 = 200_000_000;

/// Dense row-major cost table of one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Table {
        let mut data = Vec::with_capacity(rows * cols);
        for a in 0..rows {
            for b in 0..cols {
                data.push(f(a, b));
            }
        }
        Table { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.cols + b]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.data[a * self.cols..(a + 1) * self.cols]
    }

    /// Every adjacent 2×2 minor satisfies
    /// `t[a][b] + t[a+1][b+1] ≤ t[a][b+1] + t[a+1][b] + slack`.
    pub fn is_submodular(&self, slack: f64) -> bool {
        for a in 0..self.rows.saturating_sub(1) {
            for b in 0..self.cols.saturating_sub(1) {
                let lhs = self.get(a, b) + self.get(a + 1, b + 1);
                let rhs = self.get(a, b + 1) + self.get(a + 1, b);
                if lhs > rhs + slack {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProblem {
    /// Mesh points per variable.
    pub points: Vec<Vec<f64>>,
    pub unary: Vec<Vec<f64>>,
    /// Edge endpoints with `i < j`, in model edge order.
    pub edges: Vec<(usize, usize)>,
    /// Table indexed by `[label of i][label of j]`.
    pub pairwise: Vec<Table>,
    /// Per variable, the label nearest `σ(θ_i)`.
    pub default_start: Vec<usize>,
    adjacency: Vec<Vec<(usize, bool)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    pub labels: Vec<usize>,
    pub cost: f64,
    pub certified_optimal: bool,
}

impl DiscreteProblem {
    /// Assembles a problem from explicit tables.
    pub fn new(
        points: Vec<Vec<f64>>,
        unary: Vec<Vec<f64>>,
        edges: Vec<(usize, usize)>,
        pairwise: Vec<Table>,
    ) -> Result<DiscreteProblem> {
        let n = unary.len();
        if points.len() != n || edges.len() != pairwise.len() {
            return Err(Error::Argument("table counts do not match".into()));
        }
        for i in 0..n {
            if unary[i].is_empty() || unary[i].len() != points[i].len() {
                return Err(Error::Argument(format!("unary table {i} has the wrong size")));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (e, (&(i, j), t)) in edges.iter().zip(&pairwise).enumerate() {
            if i >= n || j >= n || i == j {
                return Err(Error::Argument(format!("bad edge ({i}, {j})")));
            }
            if t.rows != unary[i].len() || t.cols != unary[j].len() {
                return Err(Error::Argument(format!("pairwise table {e} has the wrong size")));
            }
            adjacency[i].push((e, true));
            adjacency[j].push((e, false));
        }
        Ok(DiscreteProblem {
            points,
            unary,
            edges,
            pairwise,
            default_start: vec![0; n],
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.unary.len()
    }

    pub fn num_labels(&self, i: usize) -> usize {
        self.unary[i].len()
    }

    /// `ln Π`.
    pub fn log_states(&self) -> f64 {
        self.unary.iter().map(|u| (u.len() as f64).ln()).sum()
    }

    /// Edge indices incident to `i`, each flagged true when `i` is the
    /// row variable of the table.
    pub fn incident(&self, i: usize) -> &[(usize, bool)] {
        &self.adjacency[i]
    }

    /// Total cost; edges are summed before variables.
    pub fn cost(&self, labels: &[usize]) -> f64 {
        let mut total = 0.0;
        for (&(i, j), t) in self.edges.iter().zip(&self.pairwise) {
            total += t.get(labels[i], labels[j]);
        }
        for (u, &a) in self.unary.iter().zip(labels) {
            total += u[a];
        }
        total
    }

    pub fn q_of(&self, labels: &[usize]) -> Vec<f64> {
        labels.iter().enumerate().map(|(i, &a)| self.points[i][a]).collect()
    }

    fn check_labels(&self, labels: &[usize]) -> Result<()> {
        if labels.len() != self.n() || labels.iter().enumerate().any(|(i, &a)| a >= self.num_labels(i)) {
            return Err(Error::Argument("labeling does not fit the problem".into()));
        }
        Ok(())
    }

    /// Cost of variable `i` taking `a` with all other labels fixed,
    /// excluding terms not involving `i`.
    fn local_cost(&self, labels: &[usize], i: usize, a: usize) -> f64 {
        let mut c = self.unary[i][a];
        for &(e, is_row) in &self.adjacency[i] {
            let (u, v) = self.edges[e];
            c += if is_row {
                self.pairwise[e].get(a, labels[v])
            } else {
                self.pairwise[e].get(labels[u], a)
            };
        }
        c
    }

    /// Line-based dump: a header `n m`, one line `u i N_i c_0 … c_{N_i-1}`
    /// per variable, then for each edge a line `p i j N_i N_j` followed by
    /// `N_i` rows of `N_j` costs.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n(), self.edges.len());
        for (i, u) in self.unary.iter().enumerate() {
            let _ = write!(out, "u {i} {}", u.len());
            for c in u {
                let _ = write!(out, " {c:?}");
            }
            out.push('\n');
        }
        for (&(i, j), t) in self.edges.iter().zip(&self.pairwise) {
            let _ = writeln!(out, "p {i} {j} {} {}", t.rows, t.cols);
            for a in 0..t.rows {
                let row: Vec<String> = t.row(a).iter().map(|c| format!("{c:?}")).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }
}

/// Tables of `F` restricted to the mesh.
pub fn build_cost_tables(m: &Model, mesh: &Mesh) -> Result<DiscreteProblem> {
    if mesh.axes.len() != m.n() {
        return Err(Error::Argument(format!(
            "mesh has {} axes, model has {} variables",
            mesh.axes.len(),
            m.n()
        )));
    }
    let sizes: Vec<u64> = mesh.axes.iter().map(|a| a.len()).collect();
    let entries = m.edges().iter().fold(mesh.total_points(), |acc, e| {
        acc.saturating_add(sizes[e.i].saturating_mul(sizes[e.j]))
    });
    if entries > MAX_TABLE_ENTRIES {
        return Err(Error::TooLarge {
            what: "cost tables",
            size: entries as f64,
            cap: MAX_TABLE_ENTRIES as f64,
        });
    }
    let points = mesh.points(MAX_TABLE_ENTRIES)?;
    let unary: Vec<Vec<f64>> = (0..m.n())
        .map(|i| {
            points[i]
                .iter()
                .map(|&q| unary_f(m.theta()[i], m.degree(i), q))
                .collect()
        })
        .collect();
    let mut pairwise = Vec::with_capacity(m.edges().len());
    for e in m.edges() {
        let (pi, pj) = (&points[e.i], &points[e.j]);
        let mut err = None;
        let t = Table::from_fn(pi.len(), pj.len(), |a, b| {
            pairwise_f(pi[a], pj[b], e.w).unwrap_or_else(|x| {
                err.get_or_insert(x);
                f64::NAN
            })
        });
        if let Some(x) = err {
            return Err(x);
        }
        pairwise.push(t);
    }
    let edges = m.edges().iter().map(|e| (e.i, e.j)).collect();
    let default_start = (0..m.n())
        .map(|i| nearest_index(&points[i], sigmoid(m.theta()[i])))
        .collect();
    let mut p = DiscreteProblem::new(points, unary, edges, pairwise)?;
    p.default_start = default_start;
    Ok(p)
}

/// Index of the point closest to `x`, the smallest on ties.
pub fn nearest_index(points: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (k, p) in points.iter().enumerate() {
        if (p - x).abs() < (points[best] - x).abs() {
            best = k;
        }
    }
    best
}

pub fn is_submodular(p: &DiscreteProblem) -> Vec<bool> {
    p.pairwise.iter().map(|t| t.is_submodular(SUBMODULAR_SLACK)).collect()
}

/// Variables whose label order can be reversed so that every pairwise table
/// becomes submodular, if such a set exists. An edge whose table is
/// supermodular needs exactly one reversed endpoint; a submodular edge needs
/// zero or two.
pub fn submodular_orientation(p: &DiscreteProblem) -> Option<Vec<bool>> {
    let n = p.n();
    // per edge: None if any parity works, Some(true) if the endpoints must differ
    let parity: Vec<Option<bool>> = p
        .pairwise
        .iter()
        .map(|t| {
            let sub = t.is_submodular(SUBMODULAR_SLACK);
            let sup = reversed_cols(t).is_submodular(SUBMODULAR_SLACK);
            match (sub, sup) {
                (true, true) => Some(None),
                (true, false) => Some(Some(false)),
                (false, true) => Some(Some(true)),
                (false, false) => None,
            }
        })
        .collect::<Option<_>>()?;
    let mut color: Vec<Option<bool>> = vec![None; n];
    for root in 0..n {
        if color[root].is_some() {
            continue;
        }
        color[root] = Some(false);
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            let cv = color[v].expect("colored before push");
            for &(e, _) in p.incident(v) {
                let Some(differ) = parity[e] else { continue };
                let (i, j) = p.edges[e];
                let u = if i == v { j } else { i };
                let want = cv ^ differ;
                match color[u] {
                    None => {
                        color[u] = Some(want);
                        stack.push(u);
                    }
                    Some(c) if c != want => return None,
                    Some(_) => {}
                }
            }
        }
    }
    Some(color.into_iter().map(|c| c.unwrap_or(false)).collect())
}

fn reversed_cols(t: &Table) -> Table {
    Table::from_fn(t.rows, t.cols, |a, b| t.get(a, t.cols - 1 - b))
}

/// The same problem with the label order of the marked variables reversed.
/// Label `k` of a reversed variable `i` becomes `K_i - 1 - k`.
pub fn reverse_labels(p: &DiscreteProblem, reversed: &[bool]) -> DiscreteProblem {
    let flip = |i: usize, k: usize| if reversed[i] { p.num_labels(i) - 1 - k } else { k };
    let rev = |i: usize, v: &Vec<f64>| {
        let mut v = v.clone();
        if reversed[i] {
            v.reverse();
        }
        v
    };
    let points = p.points.iter().enumerate().map(|(i, v)| rev(i, v)).collect();
    let unary = p.unary.iter().enumerate().map(|(i, v)| rev(i, v)).collect();
    let pairwise = p
        .edges
        .iter()
        .zip(&p.pairwise)
        .map(|(&(i, j), t)| Table::from_fn(t.rows, t.cols, |a, b| t.get(flip(i, a), flip(j, b))))
        .collect();
    let mut out = DiscreteProblem::new(points, unary, p.edges.clone(), pairwise).expect("same shape as the input");
    out.default_start = p.default_start.iter().enumerate().map(|(i, &k)| flip(i, k)).collect();
    out
}

/// Maps labels of [`reverse_labels`] back to the original order (the map is
/// an involution).
pub fn unreverse(p: &DiscreteProblem, reversed: &[bool], labels: &[usize]) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &k)| if reversed[i] { p.num_labels(i) - 1 - k } else { k })
        .collect()
}

/// Exhaustive minimization; the lexicographically smallest labeling wins ties.
pub fn solve_bruteforce(p: &DiscreteProblem, cap: f64) -> Result<Labeling> {
    let states = p.log_states().exp();
    if p.log_states() > cap.ln() + 1e-9 {
        return Err(Error::TooLarge {
            what: "brute-force state space",
            size: states,
            cap,
        });
    }
    let n = p.n();
    let mut labels = vec![0usize; n];
    let mut best = labels.clone();
    let mut best_cost = p.cost(&labels);
    loop {
        // odometer with the last variable fastest gives lexicographic order
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(Labeling {
                    labels: best,
                    cost: best_cost,
                    certified_optimal: true,
                });
            }
            k -= 1;
            labels[k] += 1;
            if labels[k] < p.num_labels(k) {
                break;
            }
            labels[k] = 0;
        }
        let c = p.cost(&labels);
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&labels);
        }
    }
}

/// Iterated conditional modes from `restarts` starting points: the given
/// start (or the problem's default start) first, then uniformly random
/// labelings drawn from a generator seeded with `seed`.
pub fn solve_localsearch(
    p: &DiscreteProblem,
    restarts: usize,
    seed: u64,
    start: Option<&[usize]>,
) -> Result<Labeling> {
    let first = start.unwrap_or(&p.default_start).to_vec();
    p.check_labels(&first)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Labeling> = None;
    for r in 0..restarts.max(1) {
        let mut labels = if r == 0 {
            first.clone()
        } else {
            (0..p.n()).map(|i| rng.random_range(0..p.num_labels(i))).collect()
        };
        icm(p, &mut labels);
        let cost = p.cost(&labels);
        let better = match &best {
            None => true,
            Some(b) => cost < b.cost || (cost == b.cost && labels < b.labels),
        };
        if better {
            best = Some(Labeling {
                labels,
                cost,
                certified_optimal: false,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

fn icm(p: &DiscreteProblem, labels: &mut [usize]) {
    loop {
        let mut changed = false;
        for i in 0..p.n() {
            let current = p.local_cost(labels, i, labels[i]);
            let mut best = (current, labels[i]);
            for a in 0..p.num_labels(i) {
                let c = p.local_cost(labels, i, a);
                if c < best.0 {
                    best = (c, a);
                }
            }
            if best.1 != labels[i] {
                labels[i] = best.1;
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{bbp_refine, sigmoid_bounds, RangeMode, BBP_MAX_ITERS, BBP_TOL};
    use crate::energy::free_energy;
    use crate::mesh::{build, build_simple, Axis, MeshMethod};
    use crate::model::{reparameterize, Edge};
    use crate::InputModel;

    fn grid_mesh(axes: Vec<Vec<f64>>) -> Mesh {
        Mesh {
            method: MeshMethod::Simple,
            epsilon: 1.0,
            axes: axes.into_iter().map(Axis::Points).collect(),
        }
    }

    fn triangle(w: f64) -> Model {
        reparameterize(
            &InputModel::new(3, vec![0.3, -0.2, 0.1], vec![(0, 1, w), (1, 2, w), (0, 2, 0.5 * w)]).unwrap(),
        )
    }

    #[test]
    fn pairwise_entries_are_direct_evaluations() {
        let m = Model::new(vec![-1.0, -1.0], vec![Edge { i: 0, j: 1, w: 2.0 }], 1.0).unwrap();
        let p = build_cost_tables(&m, &grid_mesh(vec![vec![0.3, 0.6], vec![0.4, 0.7]])).unwrap();
        for (a, qi) in [0.3, 0.6].into_iter().enumerate() {
            for (b, qj) in [0.4, 0.7].into_iter().enumerate() {
                assert_eq!(p.pairwise[0].get(a, b), pairwise_f(qi, qj, 2.0).unwrap());
            }
        }
    }

    #[test]
    fn labeling_cost_equals_free_energy() {
        let m = triangle(-1.5);
        let b = sigmoid_bounds(&m);
        let mesh = build_simple(&m, &b, 0.5, RangeMode::Refined).unwrap();
        let p = build_cost_tables(&m, &mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let l: Vec<usize> = (0..3).map(|i| rng.random_range(0..p.num_labels(i))).collect();
            let f = free_energy(&m, &p.q_of(&l));
            assert!((p.cost(&l) - f).abs() <= 1e-9 * (1.0 + f.abs()));
        }
    }

    #[test]
    fn attractive_tables_are_submodular() {
        let m = triangle(2.0);
        let b = bbp_refine(&m, &sigmoid_bounds(&m), BBP_MAX_ITERS, BBP_TOL);
        let p = build_cost_tables(&m, &build(MeshMethod::Simple, &m, &b, 0.05).unwrap()).unwrap();
        assert!(is_submodular(&p).into_iter().all(|s| s));
    }

    #[test]
    fn repulsive_table_is_not_submodular() {
        let m = Model::new(vec![1.5, 1.5], vec![Edge { i: 0, j: 1, w: -3.0 }], 0.0).unwrap();
        let b = sigmoid_bounds(&m);
        let p = build_cost_tables(&m, &build_simple(&m, &b, 0.2, RangeMode::Refined).unwrap()).unwrap();
        assert!(p.num_labels(0) >= 3);
        assert_eq!(is_submodular(&p), vec![false]);
    }

    #[test]
    fn single_point_dimension_is_submodular() {
        let t = Table::from_fn(1, 5, |_, b| (b * b) as f64);
        assert!(t.is_submodular(0.0));
    }

    #[test]
    fn brute_force_ties_and_trivial_cases() {
        let flat = DiscreteProblem::new(
            vec![vec![0.0; 3], vec![0.0; 2]],
            vec![vec![1.0; 3], vec![1.0; 2]],
            vec![(0, 1)],
            vec![Table::from_fn(3, 2, |_, _| 0.5)],
        )
        .unwrap();
        assert_eq!(solve_bruteforce(&flat, 1e6).unwrap().labels, vec![0, 0]);
        let single = DiscreteProblem::new(vec![vec![0.5]], vec![vec![2.0]], vec![], vec![]).unwrap();
        let l = solve_bruteforce(&single, 1.0).unwrap();
        assert_eq!((l.labels, l.cost, l.certified_optimal), (vec![0], 2.0, true));
        assert!(solve_bruteforce(&flat, 5.0).is_err());
    }

    #[test]
    fn local_search_is_deterministic_and_bounded() {
        let m = triangle(-2.5);
        let b = sigmoid_bounds(&m);
        let p = build_cost_tables(&m, &build_simple(&m, &b, 0.3, RangeMode::Refined).unwrap()).unwrap();
        let exact = solve_bruteforce(&p, 1e6).unwrap();
        let x = solve_localsearch(&p, 5, 11, None).unwrap();
        let y = solve_localsearch(&p, 5, 11, None).unwrap();
        assert_eq!(x, y);
        assert!(!x.certified_optimal);
        assert!(x.cost >= exact.cost);
        assert!(solve_localsearch(&p, 1, 0, Some(&[0])).is_err());
    }

    #[test]
    fn local_search_usually_finds_optimum() {
        let m = triangle(-2.0);
        let b = sigmoid_bounds(&m);
        let p = build_cost_tables(&m, &build_simple(&m, &b, 0.2, RangeMode::Refined).unwrap()).unwrap();
        let exact = solve_bruteforce(&p, 1e6).unwrap();
        let hits = (0..100)
            .filter(|&s| solve_localsearch(&p, 5, s, None).unwrap().cost <= exact.cost + 1e-12)
            .count();
        assert!(hits >= 90, "{hits}/100");
    }

    #[test]
    fn dump_layout() {
        let p = DiscreteProblem::new(
            vec![vec![0.1, 0.2], vec![0.3]],
            vec![vec![1.0, 2.0], vec![3.0]],
            vec![(0, 1)],
            vec![Table::from_fn(2, 1, |a, _| a as f64)],
        )
        .unwrap();
        assert_eq!(p.dump(), "2 1\nu 0 2 1.0 2.0\nu 1 1 3.0\np 0 1 2 1\n0.0\n1.0\n");
    }

    #[test]
    fn balanced_signs_orient_to_submodular() {
        // path 0 -(-)- 1 -(+)- 2 -(-)- 3
        let input =
            InputModel::new(4, vec![0.5, -0.5, 0.2, 0.0], vec![(0, 1, -2.0), (1, 2, 1.5), (2, 3, -1.0)]).unwrap();
        let m = reparameterize(&input);
        let b = bbp_refine(&m, &sigmoid_bounds(&m), BBP_MAX_ITERS, BBP_TOL);
        let p = build_cost_tables(&m, &build(MeshMethod::Minsum, &m, &b, 0.3).unwrap()).unwrap();
        assert!(is_submodular(&p).iter().any(|s| !s));
        let r = submodular_orientation(&p).unwrap();
        assert!(r[0] != r[1] && r[1] == r[2] && r[2] != r[3]);
        let q = reverse_labels(&p, &r);
        assert!(is_submodular(&q).iter().all(|&s| s));
        let bf = solve_bruteforce(&p, 1e7).unwrap();
        let g = crate::discrete::solve_graphcut(&q).unwrap();
        let labels = unreverse(&p, &r, &g.labels);
        assert!((p.cost(&labels) - bf.cost).abs() < 1e-9);
        assert_eq!(reverse_labels(&q, &r).pairwise, p.pairwise);
    }

    #[test]
    fn frustrated_cycle_has_no_orientation() {
        let m = triangle(-2.0);
        let b = sigmoid_bounds(&m);
        let p = build_cost_tables(&m, &build_simple(&m, &b, 0.2, RangeMode::Refined).unwrap()).unwrap();
        assert_eq!(submodular_orientation(&p), None);
    }
}
