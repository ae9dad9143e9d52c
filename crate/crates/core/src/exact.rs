//! Exact and reference computations used to validate the approximation.
//!
//! * [`enumerate`]: all `2^n` states, streamed in Gray-code order;
//! * [`eliminate`]: variable elimination in log space under a min-fill order;
//! * [`dense_grid_min`] / [`grid_min`]: `F` minimized over a fine grid (n ≤ 3);
//! * [`lbp_fixed_points`]: damped loopy BP from random starts;
//! * [`descent_minima`]: damped Newton descent on `F` from random starts.
//!
//! Log partition functions are reported in the input convention.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{sigmoid, Bounds};
use crate::energy::{free_energy, gradient, hessian, pairwise_f, unary_f};
use crate::model::Model;
use crate::{Error, Result};

pub const ENUMERATE_MAX_N: usize = 25;
pub const DEFAULT_WIDTH_CAP: usize = 20;
pub const GRID_MIN_STEP: f64 = 1e-3;
pub const LBP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub log_z: f64,
    /// `p(X_i = 1)`.
    pub marginals: Vec<f64>,
}

/// Exact `log Z` and marginals by enumeration, for `n ≤ 25`.
pub fn enumerate(m: &Model) -> Result<ExactResult> {
    let n = m.n();
    if n > ENUMERATE_MAX_N {
        return Err(Error::TooLarge {
            what: "enumeration variables",
            size: n as f64,
            cap: ENUMERATE_MAX_N as f64,
        });
    }
    let mut top = f64::NEG_INFINITY;
    gray_walk(m, |_, v| top = top.max(v));
    let mut total = 0.0;
    let mut ones = vec![0.0; n];
    gray_walk(m, |x, v| {
        let p = (v - top).exp();
        total += p;
        for (acc, &b) in ones.iter_mut().zip(x) {
            if b {
                *acc += p;
            }
        }
    });
    Ok(ExactResult {
        log_z: top + total.ln() - m.energy_offset(),
        marginals: ones.into_iter().map(|o| o / total).collect(),
    })
}

/// Visits every state with `-E(x)`. Each step flips one variable and
/// updates the energy incrementally; a periodic full recomputation keeps
/// rounding drift bounded.
fn gray_walk(m: &Model, mut visit: impl FnMut(&[bool], f64)) {
    let n = m.n();
    let mut x = vec![false; n];
    let mut neg_e = 0.0;
    visit(&x, neg_e);
    for k in 1..(1u64 << n) {
        let i = k.trailing_zeros() as usize;
        let mut h = m.theta()[i];
        for &(j, e) in m.neighbors(i) {
            if x[j] {
                h += m.edges()[e].w;
            }
        }
        neg_e += if x[i] { -h } else { h };
        x[i] = !x[i];
        if k % 4096 == 0 {
            neg_e = -m.energy(&x);
        }
        visit(&x, neg_e);
    }
}

/// Log-space factor over binary variables; bit `k` of a table index is the
/// value of `vars[k]`.
#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    table: Vec<f64>,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        hi
    } else {
        hi + ((a - hi).exp() + (b - hi).exp()).ln()
    }
}

impl Factor {
    fn product_sum_out(factors: &[Factor], v: usize) -> Factor {
        let mut vars: Vec<usize> = factors.iter().flat_map(|f| f.vars.iter().copied()).collect();
        vars.sort_unstable();
        vars.dedup();
        let pos = vars.binary_search(&v).expect("eliminated variable in scope");
        // bit positions of each factor's variables within `vars`
        let maps: Vec<Vec<usize>> = factors
            .iter()
            .map(|f| f.vars.iter().map(|u| vars.binary_search(u).unwrap()).collect())
            .collect();
        let out_vars: Vec<usize> = vars.iter().copied().filter(|&u| u != v).collect();
        let mut out = vec![f64::NEG_INFINITY; 1 << out_vars.len()];
        for idx in 0..(1usize << vars.len()) {
            let mut s = 0.0;
            for (f, map) in factors.iter().zip(&maps) {
                let mut k = 0;
                for (bit, &p) in map.iter().enumerate() {
                    k |= (idx >> p & 1) << bit;
                }
                s += f.table[k];
            }
            let low = idx & ((1 << pos) - 1);
            let o = low | ((idx >> (pos + 1)) << pos);
            out[o] = log_sum_exp(out[o], s);
        }
        Factor {
            vars: out_vars,
            table: out,
        }
    }
}

/// Min-fill elimination order (ties to the smallest index) and its induced
/// width.
pub fn elimination_order(m: &Model) -> (Vec<usize>, usize) {
    let n = m.n();
    let mut adj: Vec<std::collections::BTreeSet<usize>> = (0..n)
        .map(|i| m.neighbors(i).iter().map(|&(j, _)| j).collect())
        .collect();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut width = 0;
    for _ in 0..n {
        let mut best = (usize::MAX, usize::MAX);
        for v in (0..n).filter(|&v| !done[v]) {
            let nb: Vec<usize> = adj[v].iter().copied().collect();
            let mut fill = 0;
            for (a, &x) in nb.iter().enumerate() {
                for &y in &nb[a + 1..] {
                    if !adj[x].contains(&y) {
                        fill += 1;
                    }
                }
            }
            if fill < best.0 {
                best = (fill, v);
            }
        }
        let v = best.1;
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        width = width.max(nb.len());
        for &x in &nb {
            adj[x].remove(&v);
            for &y in &nb {
                if x != y {
                    adj[x].insert(y);
                }
            }
        }
        done[v] = true;
        order.push(v);
    }
    (order, width)
}

fn eliminate_log_z(m: &Model, order: &[usize], clamp: Option<usize>) -> f64 {
    let mut factors: Vec<Factor> = Vec::with_capacity(m.n() + m.edges().len());
    for (i, &t) in m.theta().iter().enumerate() {
        let zero = if clamp == Some(i) { f64::NEG_INFINITY } else { 0.0 };
        factors.push(Factor {
            vars: vec![i],
            table: vec![zero, t],
        });
    }
    for e in m.edges() {
        factors.push(Factor {
            vars: vec![e.i, e.j],
            table: vec![0.0, 0.0, 0.0, e.w],
        });
    }
    let mut constant = 0.0;
    for &v in order {
        let (with, without): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = without;
        let f = Factor::product_sum_out(&with, v);
        if f.vars.is_empty() {
            constant += f.table[0];
        } else {
            factors.push(f);
        }
    }
    constant - m.energy_offset()
}

/// Exact `log Z` and marginals by variable elimination. Marginals come from
/// one extra run per variable with `X_i = 1` clamped.
pub fn eliminate(m: &Model, width_cap: usize) -> Result<ExactResult> {
    let (order, width) = elimination_order(m);
    if width > width_cap {
        return Err(Error::WidthExceeded { width, cap: width_cap });
    }
    let log_z = eliminate_log_z(m, &order, None);
    let marginals = (0..m.n())
        .map(|i| (eliminate_log_z(m, &order, Some(i)) - log_z).exp().clamp(0.0, 1.0))
        .collect();
    Ok(ExactResult { log_z, marginals })
}

/// Minimum of `F` over the product of the given per-variable point sets,
/// for `n ≤ 3`. Returns the value and a minimizing point.
pub fn grid_min(m: &Model, axes: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    let n = m.n();
    if n > 3 || axes.len() != n {
        return Err(Error::Argument(format!("grid search needs n ≤ 3 axes, got n = {n}")));
    }
    if axes.iter().any(|a| a.is_empty()) {
        return Err(Error::Argument("empty grid axis".into()));
    }
    let mut pts: Vec<Vec<f64>> = axes.to_vec();
    let mut unary: Vec<Vec<f64>> = (0..n)
        .map(|i| pts[i].iter().map(|&q| unary_f(m.theta()[i], m.degree(i), q)).collect())
        .collect();
    while pts.len() < 3 {
        pts.push(vec![0.5]);
        unary.push(vec![0.0]);
    }
    // pair[(0,1)], pair[(0,2)], pair[(1,2)] as dense tables
    let mut pair: [Vec<f64>; 3] = [
        vec![0.0; pts[0].len() * pts[1].len()],
        vec![0.0; pts[0].len() * pts[2].len()],
        vec![0.0; pts[1].len() * pts[2].len()],
    ];
    for e in m.edges() {
        let slot = match (e.i, e.j) {
            (0, 1) => 0,
            (0, 2) => 1,
            _ => 2,
        };
        let (pi, pj) = (&pts[e.i], &pts[e.j]);
        for (a, &qi) in pi.iter().enumerate() {
            for (b, &qj) in pj.iter().enumerate() {
                pair[slot][a * pj.len() + b] += pairwise_f(qi, qj, e.w)?;
            }
        }
    }
    let (n1, n2) = (pts[1].len(), pts[2].len());
    let mut best = (f64::INFINITY, [0usize; 3]);
    for a in 0..pts[0].len() {
        let p02 = &pair[1][a * n2..(a + 1) * n2];
        for b in 0..n1 {
            let base = unary[0][a] + unary[1][b] + pair[0][a * n1 + b];
            let p12 = &pair[2][b * n2..(b + 1) * n2];
            for c in 0..n2 {
                let f = base + unary[2][c] + p02[c] + p12[c];
                if f < best.0 {
                    best = (f, [a, b, c]);
                }
            }
        }
    }
    let arg: Vec<f64> = (0..n).map(|i| pts[i][best.1[i]]).collect();
    Ok((free_energy(m, &arg), arg))
}

/// Points `lo, lo + step, …` below `hi`, then `hi` itself.
pub fn grid_axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut k = 0u64;
    loop {
        let x = lo + k as f64 * step;
        if x >= hi {
            break;
        }
        v.push(x);
        k += 1;
    }
    v.push(hi);
    v
}

/// `F` minimized over an axis-aligned grid of the box with spacing `step`.
pub fn dense_grid_min(m: &Model, b: &Bounds, step: f64) -> Result<(f64, Vec<f64>)> {
    if !(step >= GRID_MIN_STEP) || !step.is_finite() {
        return Err(Error::Argument(format!("grid step must be at least {GRID_MIN_STEP}, got {step}")));
    }
    if m.n() > 3 {
        return Err(Error::TooLarge {
            what: "dense grid variables",
            size: m.n() as f64,
            cap: 3.0,
        });
    }
    let axes: Vec<Vec<f64>> = (0..m.n()).map(|i| grid_axis(b.lo(i), b.hi(i), step)).collect();
    grid_min(m, &axes)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Damped parallel loopy BP in log-odds form from `starts` random message
/// initializations. Returns the beliefs of runs whose beliefs settle to
/// within [`LBP_TOL`].
pub fn lbp_fixed_points(m: &Model, starts: usize, max_iters: usize, damping: f64, seed: u64) -> Vec<Vec<f64>> {
    let edges = m.edges();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = Vec::new();
    // msg[2e] is i -> j, msg[2e + 1] is j -> i
    let beliefs = |msg: &[f64]| -> Vec<f64> {
        let mut field = m.theta().to_vec();
        for (e, edge) in edges.iter().enumerate() {
            field[edge.j] += msg[2 * e];
            field[edge.i] += msg[2 * e + 1];
        }
        field.into_iter().map(sigmoid).collect()
    };
    for _ in 0..starts {
        let mut msg: Vec<f64> = (0..2 * edges.len())
            .map(|k| {
                let w = edges[k / 2].w.abs();
                rng.random_range(-w..=w)
            })
            .collect();
        let mut q = beliefs(&msg);
        for _ in 0..max_iters {
            let mut field = m.theta().to_vec();
            for (e, edge) in edges.iter().enumerate() {
                field[edge.j] += msg[2 * e];
                field[edge.i] += msg[2 * e + 1];
            }
            let next: Vec<f64> = (0..2 * edges.len())
                .map(|k| {
                    let edge = &edges[k / 2];
                    let (from, incoming) = if k % 2 == 0 { (edge.i, msg[k + 1]) } else { (edge.j, msg[k - 1]) };
                    let h = field[from] - incoming;
                    let fresh = softplus(h + edge.w) - softplus(h);
                    (1.0 - damping) * fresh + damping * msg[k]
                })
                .collect();
            msg = next;
            let q_next = beliefs(&msg);
            let change = q.iter().zip(&q_next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            q = q_next;
            if change < LBP_TOL {
                found.push(q.clone());
                break;
            }
        }
    }
    found
}

const DESCENT_MAX_ITERS: usize = 500;
const DESCENT_GRAD_TOL: f64 = 1e-9;
const DESCENT_EDGE: f64 = 1e-10;

/// Local minima of `F` reached by Levenberg–Marquardt damped Newton steps,
/// projected into the open unit cube, from `starts` random points. Only
/// runs ending at a point with `‖∇F‖∞ ≤ 1e-7` and a positive definite
/// Hessian are returned.
pub fn descent_minima(m: &Model, starts: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = m.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = Vec::new();
    for _ in 0..starts {
        let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.99)).collect();
        let mut f = free_energy(m, &q);
        let mut lambda = 1e-3;
        for _ in 0..DESCENT_MAX_ITERS {
            let Ok(g) = gradient(m, &q) else { break };
            if g.iter().all(|x| x.abs() <= DESCENT_GRAD_TOL) {
                break;
            }
            let h = hessian(m, &q).ok();
            let mut improved = false;
            for _ in 0..60 {
                let mut a = DMatrix::<f64>::zeros(n, n);
                if let Some(h) = &h {
                    for i in 0..n {
                        for j in 0..n {
                            a[(i, j)] = h[i][j];
                        }
                    }
                }
                for i in 0..n {
                    a[(i, i)] += lambda * (1.0 + a[(i, i)].abs());
                }
                let rhs = DVector::from_iterator(n, g.iter().map(|x| -x));
                let step = match a.clone().cholesky() {
                    Some(c) => c.solve(&rhs),
                    None => {
                        lambda *= 4.0;
                        continue;
                    }
                };
                let trial: Vec<f64> = (0..n)
                    .map(|i| (q[i] + step[i]).clamp(DESCENT_EDGE, 1.0 - DESCENT_EDGE))
                    .collect();
                let ft = free_energy(m, &trial);
                if ft <= f {
                    q = trial;
                    f = ft;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    break;
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }
        let converged = gradient(m, &q).is_ok_and(|g| g.iter().all(|x| x.abs() <= 1e-7));
        let positive = hessian(m, &q).is_ok_and(|h| {
            let a = DMatrix::from_fn(n, n, |i, j| h[i][j]);
            a.cholesky().is_some()
        });
        if converged && positive {
            found.push(q);
        }
    }
    found
}
