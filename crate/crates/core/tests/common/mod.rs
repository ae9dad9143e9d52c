//! Shared generators and independent oracles for the integration suites.
//! Nothing here calls the library's energy or inference code.

#![allow(dead_code)]

use bethe_core::{InputModel, Model};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_input(rng: &mut ChaCha8Rng, n: usize, p_edge: f64, w_max: f64, theta_max: f64, mixed: bool) -> InputModel {
    let theta = (0..n).map(|_| rng.random_range(-theta_max..=theta_max)).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p_edge) {
                let mag = rng.random_range(0.05..=w_max);
                let w = if mixed && rng.random_bool(0.5) { -mag } else { mag };
                edges.push((i, j, w));
            }
        }
    }
    InputModel::new(n, theta, edges).unwrap()
}

/// Random tree on `n` nodes with uniform parents.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize, w_max: f64, theta_max: f64, mixed: bool) -> InputModel {
    let theta = (0..n).map(|_| rng.random_range(-theta_max..=theta_max)).collect();
    let edges = (1..n)
        .map(|t| {
            let mag = rng.random_range(0.05..=w_max);
            let w = if mixed && rng.random_bool(0.5) { -mag } else { mag };
            (rng.random_range(0..t), t, w)
        })
        .collect();
    InputModel::new(n, theta, edges).unwrap()
}

/// Energy in the input convention, written out directly.
pub fn input_energy(m: &InputModel, x: &[bool]) -> f64 {
    let b = |v: bool| if v { 1.0 } else { 0.0 };
    let mut e = 0.0;
    for (i, &t) in m.theta.iter().enumerate() {
        e -= t * b(x[i]);
    }
    for &(i, j, w) in &m.edges {
        let agree = b(x[i]) * b(x[j]) + (1.0 - b(x[i])) * (1.0 - b(x[j]));
        e -= 0.5 * w * agree;
    }
    e
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    mx + v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// `log Z` and `p(X_i = 1)` of the input model by summing all states.
pub fn brute_force(m: &InputModel) -> (f64, Vec<f64>) {
    assert!(m.n <= 20);
    let states = 1usize << m.n;
    let mut logw = Vec::with_capacity(states);
    for s in 0..states {
        let x: Vec<bool> = (0..m.n).map(|i| s >> i & 1 == 1).collect();
        logw.push(-input_energy(m, &x));
    }
    let lz = log_sum_exp(&logw);
    let mut marg = vec![0.0; m.n];
    for (s, lw) in logw.iter().enumerate() {
        let p = (lw - lz).exp();
        for (i, mi) in marg.iter_mut().enumerate() {
            if s >> i & 1 == 1 {
                *mi += p;
            }
        }
    }
    (lz, marg)
}

/// Exact `log Z` and marginals of a forest by two-pass sum-product on the
/// input-convention potentials.
pub fn forest_sum_product(m: &InputModel) -> (f64, Vec<f64>) {
    let n = m.n;
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j, w) in &m.edges {
        adj[i].push((j, w));
        adj[j].push((i, w));
    }
    // log pair potential for (x_i, x_j)
    let pair = |w: f64, a: usize, b: usize| if a == b { 0.5 * w } else { 0.0 };
    let unary = |i: usize, a: usize| if a == 1 { m.theta[i] } else { 0.0 };
    let mut parent = vec![usize::MAX; n];
    let mut parent_w = vec![0.0; n];
    let mut order = Vec::new();
    let mut seen = vec![false; n];
    let mut roots = Vec::new();
    for r in 0..n {
        if seen[r] {
            continue;
        }
        roots.push(r);
        seen[r] = true;
        let mut stack = vec![r];
        while let Some(v) = stack.pop() {
            order.push(v);
            for &(u, w) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    parent[u] = v;
                    parent_w[u] = w;
                    stack.push(u);
                }
            }
        }
    }
    assert_eq!(m.edges.len() + roots.len(), n, "not a forest");
    // upward messages: up[v][b] = log Σ_a exp(unary + children) ψ(a, parent = b)
    let mut inside = vec![[0.0f64; 2]; n];
    for v in 0..n {
        inside[v] = [unary(v, 0), unary(v, 1)];
    }
    let mut up = vec![[0.0f64; 2]; n];
    for &v in order.iter().rev() {
        if parent[v] == usize::MAX {
            continue;
        }
        for b in 0..2 {
            up[v][b] = log_sum_exp(&[inside[v][0] + pair(parent_w[v], 0, b), inside[v][1] + pair(parent_w[v], 1, b)]);
        }
        let p = parent[v];
        inside[p][0] += up[v][0];
        inside[p][1] += up[v][1];
    }
    let log_z: f64 = roots.iter().map(|&r| log_sum_exp(&inside[r])).sum();
    // downward: outside[v][a] = log-mass from everything except v's subtree
    let mut outside = vec![[0.0f64; 2]; n];
    for &v in &order {
        let p = parent[v];
        if p == usize::MAX {
            continue;
        }
        let rest = [
            inside[p][0] + outside[p][0] - up[v][0],
            inside[p][1] + outside[p][1] - up[v][1],
        ];
        for a in 0..2 {
            outside[v][a] = log_sum_exp(&[rest[0] + pair(parent_w[v], a, 0), rest[1] + pair(parent_w[v], a, 1)]);
        }
    }
    let marg = (0..n)
        .map(|v| {
            let l0 = inside[v][0] + outside[v][0];
            let l1 = inside[v][1] + outside[v][1];
            1.0 / (1.0 + (l0 - l1).exp())
        })
        .collect();
    (log_z, marg)
}

fn h(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.ln()
    }
}

/// Optimal `ξ = q(X_i = 1, X_j = 1)` for the coupling `w`.
pub fn xi(qi: f64, qj: f64, w: f64) -> f64 {
    let alpha = w.exp_m1();
    let lo = (qi + qj - 1.0).max(0.0);
    let hi = qi.min(qj);
    let x = if alpha.abs() < 1e-14 {
        qi * qj
    } else {
        let qq = 1.0 + alpha * (qi + qj);
        let disc = (qq * qq - 4.0 * alpha * (1.0 + alpha) * qi * qj).max(0.0);
        // numerically stable root of α ξ² - Q ξ + (1+α) q_i q_j
        2.0 * (1.0 + alpha) * qi * qj / (qq + disc.sqrt())
    };
    x.clamp(lo, hi)
}

/// Edge part of `F`: `-w ξ - H(μ_ij)`.
pub fn pair_term(qi: f64, qj: f64, w: f64) -> f64 {
    let x = xi(qi, qj, w);
    let s = h(x) + h(qi - x) + h(qj - x) + h(1.0 - qi - qj + x);
    -w * x - s
}

/// Variable part of `F`: `-θ q + (d - 1) H(q)`.
pub fn unary_term(theta: f64, degree: usize, q: f64) -> f64 {
    -theta * q + (degree as f64 - 1.0) * (h(q) + h(1.0 - q))
}

/// Bethe free energy of the analysis-convention model.
pub fn bethe_f(m: &Model, q: &[f64]) -> f64 {
    let mut f = 0.0;
    for i in 0..m.n() {
        f += unary_term(m.theta()[i], m.degree(i), q[i]);
    }
    for e in m.edges() {
        f += pair_term(q[e.i], q[e.j], e.w);
    }
    f
}

/// Relative difference with unit floor.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Largest number of points a simple mesh may have.
pub fn simple_mesh_cap(m: &Model, eps: f64) -> f64 {
    let n = m.n() as f64;
    let mass: f64 = m.edges().iter().map(|e| e.w.abs()).sum();
    2.0 * n + n / eps * mass
}
