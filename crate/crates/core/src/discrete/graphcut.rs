//! Exact minimization of submodular multi-label problems by one minimum cut.
//!
//! Variable `i` with `K` labels owns nodes `v_1 … v_{K-1}`, where `v_k` on
//! the sink side means `x_i ≥ k`. Infinite arcs `v_k -> v_{k+1}` forbid
//! non-monotone cuts, and the chain `s -> v_{K-1} -> … -> v_1 -> t` carries
//! the unary costs. A pairwise table is split as
//!
//! ```text
//! f(a, b) = f(a, 0) + f(0, b) - f(0, 0) + Σ_{k ≤ a, l ≤ b} Δ(k, l)
//! ```
//!
//! with second differences `Δ ≤ 0`. Each `Δ [x_i ≥ k][x_j ≥ l]` becomes a
//! unary `Δ [x_i ≥ k]` plus an arc `v_{j,l} -> v_{i,k}` of capacity `-Δ`.
//!
//! The sink side is taken as small as possible, so among optimal labelings
//! the componentwise (hence lexicographically) smallest is returned.

use super::maxflow::{Capacity, FlowNetwork};
use super::{is_submodular, DiscreteProblem, Labeling};
use crate::{Error, Result};

struct Reduction {
    base: Vec<usize>,
    unary: Vec<Vec<f64>>,
    cross: Vec<(usize, usize, f64)>,
    nodes: usize,
}

fn reduce(p: &DiscreteProblem) -> Result<Reduction> {
    if let Some(e) = is_submodular(p).iter().position(|s| !s) {
        let (i, j) = p.edges[e];
        return Err(Error::NotSubmodular { i, j });
    }
    let mut base = Vec::with_capacity(p.n());
    let mut nodes = 0;
    for i in 0..p.n() {
        base.push(nodes);
        nodes += p.num_labels(i) - 1;
    }
    let node = |i: usize, k: usize| base[i] + k - 1;

    let mut unary = p.unary.clone();
    let mut cross = Vec::new();
    for (&(i, j), t) in p.edges.iter().zip(&p.pairwise) {
        let (ki, kj) = (t.rows(), t.cols());
        for a in 0..ki {
            unary[i][a] += t.get(a, 0);
        }
        for b in 0..kj {
            unary[j][b] += t.get(0, b) - t.get(0, 0);
        }
        let mut row_mass = vec![0.0; ki];
        for k in 1..ki {
            for l in 1..kj {
                let d = t.get(k, l) - t.get(k - 1, l) - t.get(k, l - 1) + t.get(k - 1, l - 1);
                if d < 0.0 {
                    row_mass[k] += d;
                    cross.push((node(j, l), node(i, k), -d));
                }
            }
        }
        let mut acc = 0.0;
        for a in 1..ki {
            acc += row_mass[a];
            unary[i][a] += acc;
        }
    }
    Ok(Reduction {
        base,
        unary,
        cross,
        nodes,
    })
}

fn solve_with<C: Capacity>(p: &DiscreteProblem, convert: impl Fn(f64) -> Result<C>) -> Result<Labeling> {
    let r = reduce(p)?;
    let (s, t) = (r.nodes, r.nodes + 1);
    let mut g = FlowNetwork::<C>::new(r.nodes + 2);
    for i in 0..p.n() {
        let k = p.num_labels(i);
        if k == 1 {
            continue;
        }
        let node = |k: usize| r.base[i] + k - 1;
        let lowest = r.unary[i].iter().copied().fold(f64::INFINITY, f64::min);
        let cap = |a: usize| convert(r.unary[i][a] - lowest);
        g.add_edge(s, node(k - 1), cap(k - 1)?)?;
        for a in 1..k - 1 {
            g.add_edge(node(a + 1), node(a), cap(a)?)?;
        }
        g.add_edge(node(1), t, cap(0)?)?;
        for a in 1..k - 1 {
            g.add_edge(node(a), node(a + 1), C::INFINITY)?;
        }
    }
    for &(u, v, c) in &r.cross {
        g.add_edge(u, v, convert(c)?)?;
    }
    let flow = g.max_flow(s, t)?;
    let labels: Vec<usize> = (0..p.n())
        .map(|i| (1..p.num_labels(i)).filter(|&k| flow.sink_side[r.base[i] + k - 1]).count())
        .collect();
    Ok(Labeling {
        cost: p.cost(&labels),
        labels,
        certified_optimal: true,
    })
}

/// Exact minimum of a problem whose pairwise tables are all submodular.
pub fn solve_graphcut(p: &DiscreteProblem) -> Result<Labeling> {
    solve_with::<f64>(p, Ok)
}

/// As [`solve_graphcut`], with capacities rounded to integers after
/// multiplying by `scale` (deterministic integer arithmetic in the flow).
pub fn solve_graphcut_fixed(p: &DiscreteProblem, scale: f64) -> Result<Labeling> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Argument(format!("scale must be positive, got {scale}")));
    }
    solve_with::<i64>(p, |c| {
        let x = (c * scale).round();
        if x.is_finite() && x < i64::INFINITY as f64 {
            Ok(x as i64)
        } else {
            Err(Error::Numeric(format!("capacity {c} overflows at scale {scale}")))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{bbp_refine, sigmoid_bounds, BBP_MAX_ITERS, BBP_TOL};
    use crate::discrete::{build_cost_tables, solve_bruteforce, Table};
    use crate::mesh::{build, Axis, Mesh, MeshMethod};
    use crate::model::{reparameterize, Model};
    use crate::InputModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_attractive(rng: &mut ChaCha8Rng, n: usize) -> Model {
        let theta = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.4) {
                    edges.push((i, j, rng.random_range(0.1..3.0)));
                }
            }
        }
        reparameterize(&InputModel::new(n, theta, edges).unwrap())
    }

    #[test]
    fn one_point_meshes() {
        let p = DiscreteProblem::new(
            vec![vec![0.5], vec![0.5]],
            vec![vec![1.0], vec![2.0]],
            vec![(0, 1)],
            vec![Table::from_fn(1, 1, |_, _| 0.25)],
        )
        .unwrap();
        let l = solve_graphcut(&p).unwrap();
        assert_eq!(l.labels, vec![0, 0]);
        assert_eq!(l.cost, 3.25);
    }

    #[test]
    fn two_node_five_by_five_matches_brute_force() {
        let m = reparameterize(&InputModel::new(2, vec![0.4, -0.3], vec![(0, 1, 2.5)]).unwrap());
        let b = sigmoid_bounds(&m);
        let axes = (0..2)
            .map(|i| Axis::Points((0..5).map(|k| b.lo(i) + b.spread(i) * (k as f64 + 0.5) / 5.0).collect()))
            .collect();
        let mesh = Mesh {
            method: MeshMethod::Simple,
            epsilon: 1.0,
            axes,
        };
        let p = build_cost_tables(&m, &mesh).unwrap();
        let g = solve_graphcut(&p).unwrap();
        let bf = solve_bruteforce(&p, 1e6).unwrap();
        assert_eq!(g.labels, bf.labels);
        assert_eq!(g.cost, bf.cost);
    }

    #[test]
    fn random_attractive_models_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        for _ in 0..30 {
            let n = rng.random_range(2..6);
            let m = random_attractive(&mut rng, n);
            let b = bbp_refine(&m, &sigmoid_bounds(&m), BBP_MAX_ITERS, BBP_TOL);
            let Ok(mesh) = build(MeshMethod::Minsum, &m, &b, 0.3) else { continue };
            let p = build_cost_tables(&m, &mesh).unwrap();
            if p.log_states() > 1e5f64.ln() {
                continue;
            }
            let g = solve_graphcut(&p).unwrap();
            let x = solve_graphcut_fixed(&p, 1e12).unwrap();
            let bf = solve_bruteforce(&p, 1e6).unwrap();
            assert!((g.cost - bf.cost).abs() <= 1e-9 * (1.0 + bf.cost.abs()));
            assert!((x.cost - bf.cost).abs() <= 1e-9 * (1.0 + bf.cost.abs()));
            checked += 1;
        }
        assert!(checked >= 10, "only {checked} instances small enough");
    }

    #[test]
    fn lexicographic_tie_break() {
        // every labeling costs the same
        let p = DiscreteProblem::new(
            vec![vec![0.0; 3], vec![0.0; 4]],
            vec![vec![0.0; 3], vec![0.0; 4]],
            vec![(0, 1)],
            vec![Table::from_fn(3, 4, |_, _| 1.0)],
        )
        .unwrap();
        assert_eq!(solve_graphcut(&p).unwrap().labels, vec![0, 0]);
    }

    #[test]
    fn rejects_non_submodular() {
        let p = DiscreteProblem::new(
            vec![vec![0.0; 2], vec![0.0; 2]],
            vec![vec![0.0; 2], vec![0.0; 2]],
            vec![(0, 1)],
            vec![Table::from_fn(2, 2, |a, b| if a == b { 1.0 } else { 0.0 })],
        )
        .unwrap();
        assert!(matches!(solve_graphcut(&p), Err(Error::NotSubmodular { i: 0, j: 1 })));
    }
}
