//! Bounds on the Bethe Hessian over a box, for the second-derivative mesh.

use crate::bounds::Bounds;
use crate::model::Model;

/// Which branch of the denominator minimization applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenomCase {
    /// `1 - B_i ≤ A_j`.
    IBelowJ,
    /// `A_i ≤ A_j ≤ 1 - B_i ≤ 1 - B_j`.
    OverlapILower,
    /// `A_i ≤ A_j ≤ 1 - B_j ≤ 1 - B_i`.
    JInsideI,
    /// `A_j ≤ A_i ≤ 1 - B_i ≤ 1 - B_j`.
    IInsideJ,
    /// `A_j ≤ A_i ≤ 1 - B_j ≤ 1 - B_i`.
    OverlapJLower,
    /// `1 - B_j ≤ A_i`.
    JBelowI,
}

/// Minimum over the box of `(1 - m) M - m (1 - M) k` with
/// `m = min(q_i, q_j)`, `M = max(q_i, q_j)`, for `k ∈ [0, 1)`.
///
/// Arguments are the lower bounds `A` and the complementary bounds `B`
/// of each end (so `q_i ∈ [a_i, 1 - b_i]`).
pub fn hij_denominator(a_i: f64, b_i: f64, a_j: f64, b_j: f64, k: f64) -> (f64, DenomCase) {
    let (hi_i, hi_j) = (1.0 - b_i, 1.0 - b_j);
    let g = |x: f64| x * (1.0 - x);
    if hi_i <= a_j {
        (b_i * a_j - (1.0 - b_i) * (1.0 - a_j) * k, DenomCase::IBelowJ)
    } else if hi_j <= a_i {
        (b_j * a_i - (1.0 - b_j) * (1.0 - a_i) * k, DenomCase::JBelowI)
    } else if a_i <= a_j {
        if hi_i <= hi_j {
            ((1.0 - k) * g(a_j).min(g(b_i)), DenomCase::OverlapILower)
        } else {
            ((1.0 - k) * g(a_j).min(g(b_j)), DenomCase::JInsideI)
        }
    } else if hi_i <= hi_j {
        ((1.0 - k) * g(a_i).min(g(b_i)), DenomCase::IInsideJ)
    } else {
        ((1.0 - k) * g(a_i).min(g(b_j)), DenomCase::OverlapJLower)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderBounds {
    /// Largest bound on `-H_ij` over attractive edges (0 if none).
    pub a_tilde: f64,
    /// Largest bound on `H_ij` over repulsive edges (0 if none).
    pub a_rep: f64,
    /// Largest bound on `H_ii`.
    pub b: f64,
    pub omega: f64,
    /// Fraction of Hessian entries that may be nonzero, `(n + 2m) / n²`.
    pub sigma: f64,
    /// Bound on the largest Hessian eigenvalue, `n Ω √Σ`.
    pub lambda: f64,
    /// `min_i η_i (1 - η_i)`.
    pub eta_bar: f64,
    /// Per-edge bound on `|H_ij|`, in model edge order.
    pub edge: Vec<f64>,
    /// Per-variable bound on `H_ii`.
    pub diag: Vec<f64>,
}

/// Widens a computed bound by a few ulps so that it stays an upper bound
/// where it is attained exactly.
fn round_up(x: f64) -> f64 {
    x * (1.0 + 4.0 * f64::EPSILON)
}

pub fn second_order_bounds(m: &Model, b: &Bounds) -> SecondOrderBounds {
    let n = m.n();
    let a = |i: usize| b.lo(i);
    let bc = |i: usize| 1.0 - b.hi(i);

    let mut a_tilde: f64 = 0.0;
    let mut a_rep: f64 = 0.0;
    let edge: Vec<f64> = m
        .edges()
        .iter()
        .map(|e| {
            let alpha = e.coupling().alpha;
            let bound = if e.is_attractive() {
                let r = alpha / (1.0 + alpha);
                let (y, _) = hij_denominator(a(e.i), bc(e.i), a(e.j), bc(e.j), r * r);
                r / y
            } else {
                // flipping j turns the edge attractive with ratio -α
                let (y, _) = hij_denominator(a(e.i), bc(e.i), bc(e.j), a(e.j), alpha * alpha);
                -alpha / y
            };
            let bound = if bound.is_nan() || bound < 0.0 { f64::INFINITY } else { round_up(bound) };
            if e.is_attractive() {
                a_tilde = a_tilde.max(bound);
            } else {
                a_rep = a_rep.max(bound);
            }
            bound
        })
        .collect();

    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let eta = b.eta(i);
            let mut s = 1.0 - m.degree(i) as f64;
            for &(_, ei) in m.neighbors(i) {
                let e = &m.edges()[ei];
                let alpha = e.coupling().alpha;
                let k = if e.is_attractive() {
                    let r = alpha / (1.0 + alpha);
                    r * r
                } else {
                    alpha * alpha
                };
                s += 1.0 / (1.0 - k);
            }
            round_up(s / (eta * (1.0 - eta)))
        })
        .collect();
    let b_max = diag.iter().copied().fold(0.0, f64::max);
    let eta_bar = (0..n)
        .map(|i| b.eta(i) * (1.0 - b.eta(i)))
        .fold(f64::INFINITY, f64::min);

    let omega = a_tilde.max(a_rep).max(b_max);
    let nf = n as f64;
    let sigma = (nf + 2.0 * m.edges().len() as f64) / (nf * nf);
    SecondOrderBounds {
        a_tilde,
        a_rep,
        b: b_max,
        omega,
        sigma,
        lambda: nf * omega * sigma.sqrt(),
        eta_bar,
        edge,
        diag,
    }
}
