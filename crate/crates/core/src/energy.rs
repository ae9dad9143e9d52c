//! Bethe free energy of a binary pairwise model over singleton
//! pseudo-marginals `q_i = q(X_i = 1)`, with the pairwise marginal of every
//! edge eliminated in closed form.
//!
//! For an edge with `α = e^W - 1` the optimal joint `ξ = q(X_i=1, X_j=1)`
//! is the appropriate root of `α ξ² - [1 + α(q_i+q_j)] ξ + (1+α) q_i q_j = 0`
//! (lower root for α > 0, upper for α < 0). Both cases reduce to the single
//! cancellation-free expression `2c / (b + √(b² - 4αc))` whenever `b > 0`.

use crate::model::{EdgeCoupling, Model};
use crate::{Error, Result};

/// Clamp applied to `q` before evaluating derivatives, which diverge at the
/// boundary of the unit cube.
pub const DERIVATIVE_CLIP: f64 = 1e-12;

/// Root of the ξ quadratic for `q_i, q_j ∈ [0, 1]`, clamped to the feasible
/// interval `[max(0, q_i+q_j-1), min(q_i, q_j)]`.
pub(crate) fn xi_raw(qi: f64, qj: f64, alpha: f64) -> f64 {
    let b = 1.0 + alpha * (qi + qj);
    let c = (1.0 + alpha) * qi * qj;
    let disc = (b * b - 4.0 * alpha * c).max(0.0);
    let root = if b >= 0.0 {
        if c == 0.0 {
            0.0
        } else {
            2.0 * c / (b + disc.sqrt())
        }
    } else {
        // only reachable for α < 0 with q_i + q_j > 1
        (b - disc.sqrt()) / (2.0 * alpha)
    };
    root.clamp((qi + qj - 1.0).max(0.0), qi.min(qj))
}

fn check_unit(name: &str, q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {q} is outside [0, 1]")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= -1.0 || alpha == 0.0 {
        return Err(Error::Domain(format!("coupling α = {alpha} must be finite, > -1 and nonzero")));
    }
    Ok(())
}

/// Optimal joint `ξ_ij` given the singleton marginals and `α_ij`.
pub fn solve_xi(qi: f64, qj: f64, alpha: f64) -> Result<f64> {
    check_unit("q_i", qi)?;
    check_unit("q_j", qj)?;
    check_alpha(alpha)?;
    Ok(xi_raw(qi, qj, alpha))
}

/// The 2×2 pairwise marginal, `p_ab = q(X_i = a, X_j = b)`.
///
/// Each entry is obtained as the ξ of a suitably flipped edge, so none of
/// them is formed by subtracting nearly equal quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseMarginal {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl PairwiseMarginal {
    pub fn new(qi: f64, qj: f64, w: f64) -> Self {
        let alpha = w.exp_m1();
        let flipped = (-w).exp_m1();
        Self {
            p11: xi_raw(qi, qj, alpha),
            p10: xi_raw(qi, 1.0 - qj, flipped),
            p01: xi_raw(1.0 - qi, qj, flipped),
            p00: xi_raw(1.0 - qi, 1.0 - qj, alpha),
        }
    }

    pub fn xi(&self) -> f64 {
        self.p11
    }

    pub fn entropy(&self) -> f64 {
        -(xlogx(self.p00) + xlogx(self.p01) + xlogx(self.p10) + xlogx(self.p11))
    }
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Binary entropy `-q ln q - (1-q) ln(1-q)` with `0 ln 0 = 0`.
pub fn singleton_entropy(q: f64) -> f64 {
    -(xlogx(q) + xlogx(1.0 - q))
}

pub(crate) fn pairwise_raw(qi: f64, qj: f64, w: f64) -> f64 {
    let pm = PairwiseMarginal::new(qi, qj, w);
    -w * pm.xi() - pm.entropy()
}

/// Pairwise contribution `f_ij = -W ξ - S_ij` of one edge.
pub fn pairwise_f(qi: f64, qj: f64, w: f64) -> Result<f64> {
    check_unit("q_i", qi)?;
    check_unit("q_j", qj)?;
    check_alpha(EdgeCoupling::from_weight(w).alpha)?;
    Ok(pairwise_raw(qi, qj, w))
}

/// Singleton contribution `-θ q + (d-1) S(q)` of one variable.
pub fn unary_f(theta: f64, degree: usize, q: f64) -> f64 {
    -theta * q + (degree as f64 - 1.0) * singleton_entropy(q)
}

fn check_point(m: &Model, q: &[f64]) -> Result<()> {
    if q.len() != m.n() {
        return Err(Error::Domain(format!(
            "pseudo-marginal has {} entries for {} variables",
            q.len(),
            m.n()
        )));
    }
    for (i, &qi) in q.iter().enumerate() {
        check_unit(&format!("q[{i}]"), qi)?;
    }
    Ok(())
}

/// Bethe free energy `F(q)`. Edges are accumulated in sorted order, then
/// variables in ascending order.
///
/// # Panics
/// If `q` has the wrong length or entries outside `[0, 1]`.
pub fn free_energy(m: &Model, q: &[f64]) -> f64 {
    check_point(m, q).expect("valid pseudo-marginal");
    let mut f = 0.0;
    for e in m.edges() {
        f += pairwise_raw(q[e.i], q[e.j], e.w);
    }
    for (i, &t) in m.theta().iter().enumerate() {
        f += unary_f(t, m.degree(i), q[i]);
    }
    f
}

fn clipped(q: &[f64]) -> Vec<f64> {
    q.iter()
        .map(|&v| v.clamp(DERIVATIVE_CLIP, 1.0 - DERIVATIVE_CLIP))
        .collect()
}

/// `∂F/∂q_i = -θ_i + log Q_i`, evaluated in log space.
pub fn gradient(m: &Model, q: &[f64]) -> Result<Vec<f64>> {
    check_point(m, q)?;
    let q = clipped(q);
    let mut g: Vec<f64> = (0..m.n())
        .map(|i| {
            let d = m.degree(i) as f64;
            -m.theta()[i] + (d - 1.0) * ((1.0 - q[i]).ln() - q[i].ln())
        })
        .collect();
    for e in m.edges() {
        let pm = PairwiseMarginal::new(q[e.i], q[e.j], e.w);
        g[e.i] += pm.p10.ln() - pm.p00.ln();
        g[e.j] += pm.p01.ln() - pm.p00.ln();
    }
    Ok(g)
}

/// Denominator `T_ij = q_i q_j (1-q_i)(1-q_j) - (ξ - q_i q_j)²` of the
/// pairwise second derivatives.
pub fn t_denominator(qi: f64, qj: f64, xi: f64) -> f64 {
    let cov = xi - qi * qj;
    qi * qj * (1.0 - qi) * (1.0 - qj) - cov * cov
}

/// Dense Hessian of `F`, row-major `n × n`.
pub fn hessian(m: &Model, q: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_point(m, q)?;
    let q = clipped(q);
    let n = m.n();
    let mut h = vec![vec![0.0; n]; n];
    for i in 0..n {
        h[i][i] = -(m.degree(i) as f64 - 1.0) / (q[i] * (1.0 - q[i]));
    }
    for e in m.edges() {
        let (qi, qj) = (q[e.i], q[e.j]);
        let xi = xi_raw(qi, qj, e.coupling().alpha);
        let t = t_denominator(qi, qj, xi);
        if !(t > 0.0) {
            return Err(Error::Numeric(format!(
                "T = {t} on edge ({},{}) at q = ({qi}, {qj})",
                e.i, e.j
            )));
        }
        h[e.i][e.i] += qj * (1.0 - qj) / t;
        h[e.j][e.j] += qi * (1.0 - qi) / t;
        let off = (qi * qj - xi) / t;
        h[e.i][e.j] = off;
        h[e.j][e.i] = off;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Edge;

    #[test]
    fn xi_closed_form_example() {
        let xi = solve_xi(0.5, 0.5, 1.0).unwrap();
        assert!((xi - (2.0 - 2f64.sqrt()) / 2.0).abs() < 1e-15);
        // cross-check: ξ minimizes f over the feasible interval
        let w = 2f64.ln();
        let f = |x: f64| {
            let cells = [1.0 + x - 1.0, 0.5 - x, 0.5 - x, x];
            -w * x + cells.iter().map(|&c| xlogx(c)).sum::<f64>()
        };
        let best = (1..100_000)
            .map(|k| k as f64 * 0.5 / 100_000.0)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        assert!((best - xi).abs() < 1e-5);
    }

    #[test]
    fn xi_independence_limit() {
        let xi = solve_xi(0.3, 0.7, 1e-8).unwrap();
        assert!((xi - 0.21).abs() < 1e-6);
    }

    #[test]
    fn xi_rejects_bad_input() {
        assert!(solve_xi(-0.1, 0.5, 1.0).is_err());
        assert!(solve_xi(0.5, 1.5, 1.0).is_err());
        assert!(solve_xi(0.5, 0.5, -1.0).is_err());
        assert!(solve_xi(0.5, 0.5, 0.0).is_err());
    }

    #[test]
    fn xi_on_the_boundary() {
        assert_eq!(solve_xi(0.0, 0.4, 3.0).unwrap(), 0.0);
        assert!((solve_xi(1.0, 0.4, 3.0).unwrap() - 0.4).abs() < 1e-15);
        assert!((solve_xi(1.0, 0.4, -0.9).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn xi_strongly_repulsive_negative_b_branch() {
        // b = 1 + α(q_i+q_j) < 0
        let (qi, qj, a) = (0.9, 0.95, -0.95);
        let xi = solve_xi(qi, qj, a).unwrap();
        let residual = a * xi * xi - (1.0 + a * (qi + qj)) * xi + (1.0 + a) * qi * qj;
        assert!(residual.abs() < 1e-14);
        assert!(xi >= qi + qj - 1.0 && xi <= qi * qj);
    }

    #[test]
    fn independent_edge_entropy() {
        let f = pairwise_f(0.5, 0.5, 1e-8).unwrap();
        assert!((f + 4f64.ln()).abs() < 1e-7);
    }

    #[test]
    fn free_energy_at_origin_is_zero() {
        let m = Model::new(vec![-1.0, 0.5, 2.0], vec![Edge { i: 0, j: 1, w: 2.0 }, Edge { i: 1, j: 2, w: -1.0 }], 0.0)
            .unwrap();
        assert_eq!(free_energy(&m, &[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn leaf_gradient_has_no_prefactor() {
        let m = Model::new(vec![0.3, -0.2], vec![Edge { i: 0, j: 1, w: 1.3 }], 0.0).unwrap();
        let q = [0.35, 0.6];
        let xi = solve_xi(q[0], q[1], 1.3f64.exp_m1()).unwrap();
        let g = gradient(&m, &q).unwrap();
        let expected = -0.3 + ((q[0] - xi) / (1.0 + xi - q[0] - q[1])).ln();
        assert!((g[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn hessian_sign_and_diagonal() {
        let m = Model::new(vec![0.0; 3], vec![Edge { i: 0, j: 1, w: 1.5 }, Edge { i: 1, j: 2, w: -2.0 }], 0.0)
            .unwrap();
        let q = [0.3, 0.6, 0.8];
        let h = hessian(&m, &q).unwrap();
        assert!(h[0][1] <= 0.0);
        assert!(h[1][2] >= 0.0);
        assert_eq!(h[0][2], 0.0);
        for i in 0..3 {
            assert!(h[i][i] >= 1.0 / (q[i] * (1.0 - q[i])) - 1e-9);
        }
    }

    #[test]
    fn domain_errors() {
        let m = Model::new(vec![0.0; 2], vec![Edge { i: 0, j: 1, w: 1.0 }], 0.0).unwrap();
        assert!(gradient(&m, &[0.5, 1.2]).is_err());
        assert!(hessian(&m, &[0.5]).is_err());
        assert!(gradient(&m, &[0.0, 1.0]).is_ok());
    }
}
