//! The Bethe box `Π_i [A_i, 1 - B_i]` containing every minimum of `F`, and
//! the first-derivative envelopes
//!
//! ```text
//! f_i^L(q) = -θ_i - W_i + log U_i + logit(q)  ≤  ∂F/∂q_i  ≤  f_i^U(q) = -θ_i + V_i - log L_i + logit(q)
//! ```
//!
//! valid whenever every variable lies inside the box the constants `L_i`,
//! `U_i` were computed from.
//!
//! A [`Bounds`] value always satisfies `A_i ≥ σ(θ_i - V_i + log L_i)` and
//! `1 - B_i ≤ σ(θ_i + W_i - log U_i)`: at a stationary point the derivative
//! vanishes, so `f^U ≥ 0 ≥ f^L` there. Consequently `f^U ≥ 0` and
//! `f^L ≤ 0` everywhere in the box, which the mesh constructions rely on.

use std::fmt::Write as _;

use crate::model::Model;
use crate::{Error, Result};

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(q: f64) -> f64 {
    q.ln() - (-q).ln_1p()
}

/// Affine-in-logit envelope `c + log(q/(1-q))` of one partial derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub c_lower: f64,
    pub c_upper: f64,
}

impl Envelope {
    pub fn lower(&self, q: f64) -> f64 {
        self.c_lower + logit(q)
    }

    pub fn upper(&self, q: f64) -> f64 {
        self.c_upper + logit(q)
    }

    /// `c_upper - c_lower`, the simple derivative range.
    pub fn width(&self) -> f64 {
        self.c_upper - self.c_lower
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    /// `A_i`: lower bound on `q_i`.
    pub a: Vec<f64>,
    /// `B_i`: lower bound on `1 - q_i`.
    pub b: Vec<f64>,
    pub log_l: Vec<f64>,
    pub log_u: Vec<f64>,
}

impl Bounds {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn lo(&self, i: usize) -> f64 {
        self.a[i]
    }

    /// `1 - B_i`, never below `A_i` (a point box may round past itself).
    pub fn hi(&self, i: usize) -> f64 {
        (1.0 - self.b[i]).max(self.a[i])
    }

    /// `S_i = 1 - B_i - A_i`.
    pub fn spread(&self, i: usize) -> f64 {
        (1.0 - self.b[i] - self.a[i]).max(0.0)
    }

    /// `η_i = min(A_i, B_i)`.
    pub fn eta(&self, i: usize) -> f64 {
        self.a[i].min(self.b[i])
    }

    pub fn contains(&self, q: &[f64], pad: f64) -> bool {
        q.iter()
            .enumerate()
            .all(|(i, &v)| v >= self.lo(i) - pad && v <= self.hi(i) + pad)
    }

    /// Envelope of `∂F/∂q_i` from the stored constants.
    pub fn envelope(&self, m: &Model, i: usize) -> Envelope {
        let theta = m.theta()[i];
        Envelope {
            c_lower: -theta - m.attractive_mass(i) + self.log_u[i],
            c_upper: -theta + m.repulsive_mass(i) - self.log_l[i],
        }
    }

    /// Computes envelope constants from the box `(a, b)` and then shrinks the
    /// box to where the resulting envelopes still admit a zero derivative.
    fn from_box(m: &Model, a: Vec<f64>, b: Vec<f64>) -> Bounds {
        let n = m.n();
        let raw = Bounds {
            log_l: vec![0.0; n],
            log_u: vec![0.0; n],
            a,
            b,
        };
        let mut out = raw.clone();
        for i in 0..n {
            (out.log_l[i], out.log_u[i]) = log_factors(m, &raw, i);
        }
        out.tighten(m);
        out
    }

    fn tighten(&mut self, m: &Model) {
        for i in 0..self.n() {
            let env = self.envelope(m, i);
            let a = self.a[i].max(sigmoid(-env.c_upper));
            let b = self.b[i].max(sigmoid(env.c_lower));
            // log L + log U ≤ V + W keeps a ≤ 1 - b up to rounding
            self.a[i] = a.min(1.0 - b);
            self.b[i] = b;
        }
    }
}

/// Stationary-point box `σ(θ_i - V_i) ≤ q_i ≤ σ(θ_i + W_i)` with trivial
/// envelope constants.
pub fn sigmoid_bounds(m: &Model) -> Bounds {
    let n = m.n();
    let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let t = m.theta()[i];
        a.push(sigmoid(t - m.repulsive_mass(i)));
        b.push(sigmoid(-t - m.attractive_mass(i)));
    }
    Bounds {
        a,
        b,
        log_l: vec![0.0; n],
        log_u: vec![0.0; n],
    }
}

/// Envelope of variable `i` computed from the box in `b` (its own and its
/// neighbors' intervals), ignoring the constants stored in `b`.
///
/// A repulsive edge is handled by flipping the neighbor, which turns it into
/// an attractive edge with `α' = e^{|W|} - 1` and swaps that neighbor's
/// `A` and `B`; both factors are then `≥ 1`.
pub fn envelope_constants(m: &Model, b: &Bounds, i: usize) -> Envelope {
    let (log_l, log_u) = log_factors(m, b, i);
    let theta = m.theta()[i];
    Envelope {
        c_lower: -theta - m.attractive_mass(i) + log_u,
        c_upper: -theta + m.repulsive_mass(i) - log_l,
    }
}

/// `(log L_i, log U_i)` from the intervals in `b`.
fn log_factors(m: &Model, b: &Bounds, i: usize) -> (f64, f64) {
    let (mut log_l, mut log_u) = (0.0, 0.0);
    let (ai, bi) = (b.a[i], b.b[i]);
    for &(j, k) in m.neighbors(i) {
        let w = m.edges()[k].w;
        let alpha = w.abs().exp_m1();
        let (aj, bj) = if w > 0.0 { (b.a[j], b.b[j]) } else { (b.b[j], b.a[j]) };
        log_l += (alpha * aj / (1.0 + alpha * (1.0 - bi) * (1.0 - aj))).ln_1p();
        log_u += (alpha * bj / (1.0 + alpha * (1.0 - ai) * (1.0 - bj))).ln_1p();
    }
    (log_l, log_u)
}

/// One Jacobi sweep of bound propagation: recompute every envelope from the
/// current box, then move each interval to the zero crossings of its
/// envelopes. Never widens the box.
pub fn bbp_sweep(m: &Model, b: &Bounds) -> Bounds {
    let mut next = Bounds::from_box(m, b.a.clone(), b.b.clone());
    for i in 0..m.n() {
        next.a[i] = next.a[i].max(b.a[i]);
        next.b[i] = next.b[i].max(b.b[i]);
        next.log_l[i] = next.log_l[i].max(b.log_l[i]);
        next.log_u[i] = next.log_u[i].max(b.log_u[i]);
    }
    next
}

pub const BBP_TOL: f64 = 1e-12;
pub const BBP_MAX_ITERS: usize = 1000;

/// Iterates [`bbp_sweep`] until the largest change in any `A_i` or `B_i`
/// falls below `tol`, or `max_iters` sweeps have run.
pub fn bbp_refine(m: &Model, b: &Bounds, max_iters: usize, tol: f64) -> Bounds {
    let mut cur = b.clone();
    for _ in 0..max_iters {
        let next = bbp_sweep(m, &cur);
        let change = cur
            .a
            .iter()
            .zip(&next.a)
            .chain(cur.b.iter().zip(&next.b))
            .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
        cur = next;
        if change < tol {
            break;
        }
    }
    cur
}

/// Bounds supplied by an external method (e.g. cavity-field bounds), given
/// as `A_i`, `B_i` arrays. They are intersected with the stationary-point
/// box and their envelopes computed.
pub fn external_bounds(m: &Model, a: &[f64], b: &[f64]) -> Result<Bounds> {
    let n = m.n();
    if a.len() != n || b.len() != n {
        return Err(Error::Argument(format!("external bounds must have {n} entries")));
    }
    let base = sigmoid_bounds(m);
    let (mut na, mut nb) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        if !(a[i] > 0.0 && b[i] > 0.0 && a[i] + b[i] <= 1.0) {
            return Err(Error::Argument(format!(
                "external bounds for variable {i} are invalid: A = {}, B = {}",
                a[i], b[i]
            )));
        }
        let lo = a[i].max(base.a[i]);
        let gap = b[i].max(base.b[i]);
        if lo > 1.0 - gap {
            return Err(Error::Argument(format!(
                "external interval for variable {i} misses the stationary-point box [{}, {}]",
                base.lo(i),
                base.hi(i)
            )));
        }
        na.push(lo);
        nb.push(gap);
    }
    Ok(Bounds::from_box(m, na, nb))
}

/// Parses `i A_i B_i` lines (one per variable, `#` comments allowed).
pub fn parse_bounds_file(text: &str, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut a = vec![f64::NAN; n];
    let mut b = vec![f64::NAN; n];
    for (k, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { line: k + 1, msg };
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(err(format!("expected `i A_i B_i`, found {} fields", f.len())));
        }
        let i: usize = f[0].parse().map_err(|_| err(format!("bad index `{}`", f[0])))?;
        if i >= n {
            return Err(err(format!("variable {i} out of range 0..{n}")));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`")))
        };
        if !a[i].is_nan() {
            return Err(err(format!("variable {i} listed twice")));
        }
        a[i] = parse(f[1])?;
        b[i] = parse(f[2])?;
    }
    if let Some(i) = a.iter().position(|v| v.is_nan()) {
        return Err(Error::Parse {
            line: 0,
            msg: format!("no bounds given for variable {i}"),
        });
    }
    Ok((a, b))
}

pub fn write_bounds_file(b: &Bounds) -> String {
    let mut out = String::new();
    for i in 0..b.n() {
        let _ = writeln!(out, "{i} {:?} {:?}", b.a[i], b.b[i]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RangeMode {
    /// `D_i = V_i + W_i - log L_i - log U_i`.
    Simple,
    /// `D_i = max{f^U(1 - B_i), -f^L(A_i)}`, never above the simple value.
    #[default]
    Refined,
}

/// Bound `D_i` on `|∂F/∂q_i|` over the box.
pub fn derivative_range(m: &Model, b: &Bounds, i: usize, mode: RangeMode) -> f64 {
    let env = b.envelope(m, i);
    let simple = env.width().max(0.0);
    match mode {
        RangeMode::Simple => simple,
        RangeMode::Refined => {
            let (lo, hi) = (b.lo(i), b.hi(i));
            let refined = env.upper(hi).max(-env.lower(lo)).max(0.0);
            refined.min(simple)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Edge;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0) < 1e-300);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn box_single_attractive_neighbor() {
        let m = Model::new(vec![0.0, 0.0], vec![Edge { i: 0, j: 1, w: 2.0 }], 0.0).unwrap();
        let b = sigmoid_bounds(&m);
        assert_eq!(b.lo(0), 0.5);
        assert!((b.hi(0) - 0.880_797_077_977_882_3).abs() < 1e-15);
        assert_eq!(derivative_range(&m, &b, 0, RangeMode::Simple), 2.0);
    }

    #[test]
    fn box_symmetric_masses() {
        let m = Model::new(
            vec![0.0, 0.0, 0.0],
            vec![Edge { i: 0, j: 1, w: 1.0 }, Edge { i: 0, j: 2, w: -1.0 }],
            0.0,
        )
        .unwrap();
        let b = sigmoid_bounds(&m);
        assert!((b.lo(0) - sigmoid(-1.0)).abs() < 1e-16);
        assert!((b.hi(0) - sigmoid(1.0)).abs() < 1e-16);
        assert!((b.lo(0) + b.hi(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_neighbor_bounds_give_trivial_envelope() {
        let m = Model::new(vec![0.4, -0.3], vec![Edge { i: 0, j: 1, w: 1.7 }], 0.0).unwrap();
        let b = Bounds {
            a: vec![0.0, 0.0],
            b: vec![0.0, 0.0],
            log_l: vec![0.0; 2],
            log_u: vec![0.0; 2],
        };
        let env = envelope_constants(&m, &b, 0);
        assert_eq!(env, b.envelope(&m, 0));
    }

    #[test]
    fn bbp_two_node_strictly_inside() {
        let m = crate::model::reparameterize(
            &crate::InputModel::new(2, vec![0.0, 0.0], vec![(0, 1, 2.0)]).unwrap(),
        );
        let base = sigmoid_bounds(&m);
        let refined = bbp_refine(&m, &base, BBP_MAX_ITERS, BBP_TOL);
        for i in 0..2 {
            assert!(refined.lo(i) > base.lo(i));
            assert!(refined.hi(i) < base.hi(i));
        }
        // fixed point
        let again = bbp_refine(&m, &refined, BBP_MAX_ITERS, BBP_TOL);
        for i in 0..2 {
            assert!((again.lo(i) - refined.lo(i)).abs() < 1e-12);
            assert!((again.hi(i) - refined.hi(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn external_bounds_validation() {
        let m = Model::new(vec![0.0, 0.0], vec![Edge { i: 0, j: 1, w: 2.0 }], 0.0).unwrap();
        assert!(external_bounds(&m, &[0.6, 0.6], &[0.3, 0.3]).is_ok());
        assert!(external_bounds(&m, &[0.0, 0.6], &[0.3, 0.3]).is_err());
        assert!(external_bounds(&m, &[0.7, 0.6], &[0.4, 0.3]).is_err());
        // entirely above the stationary-point box
        assert!(external_bounds(&m, &[0.95, 0.6], &[0.01, 0.3]).is_err());
        assert!(external_bounds(&m, &[0.6], &[0.3]).is_err());
    }

    #[test]
    fn bounds_file_round_trip() {
        let m = Model::new(vec![0.0, 0.0], vec![Edge { i: 0, j: 1, w: 2.0 }], 0.0).unwrap();
        let b = sigmoid_bounds(&m);
        let (a, bb) = parse_bounds_file(&write_bounds_file(&b), 2).unwrap();
        assert_eq!(a, b.a);
        assert_eq!(bb, b.b);
        assert!(parse_bounds_file("0 0.1 0.2\n", 2).is_err());
        assert!(parse_bounds_file("0 0.1 0.2\n0 0.1 0.2\n", 2).is_err());
    }
}
