//! Sufficient meshes over the Bethe box.
//!
//! A mesh is sufficient for ε when some mesh point `q*` is guaranteed to
//! satisfy `F(q*) ≤ min F + ε`. The first-derivative constructions split the
//! budget over dimensions and use the envelopes of [`crate::bounds`]:
//!
//! * **simple**: uniform half-width `γ_i = ε / (n D_i)`;
//! * **minsum**: `γ_i ∝ √(S_i / D_i)`, minimizing the total point count;
//! * **adaptive**: per dimension, each point covers leftwards while
//!   `∫ f^U ≤ k_i ε` and rightwards (its *reach*) while `∫ -f^L ≤ k_i ε`.
//!
//! The second-derivative construction uses one half-width
//! `γ = √(2ε / (n Λ))` where `Λ` bounds the Hessian's largest eigenvalue.

mod second_order;

pub use second_order::{hij_denominator, second_order_bounds, DenomCase, SecondOrderBounds};

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::bounds::{derivative_range, Bounds, Envelope, RangeMode};
use crate::model::Model;
use crate::{Error, Result};

/// Absolute tolerance on the integral value when placing adaptive points.
pub const ADAPTIVE_TOL: f64 = 1e-10;
const ADAPTIVE_MAX_BISECTIONS: usize = 200;
/// Upper limit on the number of points any single axis may hold.
pub const MAX_AXIS_POINTS: u64 = 1 << 53;
const MAX_ADAPTIVE_POINTS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeshMethod {
    Simple,
    Minsum,
    AdaptiveSimple,
    AdaptiveMinsum,
    SecondDerivative,
}

impl MeshMethod {
    pub const ALL: [MeshMethod; 5] = [
        MeshMethod::Simple,
        MeshMethod::Minsum,
        MeshMethod::AdaptiveSimple,
        MeshMethod::AdaptiveMinsum,
        MeshMethod::SecondDerivative,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeshMethod::Simple => "simple",
            MeshMethod::Minsum => "minsum",
            MeshMethod::AdaptiveSimple => "adaptive-simple",
            MeshMethod::AdaptiveMinsum => "adaptive-minsum",
            MeshMethod::SecondDerivative => "second-derivative",
        }
    }
}

impl fmt::Display for MeshMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeshMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeshMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown mesh method `{s}`")))
    }
}

/// Mesh points along one dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    /// Points `min(lo + (2k+1)γ, hi)` for `k < count`; every value in
    /// `[lo, hi]` lies within `γ` of one of them. Stored implicitly so that
    /// very fine meshes can be counted without being materialized.
    Uniform { lo: f64, hi: f64, half_width: f64, count: u64 },
    Points(Vec<f64>),
}

impl Axis {
    /// `count` points with half-width `(hi - lo) / (2 count)`.
    fn with_count(lo: f64, hi: f64, count: u64) -> Axis {
        let spread = (hi - lo).max(0.0);
        if count <= 1 || spread == 0.0 {
            return Axis::Points(vec![lo + spread / 2.0]);
        }
        Axis::Uniform {
            lo,
            hi,
            half_width: spread / (2.0 * count as f64),
            count,
        }
    }

    fn uniform(lo: f64, hi: f64, half_width: f64) -> Result<Axis> {
        let spread = (hi - lo).max(0.0);
        if spread == 0.0 || !half_width.is_finite() || spread <= 2.0 * half_width {
            return Ok(Axis::Points(vec![if half_width.is_finite() {
                (lo + half_width).min(hi)
            } else {
                lo + spread / 2.0
            }]));
        }
        let count = (spread / (2.0 * half_width)).ceil();
        if count > MAX_AXIS_POINTS as f64 {
            return Err(Error::TooLarge {
                what: "mesh axis",
                size: count,
                cap: MAX_AXIS_POINTS as f64,
            });
        }
        Ok(Axis::Uniform {
            lo,
            hi,
            half_width,
            count: count as u64,
        })
    }

    pub fn len(&self) -> u64 {
        match self {
            Axis::Uniform { count, .. } => *count,
            Axis::Points(p) => p.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, k: u64) -> f64 {
        match self {
            Axis::Uniform { lo, hi, half_width, .. } => {
                (lo + (2 * k + 1) as f64 * half_width).min(*hi)
            }
            Axis::Points(p) => p[k as usize],
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Half-width of a uniform axis.
    pub fn half_width(&self) -> Option<f64> {
        match self {
            Axis::Uniform { half_width, .. } => Some(*half_width),
            Axis::Points(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub method: MeshMethod,
    pub epsilon: f64,
    pub axes: Vec<Axis>,
}

impl Mesh {
    /// `N = Σ_i N_i`, saturating.
    pub fn total_points(&self) -> u64 {
        self.axes.iter().fold(0u64, |acc, a| acc.saturating_add(a.len()))
    }

    /// `ln Π = Σ_i ln N_i`.
    pub fn log_product(&self) -> f64 {
        self.axes.iter().map(|a| (a.len() as f64).ln()).sum()
    }

    /// All points, refusing when `N` exceeds `cap`.
    pub fn points(&self, cap: u64) -> Result<Vec<Vec<f64>>> {
        let total = self.total_points();
        if total > cap {
            return Err(Error::TooLarge {
                what: "mesh",
                size: total as f64,
                cap: cap as f64,
            });
        }
        Ok(self.axes.iter().map(Axis::to_vec).collect())
    }

    /// Line format `i N_i p_1 ... p_{N_i}`, one line per variable.
    pub fn dump(&self, cap: u64) -> Result<String> {
        let mut out = String::new();
        for (i, pts) in self.points(cap)?.iter().enumerate() {
            let _ = write!(out, "{i} {}", pts.len());
            for p in pts {
                let _ = write!(out, " {p:?}");
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// `∫_a^b (C + log(s/(1-s))) ds = [C s + s ln s + (1-s) ln(1-s)]_a^b`,
/// with `0 ln 0 = 0`.
pub fn entropy_integral(a: f64, b: f64, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
        return Err(Error::Domain(format!(
            "integration limits must satisfy 0 ≤ a ≤ b ≤ 1, got [{a}, {b}]"
        )));
    }
    Ok(antiderivative(b, c) - antiderivative(a, c))
}

fn antiderivative(s: f64, c: f64) -> f64 {
    let xlogx = |x: f64| if x <= 0.0 { 0.0 } else { x * x.ln() };
    c * s + xlogx(s) + xlogx(1.0 - s)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("epsilon must be positive and finite, got {eps}")))
    }
}

fn check_bounds(m: &Model, b: &Bounds) -> Result<()> {
    if b.n() != m.n() {
        return Err(Error::Argument(format!(
            "bounds cover {} variables, model has {}",
            b.n(),
            m.n()
        )));
    }
    Ok(())
}

pub fn derivative_ranges(m: &Model, b: &Bounds, mode: RangeMode) -> Vec<f64> {
    (0..m.n()).map(|i| derivative_range(m, b, i, mode)).collect()
}

/// Uniform mesh with `γ_i = ε / (n D_i)`.
pub fn build_simple(m: &Model, b: &Bounds, eps: f64, mode: RangeMode) -> Result<Mesh> {
    check_eps(eps)?;
    check_bounds(m, b)?;
    let n = m.n() as f64;
    let axes = derivative_ranges(m, b, mode)
        .into_iter()
        .enumerate()
        .map(|(i, d)| Axis::uniform(b.lo(i), b.hi(i), eps / (n * d)))
        .collect::<Result<_>>()?;
    Ok(Mesh {
        method: MeshMethod::Simple,
        epsilon: eps,
        axes,
    })
}

/// Continuous minsum half-widths `γ_i = ε √(S_i/D_i) / Σ_j √(S_j D_j)`,
/// which minimize `Σ S_i / (2γ_i)` subject to `Σ γ_i D_i = ε`. `None`
/// marks a degenerate dimension (zero spread or zero derivative range).
pub fn minsum_half_widths(m: &Model, b: &Bounds, eps: f64, mode: RangeMode) -> Vec<Option<f64>> {
    let d = derivative_ranges(m, b, mode);
    let norm: f64 = (0..m.n()).map(|i| (b.spread(i) * d[i]).sqrt()).sum();
    (0..m.n())
        .map(|i| {
            let s = b.spread(i);
            (s > 0.0 && d[i] > 0.0).then(|| eps * (s / d[i]).sqrt() / norm)
        })
        .collect()
}

/// Point counts minimizing `Σ N_i` subject to `Σ S_i D_i / (2 N_i) ≤ ε`,
/// the integer form of the minsum objective with `γ_i = S_i / (2 N_i)`.
///
/// Incrementing `N_i` lowers the constraint by `c_i / (N_i (N_i + 1))` with
/// `c_i = S_i D_i / 2`, a decreasing gain, so taking increments in order of
/// gain until the constraint holds is optimal. A bisection on the gain
/// threshold skips the bulk of that walk.
pub fn minsum_counts(m: &Model, b: &Bounds, eps: f64, mode: RangeMode) -> Result<Vec<u64>> {
    check_eps(eps)?;
    check_bounds(m, b)?;
    let d = derivative_ranges(m, b, mode);
    let c: Vec<f64> = (0..m.n()).map(|i| 0.5 * b.spread(i) * d[i]).collect();
    let load = |counts: &[u64]| -> f64 { c.iter().zip(counts).map(|(c, &k)| c / k as f64).sum() };
    // every increment whose gain is at least `lambda`
    let counts_at = |lambda: f64| -> Vec<u64> {
        c.iter()
            .map(|&ci| {
                if ci <= 0.0 {
                    return 1;
                }
                let r = ci / lambda;
                let mut k = ((-1.0 + (1.0 + 4.0 * r).sqrt()) / 2.0).floor().max(0.0);
                while k > 0.0 && k * (k + 1.0) > r {
                    k -= 1.0;
                }
                while (k + 1.0) * (k + 2.0) <= r {
                    k += 1.0;
                }
                (k as u64).saturating_add(1)
            })
            .collect()
    };
    let too_large = |counts: &[u64]| counts.iter().any(|&k| k > MAX_AXIS_POINTS);

    let mut hi = c.iter().copied().fold(0.0, f64::max) / 2.0;
    if hi <= 0.0 || load(&counts_at(f64::INFINITY)) <= eps {
        return Ok(vec![1; m.n()]);
    }
    hi *= 1.0 + 1e-12;
    let mut lo = hi;
    loop {
        lo /= 4.0;
        let k = counts_at(lo);
        if too_large(&k) {
            return Err(Error::TooLarge {
                what: "mesh axis",
                size: k.iter().copied().max().unwrap_or(0) as f64,
                cap: MAX_AXIS_POINTS as f64,
            });
        }
        if load(&k) <= eps {
            break;
        }
        hi = lo;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        if load(&counts_at(mid)) <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // finish the greedy walk from the infeasible side
    let mut counts = counts_at(hi);
    while load(&counts) > eps {
        let gain = |i: usize| c[i] / (counts[i] as f64 * (counts[i] as f64 + 1.0));
        let best = (0..counts.len())
            .filter(|&i| c[i] > 0.0)
            .max_by(|&x, &y| gain(x).total_cmp(&gain(y)).then(y.cmp(&x)))
            .expect("some dimension carries load");
        counts[best] += 1;
    }
    Ok(counts)
}

/// Uniform mesh with the counts of [`minsum_counts`].
pub fn build_minsum(m: &Model, b: &Bounds, eps: f64, mode: RangeMode) -> Result<Mesh> {
    let counts = minsum_counts(m, b, eps, mode)?;
    let axes = counts
        .into_iter()
        .enumerate()
        .map(|(i, k)| Axis::with_count(b.lo(i), b.hi(i), k))
        .collect();
    Ok(Mesh {
        method: MeshMethod::Minsum,
        epsilon: eps,
        axes,
    })
}

/// `k_i = 1/n`.
pub fn adaptive_simple_weights(m: &Model) -> Vec<f64> {
    vec![1.0 / m.n() as f64; m.n()]
}

/// `k_i ∝ √(S_i D_i)` with refined `D_i`. Falls back to uniform weights
/// when every dimension is degenerate.
pub fn adaptive_minsum_weights(m: &Model, b: &Bounds) -> Vec<f64> {
    let d = derivative_ranges(m, b, RangeMode::Refined);
    let raw: Vec<f64> = (0..m.n()).map(|i| (b.spread(i) * d[i]).sqrt()).collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.into_iter().map(|r| r / total).collect()
    } else {
        adaptive_simple_weights(m)
    }
}

/// Points and reaches along one dimension for envelope `env` over
/// `[lo, hi]` with per-dimension budget `budget = k_i ε`.
///
/// Each returned `(p, r)` satisfies `∫_{left}^{p} f^U = budget` (where
/// `left` is the previous reach, or `lo`) unless `p = hi`, and
/// `∫_p^r -f^L = budget` unless `r = hi`.
pub fn adaptive_axis(env: &Envelope, lo: f64, hi: f64, budget: f64) -> Result<Vec<(f64, f64)>> {
    if !(budget > 0.0) {
        return Err(Error::Argument(format!("adaptive budget must be positive, got {budget}")));
    }
    if hi <= lo {
        return Ok(vec![(lo, lo)]);
    }
    // F is monotone in this coordinate over the whole box
    if env.upper(hi) <= 0.0 {
        return Ok(vec![(hi, hi)]);
    }
    if env.lower(lo) >= 0.0 {
        return Ok(vec![(lo, hi)]);
    }
    let up = |a: f64, x: f64| antiderivative(x, env.c_upper) - antiderivative(a, env.c_upper);
    let down = |a: f64, x: f64| antiderivative(a, env.c_lower) - antiderivative(x, env.c_lower);

    let mut out = Vec::new();
    let mut left = lo;
    loop {
        if out.len() >= MAX_ADAPTIVE_POINTS {
            return Err(Error::TooLarge {
                what: "adaptive mesh axis",
                size: out.len() as f64,
                cap: MAX_ADAPTIVE_POINTS as f64,
            });
        }
        let p = if up(left, hi) <= budget {
            hi
        } else {
            solve_budget(|x| up(left, x), left, hi, budget)
        };
        let r = if p >= hi || env.lower(p) >= 0.0 || down(p, hi) <= budget {
            hi
        } else {
            solve_budget(|x| down(p, x), p, hi, budget)
        };
        if r <= left {
            return Err(Error::Numeric(format!(
                "adaptive mesh made no progress at {left} (budget {budget})"
            )));
        }
        out.push((p, r));
        if r >= hi {
            return Ok(out);
        }
        left = r;
    }
}

/// Largest `x ∈ [a, b]` found by bisection with `g(x) ≤ target`, for `g`
/// nondecreasing with `g(a) ≤ target < g(b)`. Stops once `target - g(x)`
/// is within [`ADAPTIVE_TOL`].
fn solve_budget(g: impl Fn(f64) -> f64, a: f64, b: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    for _ in 0..ADAPTIVE_MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v <= target {
            lo = mid;
            if target - v <= ADAPTIVE_TOL {
                break;
            }
        } else {
            hi = mid;
        }
    }
    lo
}

/// Adaptive mesh for weights `k` (nonnegative, summing to one).
///
/// Dimensions with zero spread or zero derivative range get one point and
/// need no budget; the remaining weights are rescaled to sum to one.
pub fn build_adaptive(m: &Model, b: &Bounds, eps: f64, k: &[f64]) -> Result<Mesh> {
    check_eps(eps)?;
    check_bounds(m, b)?;
    if k.len() != m.n() {
        return Err(Error::Argument(format!("expected {} weights, got {}", m.n(), k.len())));
    }
    if k.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::Argument("adaptive weights must be nonnegative".into()));
    }
    let sum: f64 = k.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!("adaptive weights sum to {sum}, not 1")));
    }
    let d = derivative_ranges(m, b, RangeMode::Refined);
    let active: Vec<bool> = (0..m.n()).map(|i| b.spread(i) > 0.0 && d[i] > 0.0).collect();
    let active_sum: f64 = (0..m.n()).filter(|&i| active[i]).map(|i| k[i]).sum();

    let mut axes = Vec::with_capacity(m.n());
    for i in 0..m.n() {
        let (lo, hi) = (b.lo(i), b.hi(i));
        if !active[i] {
            axes.push(Axis::Points(vec![lo + (hi - lo).max(0.0) / 2.0]));
            continue;
        }
        if k[i] <= 0.0 {
            return Err(Error::Argument(format!("weight for non-degenerate variable {i} is zero")));
        }
        let pts = adaptive_axis(&b.envelope(m, i), lo, hi, eps * k[i] / active_sum)?;
        axes.push(Axis::Points(pts.into_iter().map(|(p, _)| p).collect()));
    }
    let method = if k.iter().all(|&w| (w - k[0]).abs() <= 1e-15) {
        MeshMethod::AdaptiveSimple
    } else {
        MeshMethod::AdaptiveMinsum
    };
    Ok(Mesh {
        method,
        epsilon: eps,
        axes,
    })
}

/// Uniform mesh with the common half-width `γ = √(2ε / (n Λ))`.
pub fn build_second_derivative(m: &Model, b: &Bounds, eps: f64) -> Result<Mesh> {
    check_eps(eps)?;
    check_bounds(m, b)?;
    let sob = second_order_bounds(m, b);
    let gamma = (2.0 * eps / (m.n() as f64 * sob.lambda)).sqrt();
    let axes = (0..m.n())
        .map(|i| Axis::uniform(b.lo(i), b.hi(i), gamma))
        .collect::<Result<_>>()?;
    Ok(Mesh {
        method: MeshMethod::SecondDerivative,
        epsilon: eps,
        axes,
    })
}

/// Builds a mesh by any method, with refined derivative ranges.
pub fn build(method: MeshMethod, m: &Model, b: &Bounds, eps: f64) -> Result<Mesh> {
    match method {
        MeshMethod::Simple => build_simple(m, b, eps, RangeMode::Refined),
        MeshMethod::Minsum => build_minsum(m, b, eps, RangeMode::Refined),
        MeshMethod::AdaptiveSimple => {
            let mut mesh = build_adaptive(m, b, eps, &adaptive_simple_weights(m))?;
            mesh.method = MeshMethod::AdaptiveSimple;
            Ok(mesh)
        }
        MeshMethod::AdaptiveMinsum => {
            let mut mesh = build_adaptive(m, b, eps, &adaptive_minsum_weights(m, b))?;
            mesh.method = MeshMethod::AdaptiveMinsum;
            Ok(mesh)
        }
        MeshMethod::SecondDerivative => build_second_derivative(m, b, eps),
    }
}
