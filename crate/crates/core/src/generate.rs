//! Seeded synthetic models.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)` and is consumed
//! in a fixed order: graph structure, then singleton potentials, then edge
//! magnitudes, then edge signs. The same configuration and seed therefore
//! always give the same model file.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, InputModel, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    /// Preferential attachment: each new node links to `round(d/2)` existing
    /// nodes chosen with probability proportional to degree.
    PrefAttach,
    /// Random recursive tree: node `t` links to a uniform earlier node.
    Tree,
    /// Near-square 4-neighbour grid filled row by row.
    Grid,
    /// Erdős–Rényi graph with edge probability `d / (n - 1)`.
    Random,
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pref-attach" => Ok(GraphKind::PrefAttach),
            "tree" => Ok(GraphKind::Tree),
            "grid" => Ok(GraphKind::Grid),
            "random" => Ok(GraphKind::Random),
            _ => Err(Error::Argument(format!("unknown graph kind `{s}`"))),
        }
    }
}

/// A fixed value `x` or a uniform range written `lo:hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueSpec {
    Fixed(f64),
    Uniform(f64, f64),
}

impl ValueSpec {
    fn sample(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ValueSpec::Fixed(x) => x,
            ValueSpec::Uniform(lo, hi) if lo == hi => lo,
            ValueSpec::Uniform(lo, hi) => rng.random_range(lo..hi),
        }
    }
}

impl FromStr for ValueSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Argument(format!("bad number `{t}`")))
        };
        match s.split_once(':') {
            None => Ok(ValueSpec::Fixed(num(s)?)),
            Some((a, b)) => {
                let (lo, hi) = (num(a)?, num(b)?);
                if lo > hi {
                    return Err(Error::Argument(format!("empty range `{s}`")));
                }
                Ok(ValueSpec::Uniform(lo, hi))
            }
        }
    }
}

impl fmt::Display for ValueSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueSpec::Fixed(x) => write!(f, "{x}"),
            ValueSpec::Uniform(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignPattern {
    /// Edge weights are the sampled magnitudes.
    Attractive,
    /// Each edge sign is an independent fair coin.
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub kind: GraphKind,
    pub n: usize,
    pub mean_degree: f64,
    pub theta: ValueSpec,
    pub w: ValueSpec,
    pub signs: SignPattern,
    pub seed: u64,
}

impl GeneratorConfig {
    /// 55 nodes, mean degree 2, `θ = -2`, `W = 4`, attractive.
    pub fn transformer_network(seed: u64) -> Self {
        GeneratorConfig {
            kind: GraphKind::PrefAttach,
            n: 55,
            mean_degree: 2.0,
            theta: ValueSpec::Fixed(-2.0),
            w: ValueSpec::Fixed(4.0),
            signs: SignPattern::Attractive,
            seed,
        }
    }
}

pub fn generate(cfg: &GeneratorConfig) -> Result<InputModel> {
    if cfg.n == 0 {
        return Err(Error::Argument("n must be positive".into()));
    }
    if !(cfg.mean_degree >= 0.0) || !cfg.mean_degree.is_finite() {
        return Err(Error::Argument(format!("bad mean degree {}", cfg.mean_degree)));
    }
    let magnitude_ok = match cfg.w {
        ValueSpec::Fixed(x) => x > 0.0,
        ValueSpec::Uniform(lo, _) => lo > 0.0,
    };
    if !magnitude_ok {
        return Err(Error::Argument("edge magnitudes must be positive; use mixed signs for repulsive edges".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pairs = match cfg.kind {
        GraphKind::PrefAttach => pref_attach(&mut rng, cfg.n, ((cfg.mean_degree / 2.0).round() as usize).max(1)),
        GraphKind::Tree => random_tree(&mut rng, cfg.n),
        GraphKind::Grid => grid(cfg.n),
        GraphKind::Random => erdos_renyi(&mut rng, cfg.n, cfg.mean_degree),
    };
    let theta: Vec<f64> = (0..cfg.n).map(|_| cfg.theta.sample(&mut rng)).collect();
    let magnitudes: Vec<f64> = pairs.iter().map(|_| cfg.w.sample(&mut rng)).collect();
    let edges = pairs
        .into_iter()
        .zip(magnitudes)
        .map(|((i, j), w)| {
            let w = match cfg.signs {
                SignPattern::Attractive => w,
                SignPattern::Mixed if rng.random_bool(0.5) => -w,
                SignPattern::Mixed => w,
            };
            (i, j, w)
        })
        .collect();
    InputModel::new(cfg.n, theta, edges)
}

fn pref_attach(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<(usize, usize)> {
    let seed_size = (m + 1).min(n);
    let mut edges = Vec::new();
    // every node appears once per incident edge
    let mut ends: Vec<usize> = Vec::new();
    for i in 0..seed_size {
        for j in i + 1..seed_size {
            edges.push((i, j));
            ends.extend([i, j]);
        }
    }
    for t in seed_size..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m.min(t) {
            let v = if ends.is_empty() {
                rng.random_range(0..t)
            } else {
                ends[rng.random_range(0..ends.len())]
            };
            if !targets.contains(&v) {
                targets.push(v);
            }
        }
        targets.sort_unstable();
        for v in targets {
            edges.push((v, t));
            ends.extend([v, t]);
        }
    }
    edges
}

fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|t| (rng.random_range(0..t), t)).collect()
}

fn grid(n: usize) -> Vec<(usize, usize)> {
    let rows = ((n as f64).sqrt().floor() as usize).max(1);
    let cols = n.div_ceil(rows);
    let mut edges = Vec::new();
    for v in 0..n {
        if v % cols + 1 < cols && v + 1 < n {
            edges.push((v, v + 1));
        }
        if v + cols < n {
            edges.push((v, v + cols));
        }
    }
    edges
}

fn erdos_renyi(rng: &mut ChaCha8Rng, n: usize, mean_degree: f64) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    let p = (mean_degree / (n - 1) as f64).clamp(0.0, 1.0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Random relabeling of variables, for tests that want structure without
/// index order.
pub fn shuffled(model: &InputModel, seed: u64) -> InputModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..model.n).collect();
    perm.shuffle(&mut rng);
    let mut theta = vec![0.0; model.n];
    for (i, &t) in model.theta.iter().enumerate() {
        theta[perm[i]] = t;
    }
    let edges = model.edges.iter().map(|&(i, j, w)| (perm[i], perm[j], w)).collect();
    InputModel::new(model.n, theta, edges).expect("permutation of a valid model")
}
