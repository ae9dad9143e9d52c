//! Binary pairwise models: the input file format, the reparameterized
//! analysis form, variable flipping and connected components.
//!
//! Two energy conventions are in play. Input files use the symmetric form
//!
//! ```text
//! E_in(x) = -Σ θ_i x_i - Σ (W_ij/2) [x_i x_j + (1-x_i)(1-x_j)]
//! ```
//!
//! while all analysis uses `E(x) = -Σ θ_i x_i - Σ W_ij x_i x_j`. A [`Model`]
//! carries an `energy_offset` with `E(x) + energy_offset = E_in(x)` for every
//! configuration, so `log Z_in = log Z - energy_offset`. Every transform in
//! this module updates the offset so that this identity keeps referring to
//! the original input.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::{Error, Result};

/// A parsed model in the input convention.
#[derive(Debug, Clone, PartialEq)]
pub struct InputModel {
    pub n: usize,
    pub theta: Vec<f64>,
    /// Edges `(i, j, W_ij)` with `i < j`, sorted, all weights nonzero.
    pub edges: Vec<(usize, usize, f64)>,
    /// Number of zero-weight edges removed while parsing.
    pub dropped_edges: usize,
}

impl InputModel {
    pub fn new(n: usize, theta: Vec<f64>, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if theta.len() != n {
            return Err(Error::InvalidModel(format!(
                "expected {n} singleton terms, got {}",
                theta.len()
            )));
        }
        if let Some(i) = theta.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidModel(format!("theta[{i}] is not finite")));
        }
        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(edges.len());
        let mut dropped = 0;
        for (i, j, w) in edges {
            let (a, b) = check_edge(n, i, j, w)?;
            if !seen.insert((a, b)) {
                return Err(Error::InvalidModel(format!("duplicate edge ({a},{b})")));
            }
            if w == 0.0 {
                dropped += 1;
            } else {
                kept.push((a, b, w));
            }
        }
        kept.sort_by_key(|&(a, b, _)| (a, b));
        Ok(Self {
            n,
            theta,
            edges: kept,
            dropped_edges: dropped,
        })
    }

    /// Largest |W_ij|.
    pub fn max_abs_weight(&self) -> f64 {
        self.edges.iter().fold(0.0, |acc, e| acc.max(e.2.abs()))
    }

    /// Largest |θ_i| in the input convention.
    pub fn max_abs_theta(&self) -> f64 {
        self.theta.iter().fold(0.0, |acc, t| acc.max(t.abs()))
    }

    /// Energy of a configuration in the input convention.
    pub fn energy(&self, x: &[bool]) -> f64 {
        let mut e = 0.0;
        for (i, &t) in self.theta.iter().enumerate() {
            if x[i] {
                e -= t;
            }
        }
        for &(i, j, w) in &self.edges {
            if x[i] == x[j] {
                e -= w / 2.0;
            }
        }
        e
    }

    /// Serializes in the model file format. Values use Rust's shortest
    /// round-trip float formatting, so output is byte-stable.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n, self.edges.len());
        for (i, t) in self.theta.iter().enumerate() {
            let _ = writeln!(out, "{i} {t:?}");
        }
        for &(i, j, w) in &self.edges {
            let _ = writeln!(out, "{i} {j} {w:?}");
        }
        out
    }
}

fn check_edge(n: usize, i: usize, j: usize, w: f64) -> Result<(usize, usize)> {
    if i >= n || j >= n {
        return Err(Error::InvalidModel(format!(
            "edge ({i},{j}) references a variable outside 0..{n}"
        )));
    }
    if i == j {
        return Err(Error::InvalidModel(format!("self-loop on variable {i}")));
    }
    if !w.is_finite() {
        return Err(Error::InvalidModel(format!("edge ({i},{j}) weight is not finite")));
    }
    Ok((i.min(j), i.max(j)))
}

/// Parses the line-based model format:
///
/// ```text
/// n m
/// i theta_i        (n lines)
/// i j W_ij         (m lines, input convention)
/// ```
///
/// Blank lines and lines starting with `#` are ignored. Zero-weight edges are
/// dropped and counted in [`InputModel::dropped_edges`].
pub fn parse_model(text: &str) -> Result<InputModel> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing header line `n m`".into(),
    })?;
    let fields = split_fields(hline, header, 2)?;
    let n = parse_index(hline, fields[0])?;
    let m = parse_index(hline, fields[1])?;

    let mut theta = vec![None; n];
    for _ in 0..n {
        let (line, l) = lines.next().ok_or(Error::Parse {
            line: hline,
            msg: format!("expected {n} singleton lines"),
        })?;
        let f = split_fields(line, l, 2)?;
        let i = parse_index(line, f[0])?;
        let t = parse_real(line, f[1])?;
        if i >= n {
            return Err(Error::Parse {
                line,
                msg: format!("variable {i} out of range 0..{n}"),
            });
        }
        if theta[i].replace(t).is_some() {
            return Err(Error::Parse {
                line,
                msg: format!("variable {i} listed twice"),
            });
        }
    }
    let theta: Vec<f64> = theta.into_iter().map(|t| t.unwrap_or(0.0)).collect();

    let mut seen = HashSet::new();
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (line, l) = lines.next().ok_or(Error::Parse {
            line: hline,
            msg: format!("expected {m} edge lines"),
        })?;
        let f = split_fields(line, l, 3)?;
        let i = parse_index(line, f[0])?;
        let j = parse_index(line, f[1])?;
        let w = parse_real(line, f[2])?;
        let (a, b) = check_edge(n, i, j, w).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if !seen.insert((a, b)) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate edge ({a},{b})"),
            });
        }
        edges.push((a, b, w));
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse {
            line,
            msg: "unexpected trailing content".into(),
        });
    }
    InputModel::new(n, theta, edges)
}

fn split_fields<'a>(line: usize, l: &'a str, want: usize) -> Result<Vec<&'a str>> {
    let f: Vec<&str> = l.split_whitespace().collect();
    if f.len() != want {
        return Err(Error::Parse {
            line,
            msg: format!("expected {want} fields, found {}", f.len()),
        });
    }
    Ok(f)
}

fn parse_index(line: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("`{s}` is not a nonnegative integer"),
    })
}

fn parse_real(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("`{s}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("`{s}` is not finite"),
        });
    }
    Ok(v)
}

/// `α_ij = e^{W_ij} - 1`, same sign as the coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCoupling {
    pub alpha: f64,
}

impl EdgeCoupling {
    pub fn from_weight(w: f64) -> Self {
        Self { alpha: w.exp_m1() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

impl Edge {
    pub fn coupling(&self) -> EdgeCoupling {
        EdgeCoupling::from_weight(self.w)
    }

    pub fn is_attractive(&self) -> bool {
        self.w > 0.0
    }

    /// The endpoint that is not `v`.
    pub fn other(&self, v: usize) -> usize {
        if self.i == v {
            self.j
        } else {
            self.i
        }
    }
}

/// A binary pairwise model in the analysis convention plus the tracked
/// energy offset back to the input convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    theta: Vec<f64>,
    edges: Vec<Edge>,
    energy_offset: f64,
    /// `adjacency[v]` lists `(neighbor, edge index)` in ascending neighbor order.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Model {
    /// Builds a model from analysis-convention parameters. Edges are
    /// normalized to `i < j` and sorted.
    pub fn new(theta: Vec<f64>, edges: Vec<Edge>, energy_offset: f64) -> Result<Self> {
        let n = theta.len();
        if let Some(i) = theta.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidModel(format!("theta[{i}] is not finite")));
        }
        if !energy_offset.is_finite() {
            return Err(Error::InvalidModel("energy offset is not finite".into()));
        }
        let mut seen = HashSet::new();
        let mut norm = Vec::with_capacity(edges.len());
        for e in edges {
            let (i, j) = check_edge(n, e.i, e.j, e.w)?;
            if e.w == 0.0 {
                return Err(Error::InvalidModel(format!("edge ({i},{j}) has zero weight")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidModel(format!("duplicate edge ({i},{j})")));
            }
            norm.push(Edge { i, j, w: e.w });
        }
        norm.sort_by_key(|e| (e.i, e.j));
        let mut adjacency = vec![Vec::new(); n];
        for (k, e) in norm.iter().enumerate() {
            adjacency[e.i].push((e.j, k));
            adjacency[e.j].push((e.i, k));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Self {
            theta,
            edges: norm,
            energy_offset,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn energy_offset(&self) -> f64 {
        self.energy_offset
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// `W_i`: total attractive weight incident to `v`.
    pub fn attractive_mass(&self, v: usize) -> f64 {
        self.adjacency[v]
            .iter()
            .map(|&(_, k)| self.edges[k].w)
            .filter(|&w| w > 0.0)
            .sum()
    }

    /// `V_i`: total magnitude of repulsive weight incident to `v`.
    pub fn repulsive_mass(&self, v: usize) -> f64 {
        -self.adjacency[v]
            .iter()
            .map(|&(_, k)| self.edges[k].w)
            .filter(|&w| w < 0.0)
            .sum::<f64>()
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.edges.iter().fold(0.0, |acc, e| acc.max(e.w.abs()))
    }

    /// `Σ |W_ij|` over all edges.
    pub fn weight_mass(&self) -> f64 {
        self.edges.iter().map(|e| e.w.abs()).sum()
    }

    pub fn is_attractive(&self) -> bool {
        self.edges.iter().all(Edge::is_attractive)
    }

    /// Energy in the analysis convention (offset excluded).
    pub fn energy(&self, x: &[bool]) -> f64 {
        let mut e = 0.0;
        for (i, &t) in self.theta.iter().enumerate() {
            if x[i] {
                e -= t;
            }
        }
        for edge in &self.edges {
            if x[edge.i] && x[edge.j] {
                e -= edge.w;
            }
        }
        e
    }

    /// Energy of the original input configuration this state represents.
    pub fn input_energy(&self, x: &[bool]) -> f64 {
        self.energy(x) + self.energy_offset
    }

    fn with_params(&self, theta: Vec<f64>, weights: Vec<f64>, energy_offset: f64) -> Model {
        let edges = self
            .edges
            .iter()
            .zip(weights)
            .map(|(e, w)| Edge { i: e.i, j: e.j, w })
            .collect();
        Model {
            theta,
            edges,
            energy_offset,
            adjacency: self.adjacency.clone(),
        }
    }
}

/// Converts the input convention to the analysis convention:
/// `θ_i ← θ_i - Σ_{j∈N(i)} W_ij/2`, weights unchanged.
///
/// Expanding the symmetric pairwise term gives
/// `E_in(x) = E(x) - Σ_edges W_ij/2`, so the offset is `-Σ W_ij / 2`.
pub fn reparameterize(input: &InputModel) -> Model {
    let mut theta = input.theta.clone();
    let mut offset = 0.0;
    let mut edges = Vec::with_capacity(input.edges.len());
    for &(i, j, w) in &input.edges {
        theta[i] -= w / 2.0;
        theta[j] -= w / 2.0;
        offset -= w / 2.0;
        edges.push(Edge { i, j, w });
    }
    Model::new(theta, edges, offset).expect("validated input model")
}

/// Flips every variable, `X' = 1 - X`.
pub fn flip_all(m: &Model) -> Model {
    let all: Vec<usize> = (0..m.n()).collect();
    flip_subset(m, &all)
}

/// Flips the variables in `set`. Edges with exactly one endpoint in the set
/// change sign; singleton terms follow from matching coefficients.
///
/// The new offset is fixed by the all-zeros configuration: its energy is 0
/// in the old model and its image is the indicator of `set`.
pub fn flip_subset(m: &Model, set: &[usize]) -> Model {
    let n = m.n();
    let mut flipped = vec![false; n];
    for &v in set {
        flipped[v] = true;
    }
    let mut theta = m.theta.clone();
    for v in 0..n {
        if flipped[v] {
            theta[v] = -theta[v];
        }
    }
    let mut weights = Vec::with_capacity(m.edges.len());
    for e in &m.edges {
        match (flipped[e.i], flipped[e.j]) {
            (true, true) => {
                theta[e.i] -= e.w;
                theta[e.j] -= e.w;
                weights.push(e.w);
            }
            (true, false) => {
                theta[e.j] += e.w;
                weights.push(-e.w);
            }
            (false, true) => {
                theta[e.i] += e.w;
                weights.push(-e.w);
            }
            (false, false) => weights.push(e.w),
        }
    }
    let mut out = m.with_params(theta, weights, 0.0);
    out.energy_offset = m.energy_offset - out.energy(&flipped);
    out
}

/// One connected component, reindexed from 0, with the original indices of
/// its variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub model: Model,
    pub vars: Vec<usize>,
}

impl Component {
    /// `ln(1 + e^θ) - offset` for an isolated variable, `None` otherwise.
    pub fn closed_form_log_z(&self) -> Option<f64> {
        if self.model.n() == 1 && self.model.edges.is_empty() {
            Some(softplus(self.model.theta[0]) - self.model.energy_offset)
        } else {
            None
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Splits a model into connected components, ordered by smallest member.
/// Isolated variables become single-variable components. The whole energy
/// offset is assigned to the first component, so per-component
/// `log Z` (and `log Z_B`) values add up to the value of the full model.
pub fn split_components(m: &Model) -> Vec<Component> {
    let n = m.n();
    let mut comp = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut head = 0;
        while head < members.len() {
            let v = members[head];
            head += 1;
            for &(u, _) in &m.adjacency[v] {
                if comp[u] == usize::MAX {
                    comp[u] = id;
                    members.push(u);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }

    let mut local = vec![0; n];
    for g in &groups {
        for (k, &v) in g.iter().enumerate() {
            local[v] = k;
        }
    }
    let mut edge_groups: Vec<Vec<Edge>> = vec![Vec::new(); groups.len()];
    for e in &m.edges {
        edge_groups[comp[e.i]].push(Edge {
            i: local[e.i],
            j: local[e.j],
            w: e.w,
        });
    }
    groups
        .into_iter()
        .zip(edge_groups)
        .enumerate()
        .map(|(k, (vars, edges))| {
            let theta = vars.iter().map(|&v| m.theta[v]).collect();
            let offset = if k == 0 { m.energy_offset } else { 0.0 };
            Component {
                model: Model::new(theta, edges, offset).expect("sub-model of a valid model"),
                vars,
            }
        })
        .collect()
}

/// Iterates all `2^n` configurations (n ≤ 20) for tests and oracles.
pub fn configurations(n: usize) -> impl Iterator<Item = Vec<bool>> {
    assert!(n <= 20, "enumeration limited to 20 variables");
    (0u32..(1u32 << n)).map(move |bits| (0..n).map(|i| bits >> i & 1 == 1).collect())
}
