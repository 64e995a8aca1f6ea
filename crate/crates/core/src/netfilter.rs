//! Statistical sparsification of dense directed weighted graphs.
//!
//! Under the Pólya-urn null a node distributes its strength `s` over its `k`
//! edges by a reinforced urn with parameter `a`. The share of one edge then
//! follows `Beta(1/a, (k-1)/a)`, and the weight on that edge is binomial given
//! the share. The survival function
//!
//! ```text
//! P(W >= w) = E_p[ I_p(w, s - w + 1) ],   p ~ Beta(1/a, (k-1)/a)
//! ```
//!
//! equals the Beta-Binomial tail for integer `w` and `s`, and extends it to real
//! weights through the regularized incomplete Beta function. As `a -> 0` the
//! share collapses onto `1/k` and the binomial tail is recovered.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::beta::checked_beta_reg;

use crate::error::{Error, Result};

/// Gauss-Jacobi nodes used to integrate over the share distribution. The
/// rule is exact for integer weights when `s < 2 * QUADRATURE_NODES`.
const QUADRATURE_NODES: usize = 96;

/// Below this reinforcement the share distribution is a point mass at `1/k`
/// to double precision.
const BINOMIAL_LIMIT_A: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    n_nodes: usize,
    edges: Vec<Edge>,
}

impl WeightedDigraph {
    pub fn new(n_nodes: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for e in &edges {
            if e.source >= n_nodes || e.target >= n_nodes {
                return Err(Error::InvalidArgument(format!(
                    "edge ({}, {}) out of range for {n_nodes} nodes",
                    e.source, e.target
                )));
            }
            if !e.weight.is_finite() {
                return Err(Error::NonFinite(format!("weight of edge ({}, {})", e.source, e.target)));
            }
            if !seen.insert((e.source, e.target)) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate edge ({}, {})",
                    e.source, e.target
                )));
            }
        }
        Ok(WeightedDigraph { n_nodes, edges })
    }

    /// Every ordered pair (including self-loops) of an `n × n` row-major matrix.
    pub fn from_dense(n_nodes: usize, weights: &[f64]) -> Result<Self> {
        if weights.len() != n_nodes * n_nodes {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {n_nodes} nodes",
                weights.len()
            )));
        }
        let edges = (0..n_nodes)
            .flat_map(|i| (0..n_nodes).map(move |k| (i, k)))
            .map(|(i, k)| Edge {
                source: i,
                target: k,
                weight: weights[i * n_nodes + k],
            })
            .collect();
        WeightedDigraph::new(n_nodes, edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMethod {
    Polya,
    HardThreshold,
}

impl std::str::FromStr for FilterMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polya" => Ok(FilterMethod::Polya),
            "hard" | "hard_threshold" => Ok(FilterMethod::HardThreshold),
            other => Err(Error::InvalidArgument(format!(
                "unknown filter method {other:?} (expected polya or hard)"
            ))),
        }
    }
}

impl std::fmt::Display for FilterMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FilterMethod::Polya => "polya",
            FilterMethod::HardThreshold => "hard",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    /// Aligned with `WeightedDigraph::edges`.
    pub p_values: Vec<f64>,
    pub kept: Vec<bool>,
    /// Largest kept p-value (Pólya) or smallest kept `|weight|` (hard).
    pub threshold_used: f64,
    pub method: FilterMethod,
}

impl FilterResult {
    pub fn kept_count(&self) -> usize {
        self.kept.iter().filter(|&&k| k).count()
    }
}

/// Share distribution `Beta(1/a, (k-1)/a)` as a quadrature rule on `[0, 1]`.
#[derive(Debug, Clone)]
struct ShareLaw {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ShareLaw {
    fn new(k: usize, a: f64) -> ShareLaw {
        if a <= BINOMIAL_LIMIT_A {
            return ShareLaw {
                nodes: vec![1.0 / k as f64],
                weights: vec![1.0],
            };
        }
        gauss_jacobi_beta(1.0 / a, (k as f64 - 1.0) / a, QUADRATURE_NODES)
    }

    fn survival(&self, w: f64, s: f64) -> f64 {
        let b = s - w + 1.0;
        let p: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &wt)| wt * checked_beta_reg(w, b, x).unwrap_or(if x >= 1.0 { 1.0 } else { 0.0 }))
            .sum();
        p.clamp(0.0, 1.0)
    }
}

/// Golub-Welsch rule for the `Beta(alpha, beta)` probability measure.
fn gauss_jacobi_beta(alpha: f64, beta: f64, n: usize) -> ShareLaw {
    // Jacobi weight (1-x)^pa (1+x)^pb on [-1, 1], mapped by p = (1 + x) / 2.
    let pa = beta - 1.0;
    let pb = alpha - 1.0;
    let s = pa + pb;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    jac[(0, 0)] = (pb - pa) / (s + 2.0);
    for i in 1..n {
        let nf = i as f64;
        let t = 2.0 * nf + s;
        jac[(i, i)] = (pb * pb - pa * pa) / (t * (t + 2.0));
        let b2 = if i == 1 {
            4.0 * (1.0 + pa) * (1.0 + pb) / ((2.0 + s) * (2.0 + s) * (3.0 + s))
        } else {
            4.0 * nf * (nf + pa) * (nf + pb) * (nf + s) / (t * t * (t + 1.0) * (t - 1.0))
        };
        let b = b2.sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = jac.symmetric_eigen();
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (((1.0 + eig.eigenvalues[j]) * 0.5).clamp(0.0, 1.0), v0 * v0)
        })
        .collect();
    rule.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total: f64 = rule.iter().map(|r| r.1).sum();
    ShareLaw {
        nodes: rule.iter().map(|r| r.0).collect(),
        weights: rule.iter().map(|r| r.1 / total).collect(),
    }
}

fn check_pvalue_args(w: f64, s: f64, k: usize, a: f64) -> Result<()> {
    if !(w >= 0.0 && w.is_finite()) || !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "weight {w} and strength {s} must be finite and nonnegative"
        )));
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "reinforcement a = {a} must be nonnegative"
        )));
    }
    if k < 1 {
        return Err(Error::InvalidArgument("degree k must be at least 1".into()));
    }
    if w > s {
        return Err(Error::InvalidArgument(format!("weight {w} exceeds strength {s}")));
    }
    Ok(())
}

/// Probability that one of `k` edges sharing strength `s` carries weight at
/// least `w` under the Pólya urn with reinforcement `a`.
pub fn polya_pvalue(w: f64, s: f64, k: usize, a: f64) -> Result<f64> {
    check_pvalue_args(w, s, k, a)?;
    if w == 0.0 || k == 1 {
        return Ok(1.0);
    }
    Ok(ShareLaw::new(k, a).survival(w, s))
}

/// Number of edges kept for a retention fraction: `round(f n)`, at least one.
pub fn retained_count(total: usize, retain_fraction: f64) -> usize {
    ((retain_fraction * total as f64).round() as usize).clamp(1, total)
}

fn check_retain(g: &WeightedDigraph, retain_fraction: f64) -> Result<()> {
    if !(retain_fraction > 0.0 && retain_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "retain fraction {retain_fraction} outside (0, 1]"
        )));
    }
    if g.edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    Ok(())
}

/// p-values of every edge from one endpoint's perspective. Weights are
/// rescaled so the node's mean edge weight is one, making the test depend on
/// weight shares only.
fn perspective_pvalues(
    g: &WeightedDigraph,
    a: f64,
    endpoint: impl Fn(&Edge) -> usize,
    laws: &mut HashMap<usize, ShareLaw>,
) -> Vec<f64> {
    let mut strength = vec![0.0; g.n_nodes];
    let mut degree = vec![0usize; g.n_nodes];
    for e in &g.edges {
        strength[endpoint(e)] += e.weight.abs();
        degree[endpoint(e)] += 1;
    }
    g.edges
        .iter()
        .map(|e| {
            let node = endpoint(e);
            let (s, k) = (strength[node], degree[node]);
            let w = e.weight.abs();
            if k <= 1 || w == 0.0 || s == 0.0 {
                return 1.0;
            }
            let kf = k as f64;
            let w_norm = (w * kf / s).min(kf);
            laws.entry(k)
                .or_insert_with(|| ShareLaw::new(k, a))
                .survival(w_norm, kf)
        })
        .collect()
}

/// Per-edge Pólya p-value: the smaller of the source (out-strength) and target
/// (in-strength) perspectives, computed on `|weight|`.
pub fn polya_edge_pvalues(g: &WeightedDigraph, a: f64) -> Result<Vec<f64>> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "reinforcement a = {a} must be nonnegative"
        )));
    }
    let mut laws = HashMap::new();
    let out = perspective_pvalues(g, a, |e| e.source, &mut laws);
    let inn = perspective_pvalues(g, a, |e| e.target, &mut laws);
    Ok(out.into_iter().zip(inn).map(|(p, q)| p.min(q)).collect())
}

fn lexicographic(e: &Edge) -> (usize, usize) {
    (e.source, e.target)
}

/// Keeps the `retain_fraction` of edges with the smallest Pólya p-values.
/// Ties go to the larger `|weight|`, then to the lexicographically smaller
/// `(source, target)`.
pub fn polya_filter(g: &WeightedDigraph, a: f64, retain_fraction: f64) -> Result<FilterResult> {
    check_retain(g, retain_fraction)?;
    let p_values = polya_edge_pvalues(g, a)?;
    let mut order: Vec<usize> = (0..g.edges.len()).collect();
    order.sort_by(|&x, &y| {
        let (ex, ey) = (&g.edges[x], &g.edges[y]);
        p_values[x]
            .total_cmp(&p_values[y])
            .then(ey.weight.abs().total_cmp(&ex.weight.abs()))
            .then(lexicographic(ex).cmp(&lexicographic(ey)))
    });
    let n_keep = retained_count(order.len(), retain_fraction);
    let mut kept = vec![false; order.len()];
    for &i in &order[..n_keep] {
        kept[i] = true;
    }
    Ok(FilterResult {
        threshold_used: p_values[order[n_keep - 1]],
        p_values,
        kept,
        method: FilterMethod::Polya,
    })
}

/// Keeps the `retain_fraction` of edges with the largest `|weight|`, ties by
/// `(source, target)`. The reported p-value of an edge is the fraction of
/// edges at least as heavy.
pub fn hard_threshold_filter(g: &WeightedDigraph, retain_fraction: f64) -> Result<FilterResult> {
    check_retain(g, retain_fraction)?;
    let n = g.edges.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        let (ex, ey) = (&g.edges[x], &g.edges[y]);
        ey.weight
            .abs()
            .total_cmp(&ex.weight.abs())
            .then(lexicographic(ex).cmp(&lexicographic(ey)))
    });
    let mut p_values = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let w = g.edges[order[start]].weight.abs();
        let mut end = start;
        while end < n && g.edges[order[end]].weight.abs() == w {
            end += 1;
        }
        for &i in &order[start..end] {
            p_values[i] = end as f64 / n as f64;
        }
        start = end;
    }
    let n_keep = retained_count(n, retain_fraction);
    let mut kept = vec![false; n];
    for &i in &order[..n_keep] {
        kept[i] = true;
    }
    Ok(FilterResult {
        threshold_used: g.edges[order[n_keep - 1]].weight.abs(),
        p_values,
        kept,
        method: FilterMethod::HardThreshold,
    })
}

pub fn filter(g: &WeightedDigraph, method: FilterMethod, retain_fraction: f64, a: f64) -> Result<FilterResult> {
    match method {
        FilterMethod::Polya => polya_filter(g, a, retain_fraction),
        FilterMethod::HardThreshold => hard_threshold_filter(g, retain_fraction),
    }
}
