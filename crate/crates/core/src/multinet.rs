//! Multilayer network assembled from a `(I, J, I, J)` coefficient tensor, and
//! the diagnostics computed on its filtered form.
//!
//! Block `(j, l)` holds the `I × I` matrix of effects from layer `j` at time
//! `t` onto layer `l` at `t + 1`: `block(j, l)[i][k] = B[i, j, k, l]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netfilter::{self, FilterMethod, WeightedDigraph};
use crate::tensor::DenseTensor;

/// One `n × n` row-major adjacency block with its filter state.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    weights: Vec<f64>,
    kept: Vec<bool>,
    /// NaN until a filter has been applied.
    p_values: Vec<f64>,
}

impl Block {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kept(&self) -> &[bool] {
        &self.kept
    }

    pub fn p_values(&self) -> &[f64] {
        &self.p_values
    }

    pub fn kept_count(&self) -> usize {
        self.kept.iter().filter(|&&k| k).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilayerNetwork {
    entity_labels: Vec<String>,
    layer_labels: Vec<String>,
    blocks: Vec<Block>,
}

impl MultilayerNetwork {
    /// Builds from explicit blocks, indexed `j * n_layers + l`, each row-major.
    pub fn from_parts(
        entity_labels: Vec<String>,
        layer_labels: Vec<String>,
        weights: Vec<Vec<f64>>,
        kept: Vec<Vec<bool>>,
        p_values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = entity_labels.len();
        let l = layer_labels.len();
        if n == 0 || l == 0 {
            return Err(Error::InvalidShape("network needs entities and layers".into()));
        }
        if weights.len() != l * l || kept.len() != l * l || p_values.len() != l * l {
            return Err(Error::DimensionMismatch(format!(
                "expected {} blocks for {l} layers",
                l * l
            )));
        }
        let mut blocks = Vec::with_capacity(l * l);
        for ((w, k), p) in weights.into_iter().zip(kept).zip(p_values) {
            if w.len() != n * n || k.len() != n * n || p.len() != n * n {
                return Err(Error::DimensionMismatch(format!(
                    "block must hold {} entries for {n} entities",
                    n * n
                )));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("block weights".into()));
            }
            blocks.push(Block {
                weights: w,
                kept: k,
                p_values: p,
            });
        }
        Ok(MultilayerNetwork {
            entity_labels,
            layer_labels,
            blocks,
        })
    }

    pub fn n_entities(&self) -> usize {
        self.entity_labels.len()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_labels.len()
    }

    pub fn entity_labels(&self) -> &[String] {
        &self.entity_labels
    }

    pub fn layer_labels(&self) -> &[String] {
        &self.layer_labels
    }

    pub fn block(&self, from_layer: usize, to_layer: usize) -> &Block {
        &self.blocks[from_layer * self.n_layers() + to_layer]
    }

    pub fn weight(&self, from_layer: usize, to_layer: usize, src: usize, dst: usize) -> f64 {
        self.block(from_layer, to_layer).weights[src * self.n_entities() + dst]
    }

    pub fn is_kept(&self, from_layer: usize, to_layer: usize, src: usize, dst: usize) -> bool {
        self.block(from_layer, to_layer).kept[src * self.n_entities() + dst]
    }

    pub fn p_value(&self, from_layer: usize, to_layer: usize, src: usize, dst: usize) -> f64 {
        self.block(from_layer, to_layer).p_values[src * self.n_entities() + dst]
    }

    /// Kept-edge counts, indexed `[from_layer][to_layer]`.
    pub fn kept_counts(&self) -> Vec<Vec<usize>> {
        let l = self.n_layers();
        (0..l)
            .map(|j| (0..l).map(|m| self.block(j, m).kept_count()).collect())
            .collect()
    }

    pub fn total_kept(&self) -> usize {
        self.blocks.iter().map(Block::kept_count).sum()
    }

    /// Rebuilds the `(I, J, I, J)` coefficient tensor.
    pub fn to_coefficient(&self) -> DenseTensor {
        let (n, l) = (self.n_entities(), self.n_layers());
        DenseTensor::from_fn(vec![n, l, n, l], |ix| self.weight(ix[1], ix[3], ix[0], ix[2])).expect("non-empty network")
    }

    /// Visits every kept edge as `(from_layer, to_layer, src, dst, weight)`.
    pub fn kept_edges(&self) -> impl Iterator<Item = (usize, usize, usize, usize, f64)> + '_ {
        let (n, l) = (self.n_entities(), self.n_layers());
        (0..l * l).flat_map(move |b| {
            let (j, m) = (b / l, b % l);
            let block = &self.blocks[b];
            (0..n * n)
                .filter(move |&e| block.kept[e])
                .map(move |e| (j, m, e / n, e % n, block.weights[e]))
        })
    }
}

/// `block(j, l)[i][k] = B[i, j, k, l]`, all edges initially kept.
pub fn from_coefficient(
    b: &DenseTensor,
    entity_labels: Vec<String>,
    layer_labels: Vec<String>,
) -> Result<MultilayerNetwork> {
    let s = b.shape();
    if s.len() != 4 || s[0] != s[2] || s[1] != s[3] {
        return Err(Error::DimensionMismatch(format!(
            "coefficient of shape {s:?} is not (I, J, I, J)"
        )));
    }
    let (n, l) = (s[0], s[1]);
    if entity_labels.len() != n || layer_labels.len() != l {
        return Err(Error::DimensionMismatch(format!(
            "{} entity and {} layer labels for a ({n}, {l}, {n}, {l}) coefficient",
            entity_labels.len(),
            layer_labels.len()
        )));
    }
    let mut weights = Vec::with_capacity(l * l);
    for j in 0..l {
        for m in 0..l {
            let mut w = Vec::with_capacity(n * n);
            for i in 0..n {
                for k in 0..n {
                    w.push(b.get(&[i, j, k, m]));
                }
            }
            weights.push(w);
        }
    }
    MultilayerNetwork::from_parts(
        entity_labels,
        layer_labels,
        weights,
        vec![vec![true; n * n]; l * l],
        vec![vec![f64::NAN; n * n]; l * l],
    )
}

/// Filters every layer-pair block as an independent digraph (self-loops included).
pub fn apply_filter(
    net: &MultilayerNetwork,
    method: FilterMethod,
    retain_fraction: f64,
    a: f64,
) -> Result<MultilayerNetwork> {
    let n = net.n_entities();
    let filter_block = |block: &Block| -> Result<Block> {
        let g = WeightedDigraph::from_dense(n, &block.weights)?;
        let r = netfilter::filter(&g, method, retain_fraction, a)?;
        Ok(Block {
            weights: block.weights.clone(),
            kept: r.kept,
            p_values: r.p_values,
        })
    };
    #[cfg(feature = "parallel")]
    let blocks: Vec<Block> = {
        use rayon::prelude::*;
        net.blocks.par_iter().map(filter_block).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let blocks: Vec<Block> = net.blocks.iter().map(filter_block).collect::<Result<_>>()?;
    Ok(MultilayerNetwork {
        entity_labels: net.entity_labels.clone(),
        layer_labels: net.layer_labels.clone(),
        blocks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerMatrixKind {
    Assortativity,
    Overlap,
}

/// Square layer-by-layer matrix. Undefined assortativity entries are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMatrix {
    pub kind: LayerMatrixKind,
    pub values: Vec<Vec<f64>>,
}

impl LayerMatrix {
    pub fn get(&self, j: usize, l: usize) -> Option<f64> {
        let v = self.values[j][l];
        (!v.is_nan()).then_some(v)
    }
}

/// Per-entity total (in + out) degree on the kept intra-layer edges of `layer`,
/// self-loops excluded.
pub fn intra_layer_degrees(net: &MultilayerNetwork, layer: usize) -> Vec<usize> {
    let n = net.n_entities();
    let block = net.block(layer, layer);
    let mut deg = vec![0; n];
    for i in 0..n {
        for k in 0..n {
            if i != k && block.kept[i * n + k] {
                deg[i] += 1;
                deg[k] += 1;
            }
        }
    }
    deg
}

/// Pearson correlation; `None` when either sequence is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Inter-layer assortativity: correlation of intra-layer degree sequences.
pub fn assortativity_matrix(net: &MultilayerNetwork) -> LayerMatrix {
    let l = net.n_layers();
    let degrees: Vec<Vec<f64>> = (0..l)
        .map(|j| intra_layer_degrees(net, j).into_iter().map(|d| d as f64).collect())
        .collect();
    let mut values = vec![vec![f64::NAN; l]; l];
    for j in 0..l {
        for m in j..l {
            let v = if j == m {
                pearson(&degrees[j], &degrees[j]).map(|_| 1.0)
            } else {
                pearson(&degrees[j], &degrees[m])
            }
            .unwrap_or(f64::NAN);
            values[j][m] = v;
            values[m][j] = v;
        }
    }
    LayerMatrix {
        kind: LayerMatrixKind::Assortativity,
        values,
    }
}

/// Ordered entity pairs `(i, k)`, `i != k`, kept in both intra-layer blocks.
/// With `normalize`, each count is divided by the size of the union.
#[allow(clippy::needless_range_loop)]
pub fn edge_overlap_matrix(net: &MultilayerNetwork, normalize: bool) -> LayerMatrix {
    let (n, l) = (net.n_entities(), net.n_layers());
    let mut values = vec![vec![0.0; l]; l];
    for j in 0..l {
        for m in j..l {
            let (bj, bm) = (net.block(j, j), net.block(m, m));
            let (mut both, mut either) = (0usize, 0usize);
            for i in 0..n {
                for k in 0..n {
                    if i == k {
                        continue;
                    }
                    let (a, b) = (bj.kept[i * n + k], bm.kept[i * n + k]);
                    both += (a && b) as usize;
                    either += (a || b) as usize;
                }
            }
            let v = if normalize {
                if either == 0 {
                    0.0
                } else {
                    both as f64 / either as f64
                }
            } else {
                both as f64
            };
            values[j][m] = v;
            values[m][j] = v;
        }
    }
    LayerMatrix {
        kind: LayerMatrixKind::Overlap,
        values,
    }
}

/// Sum of `|weight|` over kept edges touching each node, indexed
/// `[entity][layer]`. A self-loop counts once.
pub fn node_strength(net: &MultilayerNetwork) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; net.n_layers()]; net.n_entities()];
    for (j, m, i, k, w) in net.kept_edges() {
        s[i][j] += w.abs();
        if (i, j) != (k, m) {
            s[k][m] += w.abs();
        }
    }
    s
}

/// Undirected simple adjacency over nodes `entity * n_layers + layer`.
fn projection(net: &MultilayerNetwork) -> Vec<Vec<usize>> {
    let l = net.n_layers();
    let n_nodes = net.n_entities() * l;
    let mut adj = vec![Vec::new(); n_nodes];
    for (j, m, i, k, _) in net.kept_edges() {
        let (u, v) = (i * l + j, k * l + m);
        if u != v {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Core number of every node of an undirected simple graph (bucket peeling).
pub fn core_numbers(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let max_deg = degree.iter().copied().max().unwrap_or(0);
    let mut bin = vec![0usize; max_deg + 1];
    for &d in &degree {
        bin[d] += 1;
    }
    let mut start = 0;
    for b in bin.iter_mut() {
        let count = *b;
        *b = start;
        start += count;
    }
    let mut pos = vec![0usize; n];
    let mut vert = vec![0usize; n];
    for v in 0..n {
        pos[v] = bin[degree[v]];
        vert[pos[v]] = v;
        bin[degree[v]] += 1;
    }
    for d in (1..=max_deg).rev() {
        bin[d] = bin[d - 1];
    }
    bin[0] = 0;
    for i in 0..n {
        let v = vert[i];
        for &u in &adj[v] {
            if degree[u] > degree[v] {
                let du = degree[u];
                let pu = pos[u];
                let pw = bin[du];
                let w = vert[pw];
                if u != w {
                    pos[u] = pw;
                    vert[pu] = w;
                    pos[w] = pu;
                    vert[pw] = u;
                }
                bin[du] += 1;
                degree[u] -= 1;
            }
        }
    }
    degree
}

/// k-coreness on the binarized, undirected projection of the whole multilayer
/// graph, indexed `[entity][layer]`.
pub fn k_coreness(net: &MultilayerNetwork) -> Vec<Vec<usize>> {
    let l = net.n_layers();
    let cores = core_numbers(&projection(net));
    cores.chunks(l).map(<[usize]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn single_entry_lands_in_its_block() {
        let mut b = DenseTensor::zeros(vec![3, 4, 3, 4]).unwrap();
        b.set(&[0, 1, 2, 3], 5.0);
        let net = from_coefficient(&b, labels("e", 3), labels("l", 4)).unwrap();
        assert_eq!(net.weight(1, 3, 0, 2), 5.0);
        let total: f64 = net
            .blocks
            .iter()
            .flat_map(|bl| bl.weights.iter())
            .map(|v| v.abs())
            .sum();
        assert_eq!(total, 5.0);
        assert!(net.blocks.iter().all(|bl| bl.kept.iter().all(|&k| k)));
    }

    #[test]
    fn shape_and_label_mismatch() {
        let b = DenseTensor::zeros(vec![3, 2, 2, 2]).unwrap();
        assert!(from_coefficient(&b, labels("e", 3), labels("l", 2)).is_err());
        let b = DenseTensor::zeros(vec![2, 2, 2, 2]).unwrap();
        assert!(from_coefficient(&b, labels("e", 3), labels("l", 2)).is_err());
    }

    #[test]
    fn symmetric_coefficient_gives_symmetric_blocks() {
        let b = DenseTensor::from_fn(vec![3, 2, 3, 2], |ix| {
            let (lo, hi) = (ix[0].min(ix[2]), ix[0].max(ix[2]));
            (lo * 7 + hi * 3 + ix[1] * 11 + ix[3] * 13) as f64
        })
        .unwrap();
        let net = from_coefficient(&b, labels("e", 3), labels("l", 2)).unwrap();
        for j in 0..2 {
            for m in 0..2 {
                for i in 0..3 {
                    for k in 0..3 {
                        assert_eq!(net.weight(j, m, i, k), net.weight(j, m, k, i));
                    }
                }
            }
        }
    }

    #[test]
    fn pearson_extremes() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), Some(1.0));
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
    }

    #[test]
    fn core_numbers_small_graphs() {
        // path 0-1-2 plus isolated 3
        let adj = vec![vec![1], vec![0, 2], vec![1], vec![]];
        assert_eq!(core_numbers(&adj), vec![1, 1, 1, 0]);
        // K4
        let k4: Vec<Vec<usize>> = (0..4).map(|v| (0..4).filter(|&u| u != v).collect()).collect();
        assert_eq!(core_numbers(&k4), vec![3; 4]);
        assert!(core_numbers(&[]).is_empty());
    }
}
