//! Independent reference implementations used as test oracles. Everything
//! here is written with plain loops over explicit indices and shares no code
//! with the library beyond the data types.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tarnet::multinet::MultilayerNetwork;
use tarnet::tensor::DenseTensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> DenseTensor {
    let n = shape.iter().product();
    DenseTensor::new(shape.to_vec(), gaussian_vec(n, rng)).unwrap()
}

/// Row-major nested vector `rows × cols`.
pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..rows).map(|_| gaussian_vec(cols, rng)).collect()
}

pub fn to_dmatrix(m: &[Vec<f64>]) -> nalgebra::DMatrix<f64> {
    let cols = m.first().map_or(0, Vec::len);
    nalgebra::DMatrix::from_fn(m.len(), cols, |r, c| m[r][c])
}

/// All multi-indices of `shape` in row-major order.
pub fn multi_indices(shape: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &extent in shape {
        let mut next = Vec::new();
        for prefix in &out {
            for i in 0..extent {
                let mut ix = prefix.clone();
                ix.push(i);
                next.push(ix);
            }
        }
        out = next;
    }
    out
}

pub fn at(t: &DenseTensor, ix: &[usize]) -> f64 {
    let mut off = 0;
    for (d, &i) in ix.iter().enumerate() {
        off = off * t.shape()[d] + i;
    }
    t.data()[off]
}

/// Mode-`m` unfolding by explicit enumeration: columns walk the modes
/// `m+1, …, D-1, 0, …, m-1` with the last listed mode fastest.
pub fn unfold_oracle(t: &DenseTensor, m: usize) -> Vec<Vec<f64>> {
    let shape = t.shape();
    let d = shape.len();
    let order: Vec<usize> = (m + 1..d).chain(0..m).collect();
    let cols: usize = order.iter().map(|&q| shape[q]).product();
    let mut out = vec![vec![0.0; cols]; shape[m]];
    for ix in multi_indices(shape) {
        let mut col = 0;
        for &q in &order {
            col = col * shape[q] + ix[q];
        }
        out[ix[m]][col] = at(t, &ix);
    }
    out
}

/// `out[…, r, …] = Σ_c M[r][c] T[…, c, …]`.
pub fn mode_multiply_oracle(t: &DenseTensor, m: &[Vec<f64>], mode: usize) -> DenseTensor {
    let mut shape = t.shape().to_vec();
    let inner = shape[mode];
    shape[mode] = m.len();
    let data = multi_indices(&shape)
        .into_iter()
        .map(|ix| {
            let mut acc = 0.0;
            for c in 0..inner {
                let mut src = ix.clone();
                src[mode] = c;
                acc += m[ix[mode]][c] * at(t, &src);
            }
            acc
        })
        .collect();
    DenseTensor::new(shape, data).unwrap()
}

/// Contraction by enumerating the free and the paired index spaces.
pub fn contract_oracle(x: &DenseTensor, b: &DenseTensor, xm: &[usize], bm: &[usize]) -> DenseTensor {
    let x_free: Vec<usize> = (0..x.order()).filter(|q| !xm.contains(q)).collect();
    let b_free: Vec<usize> = (0..b.order()).filter(|q| !bm.contains(q)).collect();
    let mut shape: Vec<usize> = x_free.iter().map(|&q| x.shape()[q]).collect();
    shape.extend(b_free.iter().map(|&q| b.shape()[q]));
    let paired_shape: Vec<usize> = xm.iter().map(|&q| x.shape()[q]).collect();
    let paired = multi_indices(&paired_shape);
    let data = multi_indices(&shape)
        .into_iter()
        .map(|ix| {
            let mut acc = 0.0;
            for p in &paired {
                let mut xi = vec![0; x.order()];
                let mut bi = vec![0; b.order()];
                for (n, &q) in x_free.iter().enumerate() {
                    xi[q] = ix[n];
                }
                for (n, &q) in b_free.iter().enumerate() {
                    bi[q] = ix[x_free.len() + n];
                }
                for (n, (&qx, &qb)) in xm.iter().zip(bm).enumerate() {
                    xi[qx] = p[n];
                    bi[qb] = p[n];
                }
                acc += at(x, &xi) * at(b, &bi);
            }
            acc
        })
        .collect();
    DenseTensor::new(if shape.is_empty() { vec![1] } else { shape }, data).unwrap()
}

/// `Σ_r core[r] Π_d U_d[i_d][r_d]`.
pub fn tucker_oracle(core: &DenseTensor, factors: &[Vec<Vec<f64>>]) -> DenseTensor {
    let shape: Vec<usize> = factors.iter().map(Vec::len).collect();
    let core_ix = multi_indices(core.shape());
    let data = multi_indices(&shape)
        .into_iter()
        .map(|ix| {
            core_ix
                .iter()
                .map(|r| {
                    let mut v = at(core, r);
                    for d in 0..ix.len() {
                        v *= factors[d][ix[d]][r[d]];
                    }
                    v
                })
                .sum()
        })
        .collect();
    DenseTensor::new(shape, data).unwrap()
}

/// Generalised binomial coefficient weights `(-1)^k C(α, k)` via Gamma ratios.
pub fn binomial_weight_oracle(alpha: f64, k: usize) -> f64 {
    use statrs::function::gamma::gamma;
    // (-1)^k C(α, k) = Γ(k - α) / (Γ(-α) Γ(k + 1)), valid for non-integer α.
    gamma(k as f64 - alpha) / (gamma(-alpha) * gamma(k as f64 + 1.0))
}

pub fn direct_fracdiff(x: &[f64], alpha: f64) -> Vec<f64> {
    let mut w = vec![1.0];
    for k in 1..x.len() {
        let prev = w[k - 1];
        w.push(prev * (k as f64 - 1.0 - alpha) / k as f64);
    }
    (0..x.len()).map(|t| (0..=t).map(|k| w[k] * x[t - k]).sum()).collect()
}

fn ln_choose(n: u64, k: u64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `P(X ≥ w)` for `X ~ Binomial(s, p)` by summing the pmf.
pub fn binomial_sf(w: u64, s: u64, p: f64) -> f64 {
    (w..=s)
        .map(|x| (ln_choose(s, x) + x as f64 * p.ln() + (s - x) as f64 * (1.0 - p).ln()).exp())
        .sum()
}

/// `P(X ≥ w)` for the Beta-Binomial with shape `(1/a, (k-1)/a)`, summing the pmf.
pub fn beta_binomial_sf(w: u64, s: u64, k: usize, a: f64) -> f64 {
    use statrs::function::beta::ln_beta;
    let (al, be) = (1.0 / a, (k as f64 - 1.0) / a);
    (w..=s)
        .map(|x| (ln_choose(s, x) + ln_beta(x as f64 + al, (s - x) as f64 + be) - ln_beta(al, be)).exp())
        .sum()
}

/// Solves `A x = b` (square) by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_solve(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let mut aug: Vec<Vec<f64>> = (0..n).map(|i| a[i].iter().chain(&b[i]).copied().collect()).collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        let d = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for c in 0..n + m {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    aug.into_iter().map(|row| row[n..].to_vec()).collect()
}

/// Ridge coefficient on centred sample-mode unfoldings, via normal equations.
pub fn ridge_oracle(x: &DenseTensor, y: &DenseTensor, lambda: f64) -> Vec<Vec<f64>> {
    let n = x.shape()[0];
    let p = x.len() / n;
    let q = y.len() / n;
    let center = |t: &DenseTensor, w: usize| -> Vec<Vec<f64>> {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| t.data()[i * w..(i + 1) * w].to_vec()).collect();
        let mean: Vec<f64> = (0..w)
            .map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n as f64)
            .collect();
        rows.into_iter()
            .map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect())
            .collect()
    };
    let xc = center(x, p);
    let yc = center(y, q);
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![vec![0.0; q]; p];
    for i in 0..n {
        for a in 0..p {
            for b in 0..p {
                xtx[a][b] += xc[i][a] * xc[i][b];
            }
            for c in 0..q {
                xty[a][c] += xc[i][a] * yc[i][c];
            }
        }
    }
    for (a, row) in xtx.iter_mut().enumerate() {
        row[a] += lambda;
    }
    gauss_solve(&xtx, &xty)
}

pub fn frob_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

pub fn pearson_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    let cov = n * sxy - sx * sy;
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx <= 0.0 || vy <= 0.0 {
        None
    } else {
        Some(cov / (vx * vy).sqrt())
    }
}

/// Intra-layer kept-edge total degree, self-loops ignored.
pub fn degree_oracle(net: &MultilayerNetwork, layer: usize) -> Vec<f64> {
    let n = net.n_entities();
    (0..n)
        .map(|v| {
            let mut d = 0;
            for u in 0..n {
                if u != v && net.is_kept(layer, layer, v, u) {
                    d += 1;
                }
                if u != v && net.is_kept(layer, layer, u, v) {
                    d += 1;
                }
            }
            d as f64
        })
        .collect()
}

pub fn overlap_oracle(net: &MultilayerNetwork, j: usize, l: usize, normalize: bool) -> f64 {
    let n = net.n_entities();
    let (mut both, mut either) = (0usize, 0usize);
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let a = net.is_kept(j, j, i, k);
            let b = net.is_kept(l, l, i, k);
            both += (a && b) as usize;
            either += (a || b) as usize;
        }
    }
    if !normalize {
        both as f64
    } else if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

/// `[entity][layer]` sum of |w| over kept edges touching the node.
pub fn strength_oracle(net: &MultilayerNetwork) -> Vec<Vec<f64>> {
    let (n, l) = (net.n_entities(), net.n_layers());
    let mut s = vec![vec![0.0; l]; n];
    for j in 0..l {
        for m in 0..l {
            for i in 0..n {
                for k in 0..n {
                    if net.is_kept(j, m, i, k) {
                        let w = net.weight(j, m, i, k).abs();
                        s[i][j] += w;
                        if (i, j) != (k, m) {
                            s[k][m] += w;
                        }
                    }
                }
            }
        }
    }
    s
}

/// Core numbers by repeated deletion: for k = 1, 2, … strip nodes of degree
/// below k until none remain; a node's core is the last k it survived.
pub fn naive_core_numbers(adj: &[Vec<bool>]) -> Vec<usize> {
    let n = adj.len();
    let mut core = vec![0; n];
    let mut k = 1;
    // The (k+1)-core sits inside the k-core, so survivors carry over.
    let mut alive = vec![true; n];
    loop {
        loop {
            let mut changed = false;
            for v in 0..n {
                if alive[v] {
                    let deg = (0..n).filter(|&u| u != v && alive[u] && adj[v][u]).count();
                    if deg < k {
                        alive[v] = false;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if !alive.iter().any(|&a| a) {
            return core;
        }
        for v in 0..n {
            if alive[v] {
                core[v] = k;
            }
        }
        k += 1;
    }
}

/// Undirected simple projection of the whole multilayer graph; node `i * L + j`.
pub fn projection_oracle(net: &MultilayerNetwork) -> Vec<Vec<bool>> {
    let (n, l) = (net.n_entities(), net.n_layers());
    let mut adj = vec![vec![false; n * l]; n * l];
    for j in 0..l {
        for m in 0..l {
            for i in 0..n {
                for k in 0..n {
                    let (u, v) = (i * l + j, k * l + m);
                    if u != v && net.is_kept(j, m, i, k) {
                        adj[u][v] = true;
                        adj[v][u] = true;
                    }
                }
            }
        }
    }
    adj
}

/// Random network with i.i.d. Gaussian weights and Bernoulli(`density`) masks.
pub fn random_network(n: usize, l: usize, density: f64, rng: &mut impl Rng) -> MultilayerNetwork {
    let weights: Vec<Vec<f64>> = (0..l * l).map(|_| gaussian_vec(n * n, rng)).collect();
    let kept: Vec<Vec<bool>> = (0..l * l)
        .map(|_| (0..n * n).map(|_| rng.random_bool(density)).collect())
        .collect();
    MultilayerNetwork::from_parts(
        (0..n).map(|i| format!("e{i}")).collect(),
        (0..l).map(|j| format!("L{j}")).collect(),
        weights,
        kept,
        vec![vec![f64::NAN; n * n]; l * l],
    )
    .unwrap()
}
