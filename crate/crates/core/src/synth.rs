//! Seeded synthetic panels with a known sparse lag-one coefficient.
//!
//! The differenced dynamics are `z_{t+1} = z_t ×B⋆ + m + e_t`, where `×B⋆`
//! contracts the `(entity, layer)` modes of `z_t` against the first two modes of
//! a sparse `(I, J, I, J)` tensor and `e_t ~ N(0, σ²)`. Log-levels are the
//! fractional integral of order `d` of that process, and the panel stores
//! `exp(log-level)`. Full-memory differencing of order `d` of the log panel
//! therefore returns `z + m` up to rounding.

use chrono::{Days, NaiveDate};
use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::panel::PanelSeries;
use crate::tensor::DenseTensor;

/// MA(∞) weights of `(1 - L)^{-d}`: `ψ_0 = 1`, `ψ_k = ψ_{k-1} (k - 1 + d) / k`.
pub fn integration_weights(d: f64, n: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(n);
    for k in 0..n {
        psi.push(if k == 0 {
            1.0
        } else {
            psi[k - 1] * ((k - 1) as f64 + d) / k as f64
        });
    }
    psi
}

/// `out_t = Σ_{k ≤ t} ψ_k x_{t-k}` by direct summation.
pub fn fractional_integrate(x: &[f64], d: f64) -> Vec<f64> {
    let psi = integration_weights(d, x.len());
    (0..x.len()).map(|t| (0..=t).map(|k| psi[k] * x[t - k]).sum()).collect()
}

/// ARFIMA(0, d, 0) series of length `len` with unit-variance innovations; the
/// first `len` generated values are discarded so the start-up transient is small.
pub fn arfima_series(len: usize, d: f64, rng: &mut impl Rng) -> Vec<f64> {
    let eps: Vec<f64> = (0..2 * len).map(|_| rng.sample(StandardNormal)).collect();
    fractional_integrate(&eps, d).split_off(len)
}

pub fn arfima_panel(n_series: usize, len: usize, d: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_series).map(|_| arfima_series(len, d, &mut rng)).collect()
}

/// Gaussian random walks started at zero.
pub fn random_walk_panel(n_series: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_series)
        .map(|_| {
            let mut level = 0.0;
            (0..len)
                .map(|_| {
                    level += rng.sample::<f64, _>(StandardNormal);
                    level
                })
                .collect()
        })
        .collect()
}

/// `(I, J, I, J)` tensor with exactly `support_per_block` nonzero entries in
/// every `(j, l)` block, each of random sign and magnitude uniform on `range`.
pub fn sparse_coefficient(
    n_entities: usize,
    n_layers: usize,
    support_per_block: usize,
    range: (f64, f64),
    rng: &mut impl Rng,
) -> Result<DenseTensor> {
    if support_per_block > n_entities * n_entities {
        return Err(Error::InvalidArgument(format!(
            "{support_per_block} nonzeros do not fit a {n_entities}×{n_entities} block"
        )));
    }
    if !(0.0 < range.0 && range.0 <= range.1) {
        return Err(Error::InvalidArgument(format!(
            "magnitude range {range:?} is not positive"
        )));
    }
    let (n, l) = (n_entities, n_layers);
    let mut b = DenseTensor::zeros(vec![n, l, n, l])?;
    for j in 0..l {
        for m in 0..l {
            for e in index::sample(rng, n * n, support_per_block) {
                let magnitude = rng.random_range(range.0..=range.1);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                b.set(&[e / n, j, e % n, m], sign * magnitude);
            }
        }
    }
    Ok(b)
}

/// Largest eigenvalue modulus of the `(IJ × IJ)` transition matrix.
pub fn spectral_radius(b: &DenseTensor) -> f64 {
    let s = b.shape();
    let p = s[0] * s[1];
    let m = DMatrix::from_row_slice(p, p, b.data());
    m.complex_eigenvalues().iter().fold(0.0f64, |r, c| r.max(c.norm()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_entities: usize,
    pub layer_labels: Vec<String>,
    pub n_steps: usize,
    pub support_per_block: usize,
    pub magnitude_range: (f64, f64),
    pub noise_sigma: f64,
    /// Order `d` of the fractional integration applied to the dynamics.
    pub integration_order: f64,
    /// `B⋆` is scaled down when its spectral radius exceeds this.
    pub max_spectral_radius: f64,
    /// Per-layer drift `m` of the differenced process.
    pub layer_drift: Vec<f64>,
    /// Steps simulated and discarded before the panel starts.
    pub warmup: usize,
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_entities: 10,
            layer_labels: ["iv10", "iv30", "price", "volume"].map(String::from).to_vec(),
            n_steps: 2000,
            support_per_block: 5,
            magnitude_range: (0.3, 0.6),
            noise_sigma: 0.1,
            integration_order: 0.2,
            max_spectral_radius: 0.9,
            layer_drift: vec![0.3, 0.3, 0.5, 1.0],
            warmup: 200,
            start_date: NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub panel: PanelSeries,
    /// The true `(I, J, I, J)` coefficient.
    pub coefficient: DenseTensor,
    /// The `(T, I, J)` differenced process `z + m` that the log panel integrates.
    pub differenced: DenseTensor,
}

pub fn entity_label(i: usize) -> String {
    format!("E{i:02}")
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticPanel> {
    let (n, l, t_len) = (spec.n_entities, spec.layer_labels.len(), spec.n_steps);
    if n == 0 || l == 0 || t_len < 2 {
        return Err(Error::InvalidArgument(
            "synthetic panel needs entities, layers and two steps".into(),
        ));
    }
    if spec.layer_drift.len() != l {
        return Err(Error::DimensionMismatch(format!(
            "{} drifts for {l} layers",
            spec.layer_drift.len()
        )));
    }
    let mut sorted = spec.layer_labels.clone();
    sorted.sort();
    sorted.dedup();
    if sorted != spec.layer_labels {
        return Err(Error::InvalidArgument("layer labels must be sorted and unique".into()));
    }
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidArgument(format!("noise sigma: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut b = sparse_coefficient(n, l, spec.support_per_block, spec.magnitude_range, &mut rng)?;
    let radius = spectral_radius(&b);
    if radius > spec.max_spectral_radius {
        let scale = spec.max_spectral_radius / radius;
        b = b.map(|v| v * scale);
    }

    let p = n * l;
    let bm = DMatrix::from_row_slice(p, p, b.data());
    let mut z = nalgebra::RowDVector::<f64>::zeros(p);
    let mut path = Vec::with_capacity(t_len * p);
    for step in 0..spec.warmup + t_len {
        let shock = nalgebra::RowDVector::from_fn(p, |_, _| noise.sample(&mut rng));
        z = &z * &bm + shock;
        if step >= spec.warmup {
            path.extend(z.iter().copied());
        }
    }
    let mut differenced = DenseTensor::new(vec![t_len, n, l], path)?;
    for (idx, v) in differenced.data_mut().iter_mut().enumerate() {
        *v += spec.layer_drift[idx % l];
    }

    let series: Vec<Vec<f64>> = (0..p)
        .map(|c| {
            let col: Vec<f64> = (0..t_len).map(|t| differenced.data()[t * p + c]).collect();
            fractional_integrate(&col, spec.integration_order)
                .into_iter()
                .map(f64::exp)
                .collect()
        })
        .collect();
    let dates = (0..t_len)
        .map(|t| {
            spec.start_date
                .checked_add_days(Days::new(t as u64))
                .map(|d| d.format("%Y-%m-%d").to_string())
                .ok_or_else(|| Error::InvalidArgument("date range overflows".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let panel = PanelSeries::from_series(
        dates,
        (0..n).map(entity_label).collect(),
        spec.layer_labels.clone(),
        &series,
    )?;
    Ok(SyntheticPanel {
        panel,
        coefficient: b,
        differenced,
    })
}
