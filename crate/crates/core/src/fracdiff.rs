//! Fractional differencing `(1 - L)^alpha` and unit-root testing.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this many nonzero weights the time-domain sum is cheaper than the FFT
/// and exact, which keeps `alpha = 0` and `alpha = 1` bit-exact.
const SPARSE_WEIGHT_LIMIT: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracDiffSpec {
    alpha: f64,
    n_weights: usize,
}

impl FracDiffSpec {
    pub fn new(alpha: f64, n_weights: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "differencing order {alpha} outside [0, 1]"
            )));
        }
        if n_weights == 0 {
            return Err(Error::InvalidArgument("n_weights must be at least 1".into()));
        }
        Ok(FracDiffSpec { alpha, n_weights })
    }

    /// Weights run the full length of the series, so no memory is truncated.
    pub fn full_memory(alpha: f64, series_len: usize) -> Result<Self> {
        FracDiffSpec::new(alpha, series_len.max(1))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_weights(&self) -> usize {
        self.n_weights
    }
}

/// Binomial-expansion weights of `(1 - L)^alpha`:
/// `w_0 = 1`, `w_k = w_{k-1} (k - 1 - alpha) / k`.
pub fn fracdiff_weights(alpha: f64, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n);
    if n == 0 {
        return w;
    }
    w.push(1.0);
    for k in 1..n {
        let kf = k as f64;
        w.push(w[k - 1] * (kf - 1.0 - alpha) / kf);
    }
    w
}

/// `out_t = Σ_{k ≤ min(t, n_weights-1)} w_k x_{t-k}`, computed by zero-padded
/// FFT convolution unless the weight sequence is short or sparse.
pub fn fracdiff_apply(series: &[f64], spec: &FracDiffSpec) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::SeriesTooShort { len: 0, required: 0 });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("series at index {i}")));
    }
    let n = spec.n_weights.min(series.len());
    let weights = fracdiff_weights(spec.alpha, n);
    let nonzero: Vec<(usize, f64)> = weights.iter().copied().enumerate().filter(|(_, w)| *w != 0.0).collect();
    if nonzero.len() <= SPARSE_WEIGHT_LIMIT {
        return Ok(sparse_convolve(series, &nonzero));
    }
    Ok(fft_convolve(series, &weights))
}

fn sparse_convolve(series: &[f64], weights: &[(usize, f64)]) -> Vec<f64> {
    (0..series.len())
        .map(|t| {
            weights
                .iter()
                .take_while(|(k, _)| *k <= t)
                .map(|&(k, w)| w * series[t - k])
                .sum()
        })
        .collect()
}

fn fft_convolve(series: &[f64], weights: &[f64]) -> Vec<f64> {
    let len = (series.len() + weights.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward: Arc<dyn Fft<f64>> = planner.plan_fft_forward(len);
    let inverse: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(len);

    let pad = |v: &[f64]| {
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        for (b, &x) in buf.iter_mut().zip(v) {
            b.re = x;
        }
        buf
    };
    let mut a = pad(series);
    let mut b = pad(weights);
    forward.process(&mut a);
    forward.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inverse.process(&mut a);
    let scale = 1.0 / len as f64;
    a.iter().take(series.len()).map(|c| c.re * scale).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignificanceLevel {
    #[serde(rename = "0.01")]
    OnePercent,
    #[serde(rename = "0.05")]
    FivePercent,
    #[serde(rename = "0.10")]
    TenPercent,
}

impl SignificanceLevel {
    /// Large-sample Dickey-Fuller critical values, constant and no trend.
    pub fn critical_value(self) -> f64 {
        match self {
            SignificanceLevel::OnePercent => -3.43,
            SignificanceLevel::FivePercent => -2.86,
            SignificanceLevel::TenPercent => -2.57,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            SignificanceLevel::OnePercent => 0.01,
            SignificanceLevel::FivePercent => 0.05,
            SignificanceLevel::TenPercent => 0.10,
        }
    }

    pub fn from_f64(level: f64) -> Result<Self> {
        const EPS: f64 = 1e-12;
        if (level - 0.01).abs() < EPS {
            Ok(SignificanceLevel::OnePercent)
        } else if (level - 0.05).abs() < EPS {
            Ok(SignificanceLevel::FivePercent)
        } else if (level - 0.10).abs() < EPS {
            Ok(SignificanceLevel::TenPercent)
        } else {
            Err(Error::InvalidArgument(format!(
                "significance level {level} not tabulated (use 0.01, 0.05 or 0.10)"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub n_lags: usize,
    pub critical_value: f64,
    pub reject_unit_root: bool,
}

/// `floor(12 (T/100)^{1/4})`.
pub fn default_adf_lags(len: usize) -> usize {
    (12.0 * (len as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Augmented Dickey-Fuller test with a constant: regresses `Δx_t` on
/// `1, x_{t-1}, Δx_{t-1}, …, Δx_{t-n_lags}` and returns the t-ratio on `x_{t-1}`.
pub fn adf_test(series: &[f64], n_lags: usize, level: SignificanceLevel) -> Result<AdfResult> {
    let len = series.len();
    if len <= n_lags + 3 {
        return Err(Error::SeriesTooShort {
            len,
            required: n_lags + 3,
        });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("series at index {i}")));
    }
    let diff: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    // diff[t-1] = x_t - x_{t-1}; first usable response is t = n_lags + 1
    let n_obs = len - 1 - n_lags;
    let n_par = n_lags + 2;
    if n_obs <= n_par {
        return Err(Error::SeriesTooShort {
            len,
            required: 2 * n_lags + 3,
        });
    }
    let design = DMatrix::from_fn(n_obs, n_par, |r, c| {
        let t = r + n_lags + 1;
        match c {
            0 => 1.0,
            1 => series[t - 1],
            j => diff[t - 1 - (j - 1)],
        }
    });
    let response = DVector::from_fn(n_obs, |r, _| diff[r + n_lags]);

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin <= 1e-10 * smax {
        return Err(Error::Degenerate(
            "regressors are collinear (constant or deterministic series)".into(),
        ));
    }
    let coef = svd
        .solve(&response, 0.0)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    let resid = &response - &design * &coef;
    let rss = resid.norm_squared();
    let scale = response.norm_squared().max(f64::MIN_POSITIVE);
    if rss <= 1e-24 * scale {
        return Err(Error::Degenerate("residual variance is zero".into()));
    }
    let sigma2 = rss / (n_obs - n_par) as f64;
    // [(X'X)^{-1}]_{11} = Σ_j V_{1j}^2 / s_j^2
    let v_t = svd.v_t.as_ref().expect("svd computed with V");
    let var_factor: f64 = (0..svd.singular_values.len())
        .map(|j| {
            let s = svd.singular_values[j];
            v_t[(j, 1)] * v_t[(j, 1)] / (s * s)
        })
        .sum();
    let statistic = coef[1] / (sigma2 * var_factor).sqrt();
    let critical_value = level.critical_value();
    Ok(AdfResult {
        statistic,
        n_lags,
        critical_value,
        reject_unit_root: statistic < critical_value,
    })
}

/// How stationarity is judged when searching for the differencing order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityConfig {
    pub level: SignificanceLevel,
    /// `None` uses [`default_adf_lags`] of the (post burn-in) length.
    pub n_lags: Option<usize>,
    /// Drop the first `ceil(0.05 T)` differenced values before testing.
    pub burn_in: bool,
}

impl Default for StationarityConfig {
    fn default() -> Self {
        StationarityConfig {
            level: SignificanceLevel::FivePercent,
            n_lags: None,
            burn_in: false,
        }
    }
}

pub fn burn_in_len(len: usize) -> usize {
    (0.05 * len as f64).ceil() as usize
}

/// Differences with full-memory weights and applies the burn-in policy.
pub fn difference_for_testing(series: &[f64], alpha: f64, burn_in: bool) -> Result<Vec<f64>> {
    let out = fracdiff_apply(series, &FracDiffSpec::full_memory(alpha, series.len())?)?;
    if burn_in {
        Ok(out[burn_in_len(out.len())..].to_vec())
    } else {
        Ok(out)
    }
}

fn adf_for(series: &[f64], cfg: &StationarityConfig) -> Result<AdfResult> {
    let lags = cfg.n_lags.unwrap_or_else(|| default_adf_lags(series.len()));
    adf_test(series, lags, cfg.level)
}

/// Smallest grid value whose differencing makes every series reject a unit root.
pub fn find_min_alpha(series: &[Vec<f64>], alpha_grid: &[f64], cfg: &StationarityConfig) -> Result<f64> {
    if alpha_grid.is_empty() {
        return Err(Error::InvalidArgument("alpha grid is empty".into()));
    }
    if alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "alpha grid {alpha_grid:?} is not strictly ascending"
        )));
    }
    if series.is_empty() {
        return Err(Error::InvalidArgument("panel has no series".into()));
    }
    for &alpha in alpha_grid {
        let mut all_stationary = true;
        for s in series {
            let differenced = difference_for_testing(s, alpha, cfg.burn_in)?;
            if !adf_for(&differenced, cfg)?.reject_unit_root {
                all_stationary = false;
                break;
            }
        }
        log::debug!("alpha {alpha}: panel stationary = {all_stationary}");
        if all_stationary {
            return Ok(alpha);
        }
    }
    Err(Error::NoStationaryAlpha {
        grid: alpha_grid.to_vec(),
    })
}

/// ADF result of every series after differencing at `alpha`.
pub fn adf_panel(series: &[Vec<f64>], alpha: f64, cfg: &StationarityConfig) -> Result<Vec<AdfResult>> {
    series
        .iter()
        .map(|s| adf_for(&difference_for_testing(s, alpha, cfg.burn_in)?, cfg))
        .collect()
}
