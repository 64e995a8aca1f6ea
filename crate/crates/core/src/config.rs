//! Pipeline configuration, read from a flat TOML file.
//!
//! Unknown keys are rejected. A run manifest is also accepted as a config:
//! its `[config]` table holds the fully resolved settings of that run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracdiff::{SignificanceLevel, StationarityConfig};
use crate::netfilter::FilterMethod;
use crate::panel::MissingPolicy;
use crate::regression::{FitConfig, RankSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Long-format CSV; the command line may override it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub missing: MissingPolicy,
    pub log_transform: bool,
    /// Added to every value before the log; zero rejects nonpositive values.
    pub log_shift: f64,
    /// Fixed differencing order; when absent `alpha_grid` is searched.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub alpha_grid: Vec<f64>,
    pub adf_level: f64,
    /// ADF lag count; absent means `floor(12 (T/100)^(1/4))`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adf_lags: Option<usize>,
    pub burn_in: bool,
    pub ranks: RankSpec,
    /// Fixed ridge penalty; when absent `lambda_grid` is searched.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub lambda_grid: Vec<f64>,
    pub train_fraction: f64,
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub filter_method: FilterMethod,
    pub polya_a: f64,
    pub retain_fraction: f64,
    pub normalize_overlap: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        PipelineConfig {
            input: None,
            output_dir: PathBuf::from("out"),
            missing: MissingPolicy::Reject,
            log_transform: true,
            log_shift: 0.0,
            alpha: None,
            alpha_grid: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            adf_level: 0.05,
            adf_lags: None,
            burn_in: false,
            ranks: RankSpec::Full,
            lambda: None,
            lambda_grid: fit.lambda_grid,
            train_fraction: fit.train_fraction,
            max_sweeps: fit.max_sweeps,
            rel_tol: fit.rel_tol,
            filter_method: FilterMethod::Polya,
            polya_a: 1.0,
            retain_fraction: 0.1,
            normalize_overlap: false,
            seed: 0,
        }
    }
}

#[derive(Deserialize)]
struct ManifestConfig {
    config: PipelineConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = if value.get("config").is_some_and(toml::Value::is_table) {
            toml::from_str::<ManifestConfig>(text).map(|m| m.config)
        } else {
            toml::from_str::<PipelineConfig>(text)
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.log_shift >= 0.0 && self.log_shift.is_finite()) {
            return bad(format!("log_shift {} must be a nonnegative number", self.log_shift));
        }
        if let Some(a) = self.alpha {
            if !(a >= 0.0 && a.is_finite()) {
                return bad(format!("alpha {a} must be a nonnegative number"));
            }
        } else {
            if self.alpha_grid.is_empty() {
                return bad("alpha_grid is empty and no fixed alpha is set".into());
            }
            if self.alpha_grid.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                return bad(format!(
                    "alpha_grid {:?} has a negative or non-finite entry",
                    self.alpha_grid
                ));
            }
            if self.alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("alpha_grid {:?} is not strictly ascending", self.alpha_grid));
            }
        }
        SignificanceLevel::from_f64(self.adf_level).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return bad(format!("lambda {l} must be a nonnegative number"));
            }
        } else if self.lambda_grid.is_empty() {
            return bad("lambda_grid is empty and no fixed lambda is set".into());
        }
        self.fit_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.polya_a > 0.0 && self.polya_a.is_finite()) {
            return bad(format!("polya_a {} must be positive", self.polya_a));
        }
        if !(self.retain_fraction > 0.0 && self.retain_fraction <= 1.0) {
            return bad(format!("retain_fraction {} outside (0, 1]", self.retain_fraction));
        }
        Ok(())
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            max_sweeps: self.max_sweeps,
            rel_tol: self.rel_tol,
            lambda_grid: self.lambda_grid.clone(),
            train_fraction: self.train_fraction,
            seed: self.seed,
        }
    }

    pub fn stationarity(&self) -> Result<StationarityConfig> {
        Ok(StationarityConfig {
            level: SignificanceLevel::from_f64(self.adf_level)?,
            n_lags: self.adf_lags,
            burn_in: self.burn_in,
        })
    }
}
