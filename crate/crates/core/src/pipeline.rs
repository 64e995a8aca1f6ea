//! End-to-end run: log levels, fractional differencing, lag-one tensor
//! autoregression, network construction, filtering and measures.
//!
//! Each stage is a pure function plus a file artefact in the output
//! directory, so a run can be resumed from any stage:
//!
//! | stage           | reads              | writes                                   |
//! |-----------------|--------------------|------------------------------------------|
//! | `ingest`        | input CSV          | `panel.csv`                              |
//! | `fracdiff`      | `panel.csv`        | `differenced.csv`, `fracdiff.toml`       |
//! | `fit`           | `differenced.csv`  | `model.json`                             |
//! | `build-network` | `model.json`       | `network_raw.csv`                        |
//! | `filter`        | `network_raw.csv`  | `network.csv`, `filter.toml`             |
//! | `measure`       | `network.csv`      | `assortativity.csv`, `overlap.csv`, `nodes.csv`, `network.graphml`, `network.dot` |
//!
//! A full run also writes `manifest.toml`, whose `[config]` table can be fed
//! back as a config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::export::{self, NodeMeasures};
use crate::fracdiff::{self, default_adf_lags, difference_for_testing, find_min_alpha, SignificanceLevel};
use crate::multinet::{self, assortativity_matrix, edge_overlap_matrix, LayerMatrix, MultilayerNetwork};
use crate::netfilter::{retained_count, FilterMethod};
use crate::panel::{self, PanelSeries};
use crate::regression::{als_fit, build_lagged_pairs, predicted_r2, select_lambda_pairs, split_train_test, TarModel};
use crate::tensor::DenseTensor;

pub const PANEL_FILE: &str = "panel.csv";
pub const DIFFERENCED_FILE: &str = "differenced.csv";
pub const FRACDIFF_FILE: &str = "fracdiff.toml";
pub const MODEL_FILE: &str = "model.json";
pub const RAW_NETWORK_FILE: &str = "network_raw.csv";
pub const NETWORK_FILE: &str = "network.csv";
pub const FILTER_FILE: &str = "filter.toml";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub n_dates: usize,
    pub first_date: String,
    pub last_date: String,
    pub entities: Vec<String>,
    pub layers: Vec<String>,
}

impl DataSummary {
    fn of(panel: &PanelSeries) -> Self {
        DataSummary {
            n_dates: panel.dates().len(),
            first_date: panel.dates()[0].clone(),
            last_date: panel.dates()[panel.dates().len() - 1].clone(),
            entities: panel.entities().to_vec(),
            layers: panel.layers().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FracdiffSummary {
    pub alpha: f64,
    /// `"fixed"` or `"grid"`.
    pub alpha_source: String,
    pub log_transform: bool,
    pub log_shift: f64,
    pub burn_in: bool,
    pub dropped_dates: usize,
    pub adf_level: f64,
    pub adf_critical_value: f64,
    pub adf_lags: usize,
    /// One per `(entity, layer)` series, entity-major; NaN when the test was degenerate.
    pub adf_statistics: Vec<f64>,
    pub stationary: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub ranks: Vec<usize>,
    pub lambda: f64,
    /// `"fixed"` or `"grid"`.
    pub lambda_source: String,
    /// `[lambda, predicted R²]` rows of the grid search; empty for a fixed lambda.
    pub lambda_table: Vec<[f64; 2]>,
    pub n_train: usize,
    pub n_test: usize,
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub sweeps: usize,
    pub converged: bool,
    pub final_objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub method: FilterMethod,
    pub polya_a: f64,
    pub retain_fraction: f64,
    pub block_edges: usize,
    pub target_per_block: usize,
    /// `[from_layer][to_layer]`.
    pub kept_counts: Vec<Vec<usize>>,
    pub total_kept: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSummary {
    pub normalize_overlap: bool,
    pub assortativity: Vec<Vec<f64>>,
    pub overlap: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: PipelineConfig,
    pub data: DataSummary,
    pub fracdiff: FracdiffSummary,
    pub fit: FitSummary,
    pub filter: FilterSummary,
    pub measures: MeasureSummary,
}

/// Persisted fit: what `build-network` needs plus the diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub entities: Vec<String>,
    pub layers: Vec<String>,
    pub summary: FitSummary,
    pub objective_trace: Vec<f64>,
    pub intercept: DenseTensor,
    pub coefficient: DenseTensor,
}

#[derive(Debug, Clone)]
pub struct FracdiffOutcome {
    pub summary: FracdiffSummary,
    pub differenced: PanelSeries,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: TarModel,
    pub file: ModelFile,
}

#[derive(Debug, Clone)]
pub struct Measures {
    pub assortativity: LayerMatrix,
    pub overlap: LayerMatrix,
    pub nodes: NodeMeasures,
}

impl Measures {
    fn summary(&self, normalize_overlap: bool) -> MeasureSummary {
        MeasureSummary {
            normalize_overlap,
            assortativity: self.assortativity.values.clone(),
            overlap: self.overlap.values.clone(),
        }
    }
}

/// Everything a full run produced, in memory.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub manifest: Manifest,
    pub differenced: PanelSeries,
    pub model: ModelFile,
    pub raw_network: MultilayerNetwork,
    pub network: MultilayerNetwork,
    pub measures: Measures,
}

/// Log-transforms (if configured), picks or applies `alpha`, and differences
/// every series with full memory.
pub fn fracdiff_stage(panel: &PanelSeries, cfg: &PipelineConfig) -> Result<FracdiffOutcome> {
    cfg.validate()?;
    let levels = if cfg.log_transform {
        panel.log_transform(cfg.log_shift)?
    } else {
        panel.clone()
    };
    let series = levels.all_series();
    let stationarity = cfg.stationarity()?;
    let (alpha, alpha_source) = match cfg.alpha {
        Some(a) => (a, "fixed"),
        None => (find_min_alpha(&series, &cfg.alpha_grid, &stationarity)?, "grid"),
    };
    let differenced: Vec<Vec<f64>> = series
        .iter()
        .map(|s| difference_for_testing(s, alpha, cfg.burn_in))
        .collect::<Result<_>>()?;
    let kept_len = differenced[0].len();
    let dropped = panel.dates().len() - kept_len;
    let adf_lags = cfg.adf_lags.unwrap_or_else(|| default_adf_lags(kept_len));
    let level: SignificanceLevel = stationarity.level;

    let mut adf_statistics = Vec::with_capacity(series.len());
    let mut stationary = Vec::with_capacity(series.len());
    for (c, s) in differenced.iter().enumerate() {
        match fracdiff::adf_test(s, adf_lags, level) {
            Ok(r) => {
                adf_statistics.push(r.statistic);
                stationary.push(r.reject_unit_root);
            }
            Err(e) => {
                log::warn!("ADF on series {c} after differencing: {e}");
                adf_statistics.push(f64::NAN);
                stationary.push(false);
            }
        }
    }
    let n_failing = stationary.iter().filter(|s| !**s).count();
    if n_failing > 0 {
        log::warn!("{n_failing} series do not reject a unit root at alpha {alpha}");
    }
    log::info!("differencing order {alpha} ({alpha_source})");

    let differenced = PanelSeries::from_series(
        panel.dates()[dropped..].to_vec(),
        panel.entities().to_vec(),
        panel.layers().to_vec(),
        &differenced,
    )?;
    Ok(FracdiffOutcome {
        summary: FracdiffSummary {
            alpha,
            alpha_source: alpha_source.into(),
            log_transform: cfg.log_transform,
            log_shift: cfg.log_shift,
            burn_in: cfg.burn_in,
            dropped_dates: dropped,
            adf_level: level.as_f64(),
            adf_critical_value: level.critical_value(),
            adf_lags,
            adf_statistics,
            stationary,
        },
        differenced,
    })
}

/// Selects lambda (unless fixed) and fits on the chronological training split.
pub fn fit_stage(differenced: &PanelSeries, cfg: &PipelineConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let fit_cfg = cfg.fit_config();
    let (x, y) = build_lagged_pairs(&differenced.to_tensor(), 1)?;
    let ((x_tr, y_tr), (x_te, y_te)) = split_train_test(&x, &y, cfg.train_fraction)?;
    let (lambda, lambda_source, lambda_table) = match cfg.lambda {
        Some(l) => (l, "fixed", Vec::new()),
        None => {
            let sel = select_lambda_pairs(&x, &y, &cfg.ranks, &fit_cfg)?;
            let table = sel.table.iter().map(|&(l, r2)| [l, r2]).collect();
            (sel.best_lambda, "grid", table)
        }
    };
    let (model, mut report) = als_fit(&x_tr, &y_tr, &cfg.ranks, lambda, &fit_cfg)?;
    report.predicted_r2 = match predicted_r2(&model, &x_te, &y_te) {
        Ok(r2) => Some(r2),
        Err(Error::ZeroTotalSumOfSquares) => None,
        Err(e) => return Err(e),
    };
    log::info!(
        "lambda {lambda} ({lambda_source}), {} sweeps, predicted R² {:?}",
        report.n_sweeps,
        report.predicted_r2
    );
    let summary = FitSummary {
        ranks: model.ranks().to_vec(),
        lambda,
        lambda_source: lambda_source.into(),
        lambda_table,
        n_train: x_tr.shape()[0],
        n_test: x_te.shape()[0],
        max_sweeps: cfg.max_sweeps,
        rel_tol: cfg.rel_tol,
        seed: cfg.seed,
        sweeps: report.n_sweeps,
        converged: report.converged,
        final_objective: *report.objective_trace.last().unwrap_or(&f64::NAN),
        predicted_r2: report.predicted_r2,
    };
    let file = ModelFile {
        entities: differenced.entities().to_vec(),
        layers: differenced.layers().to_vec(),
        summary,
        objective_trace: report.objective_trace.clone(),
        intercept: model.intercept().clone(),
        coefficient: model.coefficient_tensor(),
    };
    Ok(FitOutcome { model, file })
}

pub fn build_network_stage(model: &ModelFile) -> Result<MultilayerNetwork> {
    multinet::from_coefficient(&model.coefficient, model.entities.clone(), model.layers.clone())
}

pub fn filter_stage(raw: &MultilayerNetwork, cfg: &PipelineConfig) -> Result<(MultilayerNetwork, FilterSummary)> {
    let net = multinet::apply_filter(raw, cfg.filter_method, cfg.retain_fraction, cfg.polya_a)?;
    let block_edges = net.n_entities() * net.n_entities();
    let summary = FilterSummary {
        method: cfg.filter_method,
        polya_a: cfg.polya_a,
        retain_fraction: cfg.retain_fraction,
        block_edges,
        target_per_block: retained_count(block_edges, cfg.retain_fraction),
        kept_counts: net.kept_counts(),
        total_kept: net.total_kept(),
    };
    Ok((net, summary))
}

pub fn measure_stage(net: &MultilayerNetwork, cfg: &PipelineConfig) -> Measures {
    Measures {
        assortativity: assortativity_matrix(net),
        overlap: edge_overlap_matrix(net, cfg.normalize_overlap),
        nodes: NodeMeasures::compute(net),
    }
}

/// Runs every stage in memory.
pub fn compute(cfg: &PipelineConfig, panel: &PanelSeries) -> Result<RunArtifacts> {
    cfg.validate().map_err(|e| e.at_stage("config"))?;
    let fd = fracdiff_stage(panel, cfg).map_err(|e| e.at_stage("fracdiff"))?;
    let fit = fit_stage(&fd.differenced, cfg).map_err(|e| e.at_stage("fit"))?;
    let raw = build_network_stage(&fit.file).map_err(|e| e.at_stage("build-network"))?;
    let (network, filter) = filter_stage(&raw, cfg).map_err(|e| e.at_stage("filter"))?;
    let measures = measure_stage(&network, cfg);
    Ok(RunArtifacts {
        manifest: Manifest {
            config: cfg.clone(),
            data: DataSummary::of(panel),
            fracdiff: fd.summary,
            fit: fit.file.summary.clone(),
            filter,
            measures: measures.summary(cfg.normalize_overlap),
        },
        differenced: fd.differenced,
        model: fit.file,
        raw_network: raw,
        network,
        measures,
    })
}

/// Runs every stage and writes all stage files and the manifest into
/// `cfg.output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig, panel: &PanelSeries) -> Result<RunArtifacts> {
    let art = compute(cfg, panel)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).at_stage("write"))?;
    let write = || -> Result<()> {
        panel::export_panel(panel, dir.join(PANEL_FILE))?;
        panel::export_panel(&art.differenced, dir.join(DIFFERENCED_FILE))?;
        write_toml(&dir.join(FRACDIFF_FILE), &art.manifest.fracdiff)?;
        write_model(&dir.join(MODEL_FILE), &art.model)?;
        std::fs::write(dir.join(RAW_NETWORK_FILE), export::edge_csv_bytes(&art.raw_network)?)?;
        write_filtered(dir, &art.network, &art.manifest.filter)?;
        write_measures(dir, &art.network, &art.measures)?;
        write_toml(&dir.join(MANIFEST_FILE), &art.manifest)
    };
    write().map_err(|e| e.at_stage("write"))?;
    Ok(art)
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn write_model(path: &Path, model: &ModelFile) -> Result<()> {
    let mut text = serde_json::to_string_pretty(model).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn write_filtered(dir: &Path, net: &MultilayerNetwork, summary: &FilterSummary) -> Result<()> {
    std::fs::write(dir.join(NETWORK_FILE), export::edge_csv_bytes(net)?)?;
    write_toml(&dir.join(FILTER_FILE), summary)
}

pub fn write_measures(dir: &Path, net: &MultilayerNetwork, m: &Measures) -> Result<()> {
    export::export_matrices(net, &m.assortativity, &m.overlap, &m.nodes, dir)?;
    std::fs::write(dir.join("network.graphml"), export::graphml_string(net, &m.nodes))?;
    std::fs::write(dir.join("network.dot"), export::dot_string(net, &m.nodes))?;
    Ok(())
}

/// File-to-file stage runners, as used by the command-line tool. Each reads
/// the previous stage's artefact from `dir` unless `input` overrides it.
pub mod stages {
    use super::*;

    fn source(dir: &Path, default: &str, input: Option<&Path>) -> PathBuf {
        input.map_or_else(|| dir.join(default), Path::to_path_buf)
    }

    fn prepare(dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        Ok(())
    }

    pub fn ingest(cfg: &PipelineConfig, input: &Path, dir: &Path) -> Result<PanelSeries> {
        let run = || -> Result<PanelSeries> {
            let panel = panel::ingest_csv(input, cfg.missing)?;
            prepare(dir)?;
            panel::export_panel(&panel, dir.join(PANEL_FILE))?;
            Ok(panel)
        };
        run().map_err(|e| e.at_stage("ingest"))
    }

    pub fn fracdiff(cfg: &PipelineConfig, dir: &Path, input: Option<&Path>) -> Result<FracdiffSummary> {
        let run = || -> Result<FracdiffSummary> {
            let panel = panel::ingest_csv(source(dir, PANEL_FILE, input), cfg.missing)?;
            let out = fracdiff_stage(&panel, cfg)?;
            prepare(dir)?;
            panel::export_panel(&out.differenced, dir.join(DIFFERENCED_FILE))?;
            write_toml(&dir.join(FRACDIFF_FILE), &out.summary)?;
            Ok(out.summary)
        };
        run().map_err(|e| e.at_stage("fracdiff"))
    }

    pub fn fit(cfg: &PipelineConfig, dir: &Path, input: Option<&Path>) -> Result<FitSummary> {
        let run = || -> Result<FitSummary> {
            let panel = panel::ingest_csv(source(dir, DIFFERENCED_FILE, input), panel::MissingPolicy::Reject)?;
            let out = fit_stage(&panel, cfg)?;
            prepare(dir)?;
            write_model(&dir.join(MODEL_FILE), &out.file)?;
            Ok(out.file.summary)
        };
        run().map_err(|e| e.at_stage("fit"))
    }

    pub fn build_network(dir: &Path, input: Option<&Path>) -> Result<MultilayerNetwork> {
        let run = || -> Result<MultilayerNetwork> {
            let model = read_model(&source(dir, MODEL_FILE, input))?;
            let net = build_network_stage(&model)?;
            prepare(dir)?;
            std::fs::write(dir.join(RAW_NETWORK_FILE), export::edge_csv_bytes(&net)?)?;
            Ok(net)
        };
        run().map_err(|e| e.at_stage("build-network"))
    }

    pub fn filter(cfg: &PipelineConfig, dir: &Path, input: Option<&Path>) -> Result<FilterSummary> {
        let run = || -> Result<FilterSummary> {
            let raw = export::read_edge_csv(source(dir, RAW_NETWORK_FILE, input))?;
            let (net, summary) = filter_stage(&raw, cfg)?;
            prepare(dir)?;
            write_filtered(dir, &net, &summary)?;
            Ok(summary)
        };
        run().map_err(|e| e.at_stage("filter"))
    }

    pub fn measure(cfg: &PipelineConfig, dir: &Path, input: Option<&Path>) -> Result<Measures> {
        let run = || -> Result<Measures> {
            let net = export::read_edge_csv(source(dir, NETWORK_FILE, input))?;
            let m = measure_stage(&net, cfg);
            prepare(dir)?;
            write_measures(dir, &net, &m)?;
            Ok(m)
        };
        run().map_err(|e| e.at_stage("measure"))
    }
}
