//! Browser bindings for the demo page in `www/`.
//!
//! Each exported function returns a JSON string. The `*_report` functions
//! hold the logic and are plain Rust, so they are tested natively.

use serde::Serialize;
use tarnet::config::PipelineConfig;
use tarnet::fracdiff::{adf_test, default_adf_lags, difference_for_testing, SignificanceLevel};
use tarnet::netfilter::{polya_pvalue, FilterMethod};
use tarnet::pipeline;
use tarnet::synth::{self, arfima_panel, SyntheticSpec};
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct FracdiffReport {
    pub series: Vec<f64>,
    pub differenced: Vec<f64>,
    pub adf_statistic: f64,
    pub critical_value: f64,
    pub stationary: bool,
}

/// One ARFIMA(0, d, 0) path and its fractional difference of order `alpha`.
pub fn fracdiff_report(d: f64, alpha: f64, len: usize, seed: u64) -> tarnet::Result<FracdiffReport> {
    let series = arfima_panel(1, len, d, seed).remove(0);
    let differenced = difference_for_testing(&series, alpha, false)?;
    let level = SignificanceLevel::FivePercent;
    let adf = adf_test(&differenced, default_adf_lags(differenced.len()), level)?;
    Ok(FracdiffReport {
        series,
        differenced,
        adf_statistic: adf.statistic,
        critical_value: adf.critical_value,
        stationary: adf.reject_unit_root,
    })
}

#[derive(Debug, Serialize)]
pub struct PolyaCurve {
    pub weights: Vec<f64>,
    pub p_values: Vec<f64>,
    pub binomial: Vec<f64>,
}

/// p-value against the weight `w` on a grid of `points` values in `[0, s]`,
/// alongside the `a = 0` (binomial) curve for comparison.
pub fn polya_curve_report(s: f64, k: usize, a: f64, points: usize) -> tarnet::Result<PolyaCurve> {
    let points = points.max(2);
    let weights: Vec<f64> = (0..points).map(|i| s * i as f64 / (points - 1) as f64).collect();
    let p_values = weights
        .iter()
        .map(|&w| polya_pvalue(w, s, k, a))
        .collect::<tarnet::Result<_>>()?;
    let binomial = weights
        .iter()
        .map(|&w| polya_pvalue(w, s, k, 0.0))
        .collect::<tarnet::Result<_>>()?;
    Ok(PolyaCurve {
        weights,
        p_values,
        binomial,
    })
}

#[derive(Debug, Serialize)]
pub struct Edge {
    pub from_entity: usize,
    pub from_layer: usize,
    pub to_entity: usize,
    pub to_layer: usize,
    pub weight: f64,
    pub in_truth: bool,
}

#[derive(Debug, Serialize)]
pub struct NetworkReport {
    pub entities: Vec<String>,
    pub layers: Vec<String>,
    pub lambda: f64,
    pub predicted_r2: Option<f64>,
    pub edges: Vec<Edge>,
    pub precision: f64,
    /// Undefined entries are `null`.
    pub assortativity: Vec<Vec<Option<f64>>>,
    pub overlap: Vec<Vec<f64>>,
    pub strength: Vec<Vec<f64>>,
    pub coreness: Vec<Vec<usize>>,
}

/// Generates a synthetic panel and runs the whole pipeline on it in memory.
pub fn synthetic_network_report(
    n_entities: usize,
    n_steps: usize,
    retain: f64,
    method: &str,
    seed: u64,
) -> tarnet::Result<NetworkReport> {
    let spec = SyntheticSpec {
        n_entities,
        n_steps,
        support_per_block: (n_entities / 2).max(1),
        seed,
        ..SyntheticSpec::default()
    };
    let data = synth::generate(&spec)?;
    let cfg = PipelineConfig {
        alpha: Some(spec.integration_order),
        retain_fraction: retain,
        filter_method: method.parse::<FilterMethod>()?,
        ..PipelineConfig::default()
    };
    let art = pipeline::compute(&cfg, &data.panel)?;
    let edges: Vec<Edge> = art
        .network
        .kept_edges()
        .map(|(j, m, i, k, w)| Edge {
            from_entity: i,
            from_layer: j,
            to_entity: k,
            to_layer: m,
            weight: w,
            in_truth: data.coefficient.get(&[i, j, k, m]) != 0.0,
        })
        .collect();
    let hits = edges.iter().filter(|e| e.in_truth).count();
    let a = &art.measures.assortativity;
    let l = art.network.n_layers();
    Ok(NetworkReport {
        entities: art.network.entity_labels().to_vec(),
        layers: art.network.layer_labels().to_vec(),
        lambda: art.manifest.fit.lambda,
        predicted_r2: art.manifest.fit.predicted_r2,
        precision: hits as f64 / edges.len().max(1) as f64,
        edges,
        assortativity: (0..l).map(|j| (0..l).map(|m| a.get(j, m)).collect()).collect(),
        overlap: art.measures.overlap.values.clone(),
        strength: art.measures.nodes.strength.clone(),
        coreness: art.measures.nodes.coreness.clone(),
    })
}

fn to_json<T: Serialize>(r: tarnet::Result<T>) -> Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn fracdiff_demo(d: f64, alpha: f64, len: usize, seed: u64) -> Result<String, JsError> {
    to_json(fracdiff_report(d, alpha, len, seed))
}

#[wasm_bindgen]
pub fn polya_curve(s: f64, k: usize, a: f64, points: usize) -> Result<String, JsError> {
    to_json(polya_curve_report(s, k, a, points))
}

#[wasm_bindgen]
pub fn synthetic_network(
    n_entities: usize,
    n_steps: usize,
    retain: f64,
    method: &str,
    seed: u64,
) -> Result<String, JsError> {
    to_json(synthetic_network_report(n_entities, n_steps, retain, method, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_difference_of_a_random_walk_is_stationary() {
        let r = fracdiff_report(1.0, 1.0, 400, 3).unwrap();
        assert_eq!(r.series.len(), 400);
        assert_eq!(r.differenced.len(), 400);
        assert!(r.stationary, "statistic {}", r.adf_statistic);
    }

    #[test]
    fn polya_curve_is_monotone_and_starts_at_one() {
        let c = polya_curve_report(20.0, 4, 1.0, 41).unwrap();
        assert_eq!(c.p_values[0], 1.0);
        assert!(c.p_values.windows(2).all(|w| w[1] <= w[0]));
        // Reinforcement fattens the tail relative to the binomial null.
        assert!(c.p_values[30] > c.binomial[30]);
    }

    #[test]
    fn network_report_serialises() {
        let r = synthetic_network_report(4, 300, 0.125, "polya", 1).unwrap();
        assert_eq!(r.layers.len(), 4);
        assert_eq!(r.edges.len(), 16 * 2);
        assert!((0.0..=1.0).contains(&r.precision));
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"coreness\""));
        assert!(synthetic_network_report(4, 300, 0.1, "mst", 1).is_err());
    }
}
