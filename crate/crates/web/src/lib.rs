//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every entry point takes plain numbers and returns a JSON string, which keeps
//! the JavaScript side free of generated glue types.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use argap::clustering::{k_medoids, pairwise_distances};
use argap::gapstat::{reference_curve, select_number_of_modes, EmpiricalMeasure, ReferenceConfig, ReferenceCurve};
use argap::mixture_em::EmConfig;
use argap::sampler::{estimate_configuration_volumes, sample_uniform_stable_filters, ConfigurationWeights};
use argap::simgen::{generate_tvar, ScenarioTruth, SwitchingSpec};
use argap::{Error, Filter};

/// Volume estimates in the browser use fewer samples than the command line.
const VOLUME_SAMPLES: u64 = 100_000;

fn weights(lag: usize) -> argap::Result<ConfigurationWeights> {
    estimate_configuration_volumes(lag, VOLUME_SAMPLES, 1)
}

fn to_js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn json<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

#[derive(Serialize)]
pub struct ClusteredSample {
    pub filters: Vec<Vec<f64>>,
    pub medoids: Vec<usize>,
    /// Index into `medoids` for every filter.
    pub assignments: Vec<usize>,
    pub wcsd: f64,
}

/// Draws `count` uniform stable filters of order `lag` and groups them into
/// `m` clusters by k-medoids under the prediction-error distance.
pub fn sample_and_cluster_native(lag: usize, count: usize, m: usize, seed: u64) -> argap::Result<ClusteredSample> {
    let filters = sample_uniform_stable_filters(&weights(lag)?, count, seed)?;
    let table = pairwise_distances(&filters, 1.0)?;
    let result = k_medoids(&table, m, seed, 4)?;
    Ok(ClusteredSample {
        filters: filters.iter().map(|f| f.coefficients().to_vec()).collect(),
        medoids: result.medoid_indices,
        assignments: result.assignments,
        wcsd: result.wcsd,
    })
}

#[wasm_bindgen]
pub fn sample_and_cluster(lag: usize, count: usize, m: usize, seed: u64) -> Result<String, JsError> {
    json(&sample_and_cluster_native(lag, count, m, seed).map_err(to_js)?)
}

pub fn reference_curve_native(
    lag: usize,
    m_max: usize,
    n_filters: usize,
    n_instances: usize,
    seed: u64,
) -> argap::Result<ReferenceCurve> {
    let config = ReferenceConfig { lag, m_max, n_filters, n_instances, kmedoids_restarts: 2 };
    reference_curve(&config, &weights(lag)?, seed)
}

/// `log W_M` for `M = 1..=m_max`.
#[wasm_bindgen]
pub fn reference(lag: usize, m_max: usize, n_filters: usize, n_instances: usize, seed: u64) -> Result<String, JsError> {
    json(&reference_curve_native(lag, m_max, n_filters, n_instances, seed).map_err(to_js)?)
}

#[derive(Serialize)]
pub struct SelectionDemo {
    pub series: Vec<f64>,
    pub modes: Vec<usize>,
    pub reference: Vec<f64>,
    pub empirical: Vec<f64>,
    pub gaps: Vec<f64>,
    pub selected_m: usize,
    pub aic_m: usize,
    pub bic_m: usize,
}

/// Simulates an AR(1) series that switches independently between the given
/// coefficients (equal probabilities) and selects the number of modes.
/// `measure` is `min-over-modes` or `noise-variance`.
pub fn simulate_and_select_native(
    coefficients: &[f64],
    sigma2: f64,
    length: usize,
    m_max: usize,
    measure: EmpiricalMeasure,
    seed: u64,
) -> argap::Result<SelectionDemo> {
    let filters = coefficients.iter().map(|&c| Filter::new(vec![c])).collect::<argap::Result<Vec<_>>>()?;
    let true_m = filters.len();
    let truth = ScenarioTruth {
        true_m,
        lag: 1,
        filters,
        switching: SwitchingSpec::IidMultinomial { mode_probabilities: vec![1.0 / true_m.max(1) as f64; true_m] },
        sigma2,
        n: length,
        burn_in: 100,
    };
    let generated = generate_tvar(&truth, seed)?;
    let reference = reference_curve_native(1, m_max, 300, 2, seed)?;
    let em = EmConfig { n_restarts: 5, ..EmConfig::default() };
    let result = select_number_of_modes(&generated.series, &reference, m_max, &em, measure, seed)?;
    Ok(SelectionDemo {
        series: generated.series.observations().to_vec(),
        modes: generated.modes,
        reference: result.reference.values.clone(),
        empirical: result.empirical.clone(),
        gaps: result.gaps.clone(),
        selected_m: result.selected_m,
        aic_m: result.aic_m,
        bic_m: result.bic_m,
    })
}

#[wasm_bindgen]
pub fn simulate_and_select(
    coefficients: &[f64],
    sigma2: f64,
    length: usize,
    m_max: usize,
    measure: &str,
    seed: u64,
) -> Result<String, JsError> {
    let measure: EmpiricalMeasure = measure.parse().map_err(to_js)?;
    json(&simulate_and_select_native(coefficients, sigma2, length, m_max, measure, seed).map_err(to_js)?)
}
