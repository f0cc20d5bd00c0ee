//! Synthetic multi-mode AR series and the three benchmark scenarios.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter_core::Filter;
use crate::gapstat::{analyze, empirical_curve, EmpiricalMeasure, ReferenceCurve};
use crate::mixture_em::{EmConfig, TimeSeries};
use crate::sampler::{sample_uniform_stable_filter, ConfigurationWeights};
use crate::seed::{derive_seed, rng_from_seed};

/// Series length used by every scenario.
pub const SCENARIO_LENGTH: usize = 1400;

/// Steps simulated under the first mode before recording starts.
pub const DEFAULT_BURN_IN: usize = 100;

/// How the active mode is chosen at each time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchingSpec {
    /// Independent draw per step.
    IidMultinomial { mode_probabilities: Vec<f64> },
    /// `n_segments` consecutive blocks of equal length (remainder to the last
    /// block); block `s` uses mode `s`.
    Segmented { n_segments: usize },
}

/// Ground truth of a simulated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub true_m: usize,
    pub lag: usize,
    pub filters: Vec<Filter>,
    pub switching: SwitchingSpec,
    pub sigma2: f64,
    pub n: usize,
    pub burn_in: usize,
}

impl ScenarioTruth {
    pub fn validate(&self) -> Result<()> {
        if self.filters.len() != self.true_m || self.true_m == 0 {
            return Err(Error::LengthMismatch { expected: self.true_m, actual: self.filters.len() });
        }
        if let Some(f) = self.filters.iter().find(|f| f.lag() != self.lag) {
            return Err(Error::LengthMismatch { expected: self.lag, actual: f.lag() });
        }
        if !self.filters.iter().all(Filter::is_stable) {
            return Err(Error::InvalidInput("scenario filters must be stable".into()));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidInput("noise variance must be nonnegative".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidInput("series length must be positive".into()));
        }
        match &self.switching {
            SwitchingSpec::IidMultinomial { mode_probabilities: p } => {
                if p.len() != self.true_m {
                    return Err(Error::LengthMismatch { expected: self.true_m, actual: p.len() });
                }
                if p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidInput("mode probabilities must sum to one".into()));
                }
            }
            SwitchingSpec::Segmented { n_segments } => {
                if *n_segments != self.true_m || *n_segments > self.n {
                    return Err(Error::InvalidInput(format!(
                        "{n_segments} segments for {} modes and {} points",
                        self.true_m, self.n
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mode index for observation `i` (0-based) under segmented switching.
    fn segment_of(&self, i: usize, n_segments: usize) -> usize {
        (i / (self.n / n_segments)).min(n_segments - 1)
    }
}

/// A generated series with the mode active at each observation.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSeries {
    pub series: TimeSeries,
    pub modes: Vec<usize>,
}

fn categorical<R: Rng + ?Sized>(rng: &mut R, probabilities: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probabilities.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Simulates `truth` from an explicit presample (`x_0, x_{-1}, ...`), without burn-in.
///
/// Noise comes from stream `derive_seed(seed, 0)` and mode switching from
/// stream `derive_seed(seed, 1)`, so the noise sequence does not depend on the
/// switching rule.
pub fn generate_tvar_from(truth: &ScenarioTruth, presample: &[f64], seed: u64) -> Result<GeneratedSeries> {
    truth.validate()?;
    if presample.len() != truth.lag {
        return Err(Error::LengthMismatch { expected: truth.lag, actual: presample.len() });
    }
    let mut noise_rng = rng_from_seed(derive_seed(seed, 0));
    simulate(truth, presample.to_vec(), 0, &mut noise_rng, seed)
}

/// Simulates `truth`: `L` standard-normal presample values, `truth.burn_in`
/// steps under the first mode, then `truth.n` recorded observations.
pub fn generate_tvar(truth: &ScenarioTruth, seed: u64) -> Result<GeneratedSeries> {
    truth.validate()?;
    let mut noise_rng = rng_from_seed(derive_seed(seed, 0));
    let presample: Vec<f64> = (0..truth.lag).map(|_| StandardNormal.sample(&mut noise_rng)).collect();
    simulate(truth, presample, truth.burn_in, &mut noise_rng, seed)
}

fn simulate(
    truth: &ScenarioTruth,
    presample: Vec<f64>,
    burn_in: usize,
    noise_rng: &mut crate::seed::Rng,
    seed: u64,
) -> Result<GeneratedSeries> {
    let lag = truth.lag;
    let sd = truth.sigma2.sqrt();
    let mut switch_rng = rng_from_seed(derive_seed(seed, 1));
    // newest first
    let mut history: Vec<f64> = presample;
    let step = |filter: &Filter, history: &mut Vec<f64>, rng: &mut crate::seed::Rng| -> f64 {
        let e: f64 = StandardNormal.sample(rng);
        let x = filter.predict(history) + sd * e;
        history.insert(0, x);
        history.truncate(lag);
        x
    };
    for _ in 0..burn_in {
        step(&truth.filters[0], &mut history, noise_rng);
    }
    let start = history.clone();
    let mut observations = Vec::with_capacity(truth.n);
    let mut modes = Vec::with_capacity(truth.n);
    for i in 0..truth.n {
        let mode = match &truth.switching {
            SwitchingSpec::IidMultinomial { mode_probabilities } => categorical(&mut switch_rng, mode_probabilities),
            SwitchingSpec::Segmented { n_segments } => truth.segment_of(i, *n_segments),
        };
        observations.push(step(&truth.filters[mode], &mut history, noise_rng));
        modes.push(mode);
    }
    Ok(GeneratedSeries { series: TimeSeries::new(start, observations)?, modes })
}

/// Fixed parameters of one of the three benchmark scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: u8,
    pub true_m: usize,
    pub lag: usize,
    pub switching: SwitchingSpec,
}

/// Scenario 1: four AR(2) modes, iid uniform switching.
/// Scenario 2: two AR(4) modes, iid switching with probabilities (0.4, 0.6).
/// Scenario 3: seven AR(1) modes, seven equal consecutive segments.
pub fn scenario_spec(id: u8) -> Result<ScenarioSpec> {
    let (true_m, lag, switching) = match id {
        1 => (4, 2, SwitchingSpec::IidMultinomial { mode_probabilities: vec![0.25; 4] }),
        2 => (2, 4, SwitchingSpec::IidMultinomial { mode_probabilities: vec![0.4, 0.6] }),
        3 => (7, 1, SwitchingSpec::Segmented { n_segments: 7 }),
        _ => return Err(Error::InvalidInput(format!("unknown scenario {id} (expected 1, 2 or 3)"))),
    };
    Ok(ScenarioSpec { id, true_m, lag, switching })
}

/// Redraws allowed before `make_scenario` gives up on a filter set.
const MAX_SCENARIO_DRAWS: u64 = 100_000;

fn companion(filter: &Filter) -> DMatrix<f64> {
    let lag = filter.lag();
    let mut a = DMatrix::zeros(lag, lag);
    for (j, &c) in filter.coefficients().iter().enumerate() {
        a[(0, j)] = c;
    }
    for i in 1..lag {
        a[(i, i - 1)] = 1.0;
    }
    a
}

/// Spectral radius of `sum_i p_i (A_i ⊗ A_i)`, where `A_i` is the companion
/// matrix of filter `i`.
///
/// Under independent switching the second moment of the state evolves by this
/// operator, so the series has bounded variance exactly when the radius is
/// below one. Stability of each filter alone is not enough: two stable
/// filters whose roots rotate in opposite directions can drive the switched
/// recursion to overflow.
pub fn second_moment_radius(filters: &[Filter], probabilities: &[f64]) -> Result<f64> {
    if filters.len() != probabilities.len() || filters.is_empty() {
        return Err(Error::LengthMismatch { expected: filters.len(), actual: probabilities.len() });
    }
    let lag = filters[0].lag();
    let mut op = DMatrix::<f64>::zeros(lag * lag, lag * lag);
    for (f, &p) in filters.iter().zip(probabilities) {
        let a = companion(f);
        op += a.kronecker(&a) * p;
    }
    let schur = op
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::InvalidInput("second-moment operator did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Whether `truth` generates a series with bounded variance. Segmented
/// switching visits each stable filter once, so only independent switching
/// can fail.
pub fn has_bounded_variance(truth: &ScenarioTruth) -> Result<bool> {
    match &truth.switching {
        SwitchingSpec::Segmented { .. } => Ok(true),
        SwitchingSpec::IidMultinomial { mode_probabilities } => {
            Ok(second_moment_radius(&truth.filters, mode_probabilities)? < 1.0)
        }
    }
}

/// Scenario truth with freshly drawn uniform stable filters and unit noise
/// variance. Filter sets whose switched recursion has unbounded variance are
/// redrawn.
pub fn make_scenario(id: u8, weights: &ConfigurationWeights, seed: u64) -> Result<ScenarioTruth> {
    let spec = scenario_spec(id)?;
    if weights.order != spec.lag {
        return Err(Error::LengthMismatch { expected: spec.lag, actual: weights.order });
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..MAX_SCENARIO_DRAWS {
        let filters =
            (0..spec.true_m).map(|_| sample_uniform_stable_filter(weights, &mut rng)).collect::<Result<Vec<_>>>()?;
        let truth = scenario_truth(&spec, filters);
        if has_bounded_variance(&truth)? {
            return Ok(truth);
        }
    }
    Err(Error::RejectionBudgetExceeded { lag: spec.lag, proposals: MAX_SCENARIO_DRAWS })
}

fn scenario_truth(spec: &ScenarioSpec, filters: Vec<Filter>) -> ScenarioTruth {
    ScenarioTruth {
        true_m: spec.true_m,
        lag: spec.lag,
        filters,
        switching: spec.switching.clone(),
        sigma2: 1.0,
        n: SCENARIO_LENGTH,
        burn_in: DEFAULT_BURN_IN,
    }
}

/// Selection methods compared in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gap,
    Aic,
    Bic,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gap, Method::Aic, Method::Bic];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gap => "gap",
            Method::Aic => "aic",
            Method::Bic => "bic",
        }
    }
}

/// What happened in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub gap_m: usize,
    pub aic_m: usize,
    pub bic_m: usize,
    pub max_abs_value: f64,
}

impl ReplicationOutcome {
    pub fn selected(&self, method: Method) -> usize {
        match method {
            Method::Gap => self.gap_m,
            Method::Aic => self.aic_m,
            Method::Bic => self.bic_m,
        }
    }
}

/// Histogram of selected `M` per method over all replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub scenario: u8,
    pub true_m: usize,
    pub m_max: usize,
    pub n_replications: usize,
    /// `counts[method][M - 1]`.
    pub counts: BTreeMap<Method, Vec<usize>>,
    pub outcomes: Vec<ReplicationOutcome>,
}

impl ExperimentTable {
    pub fn from_outcomes(scenario: u8, true_m: usize, m_max: usize, outcomes: Vec<ReplicationOutcome>) -> Self {
        let mut counts = BTreeMap::new();
        for method in Method::ALL {
            let mut hist = vec![0; m_max];
            for o in &outcomes {
                hist[o.selected(method) - 1] += 1;
            }
            counts.insert(method, hist);
        }
        ExperimentTable { scenario, true_m, m_max, n_replications: outcomes.len(), counts, outcomes }
    }

    pub fn accuracy(&self, method: Method) -> f64 {
        if self.n_replications == 0 {
            return 0.0;
        }
        self.counts[&method][self.true_m - 1] as f64 / self.n_replications as f64
    }

    /// Most frequently selected `M` (ties to the smallest).
    pub fn modal_selection(&self, method: Method) -> usize {
        let hist = &self.counts[&method];
        let mut best = 0;
        for (i, &c) in hist.iter().enumerate() {
            if c > hist[best] {
                best = i;
            }
        }
        best + 1
    }
}

/// Experiment settings besides the scenario and reference curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub n_replications: usize,
    pub em: EmConfig,
    pub measure: EmpiricalMeasure,
}

/// Runs `n_replications` independent replications of scenario `id`; replication
/// `r` draws its filters, noise and EM starts from `derive_seed(seed, r)`.
/// The `M` range is that of the reference curve.
pub fn run_experiment(
    id: u8,
    config: &ExperimentConfig,
    reference: &ReferenceCurve,
    weights: &ConfigurationWeights,
    seed: u64,
) -> Result<ExperimentTable> {
    let spec = scenario_spec(id)?;
    if reference.lag != spec.lag {
        return Err(Error::LengthMismatch { expected: spec.lag, actual: reference.lag });
    }
    if reference.m_max < spec.true_m {
        return Err(Error::InvalidInput(format!(
            "reference curve stops at M = {} but scenario {id} has {} modes",
            reference.m_max, spec.true_m
        )));
    }
    let replicate = |r: usize| -> Result<ReplicationOutcome> {
        let rseed = derive_seed(seed, r as u64);
        let truth = make_scenario(id, weights, derive_seed(rseed, 0))?;
        let generated = generate_tvar(&truth, derive_seed(rseed, 1))?;
        let series = &generated.series;
        let curve = empirical_curve(series, reference.m_max, &config.em, derive_seed(rseed, 2))?;
        let result = analyze(reference, &curve, series.len(), config.measure)?;
        let max_abs_value = series.observations().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Ok(ReplicationOutcome { gap_m: result.selected_m, aic_m: result.aic_m, bic_m: result.bic_m, max_abs_value })
    };
    #[cfg(feature = "parallel")]
    let outcomes: Result<Vec<_>> = (0..config.n_replications).into_par_iter().map(replicate).collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Result<Vec<_>> = (0..config.n_replications).map(replicate).collect();
    Ok(ExperimentTable::from_outcomes(id, spec.true_m, reference.m_max, outcomes?))
}
