//! Gap-statistic selection of the number of modes.
//!
//! The reference curve is `log W_M`, where `W_M = 1 + WCSD_M / F` is the
//! per-filter k-medoids cost of `F` uniformly drawn stable filters at unit
//! noise variance; the `+1` stands for the irreducible noise variance. The
//! empirical curve is `log MSPE_M` of the fitted `M`-mode mixture. The chosen
//! `M` maximises `reference - empirical`.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{k_medoids_path, pairwise_distances};
use crate::error::{Error, Result};
use crate::mixture_em::{aic, bic, empirical_mspe, fit_em, EmConfig, FitResult, TimeSeries};
use crate::sampler::{sample_uniform_stable_filters, ConfigurationWeights};
use crate::seed::derive_seed;

/// MSPE values are floored here before taking logs.
pub const MSPE_FLOOR: f64 = 1e-300;

/// Size of the reference simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    pub lag: usize,
    pub m_max: usize,
    pub n_filters: usize,
    pub n_instances: usize,
    pub kmedoids_restarts: usize,
}

impl ReferenceConfig {
    pub fn new(lag: usize, m_max: usize) -> Self {
        ReferenceConfig { lag, m_max, n_filters: 1000, n_instances: 20, kmedoids_restarts: 20 }
    }
}

/// `log W_M` for `M = 1..=m_max`, averaged over independent instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCurve {
    pub lag: usize,
    pub m_max: usize,
    pub values: Vec<f64>,
    pub n_filters: usize,
    pub n_instances: usize,
    pub seed: u64,
}

impl ReferenceCurve {
    /// Keeps only the first `m_max` points.
    pub fn truncated(&self, m_max: usize) -> Result<ReferenceCurve> {
        if m_max == 0 || m_max > self.m_max {
            return Err(Error::InvalidInput(format!(
                "reference curve covers M = 1..={}, cannot use m_max = {m_max}",
                self.m_max
            )));
        }
        Ok(ReferenceCurve { m_max, values: self.values[..m_max].to_vec(), ..self.clone() })
    }
}

/// `log W_M` per `M` for a single batch of `F` filters.
pub fn reference_instance(config: &ReferenceConfig, weights: &ConfigurationWeights, seed: u64) -> Result<Vec<f64>> {
    let filters = sample_uniform_stable_filters(weights, config.n_filters, derive_seed(seed, 0))?;
    let table = pairwise_distances(&filters, 1.0)?;
    let path = k_medoids_path(&table, config.m_max, derive_seed(seed, 1), config.kmedoids_restarts)?;
    let f = config.n_filters as f64;
    Ok(path.iter().map(|r| (r.wcsd / f + 1.0).ln()).collect())
}

/// Reference curve from `n_instances` batches; instance `i` uses `derive_seed(seed, i)`.
/// Depends only on the configuration, the volume weights and the seed.
pub fn reference_curve(config: &ReferenceConfig, weights: &ConfigurationWeights, seed: u64) -> Result<ReferenceCurve> {
    if config.m_max == 0 || config.n_filters < config.m_max {
        return Err(Error::InvalidInput(format!(
            "need 1 <= m_max <= number of filters (m_max = {}, filters = {})",
            config.m_max, config.n_filters
        )));
    }
    if config.n_instances == 0 {
        return Err(Error::InvalidInput("need at least one reference instance".into()));
    }
    weights.validate()?;
    if weights.order != config.lag {
        return Err(Error::LengthMismatch { expected: config.lag, actual: weights.order });
    }
    let instance = |i: usize| reference_instance(config, weights, derive_seed(seed, i as u64));
    #[cfg(feature = "parallel")]
    let curves: Result<Vec<Vec<f64>>> = (0..config.n_instances).into_par_iter().map(instance).collect();
    #[cfg(not(feature = "parallel"))]
    let curves: Result<Vec<Vec<f64>>> = (0..config.n_instances).map(instance).collect();
    let curves = curves?;
    let values = (0..config.m_max).map(|m| curves.iter().map(|c| c[m]).sum::<f64>() / curves.len() as f64).collect();
    Ok(ReferenceCurve {
        lag: config.lag,
        m_max: config.m_max,
        values,
        n_filters: config.n_filters,
        n_instances: config.n_instances,
        seed,
    })
}

/// Which per-`M` error the empirical curve is built from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmpiricalMeasure {
    /// Mean over observations of the smallest squared one-step error across
    /// modes; the sample counterpart of the nearest-medoid cost.
    #[default]
    MinOverModes,
    /// Fitted noise variance, i.e. the responsibility-weighted squared error.
    NoiseVariance,
}

impl EmpiricalMeasure {
    pub fn name(self) -> &'static str {
        match self {
            EmpiricalMeasure::MinOverModes => "min-over-modes",
            EmpiricalMeasure::NoiseVariance => "noise-variance",
        }
    }
}

impl std::str::FromStr for EmpiricalMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-over-modes" => Ok(EmpiricalMeasure::MinOverModes),
            "noise-variance" => Ok(EmpiricalMeasure::NoiseVariance),
            other => Err(Error::InvalidInput(format!(
                "unknown empirical measure '{other}' (expected min-over-modes or noise-variance)"
            ))),
        }
    }
}

/// Empirical curve and the fits behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCurve {
    /// `log MSPE_M`, floored at [`MSPE_FLOOR`].
    pub values: Vec<f64>,
    pub mspe: Vec<f64>,
    pub fits: Vec<FitResult>,
}

impl EmpiricalCurve {
    /// Log of the chosen error measure per `M`.
    pub fn log_values(&self, measure: EmpiricalMeasure) -> Vec<f64> {
        match measure {
            EmpiricalMeasure::MinOverModes => self.values.clone(),
            EmpiricalMeasure::NoiseVariance => self.fits.iter().map(|f| f.model.sigma2.max(MSPE_FLOOR).ln()).collect(),
        }
    }
}

/// Fits `M = 1..=m_max` modes (fit `M` seeded with `derive_seed(seed, M)`) and
/// records `log MSPE_M`.
pub fn empirical_curve(series: &TimeSeries, m_max: usize, config: &EmConfig, seed: u64) -> Result<EmpiricalCurve> {
    if m_max == 0 {
        return Err(Error::InvalidInput("m_max must be at least 1".into()));
    }
    let fit_one = |m: usize| -> Result<(FitResult, f64)> {
        let fit = fit_em(series, m, config, derive_seed(seed, m as u64))?;
        let mspe = empirical_mspe(&fit.model, series)?;
        Ok((fit, mspe))
    };
    #[cfg(feature = "parallel")]
    let results: Result<Vec<(FitResult, f64)>> = (1..=m_max).into_par_iter().map(fit_one).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Result<Vec<(FitResult, f64)>> = (1..=m_max).map(fit_one).collect();
    let (fits, mspe): (Vec<FitResult>, Vec<f64>) = results?.into_iter().unzip();
    let values = mspe.iter().map(|v| v.max(MSPE_FLOOR).ln()).collect();
    Ok(EmpiricalCurve { values, mspe, fits })
}

/// Index (1-based `M`) of the first maximum.
fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best + 1
}

/// Index (1-based `M`) of the first minimum.
pub fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best + 1
}

/// Gaps `reference - empirical` and the `M` with the largest gap (ties to the smallest `M`).
pub fn select_m_gap(reference: &[f64], empirical: &[f64]) -> Result<(Vec<f64>, usize)> {
    if reference.len() != empirical.len() {
        return Err(Error::LengthMismatch { expected: reference.len(), actual: empirical.len() });
    }
    if reference.is_empty() {
        return Err(Error::InvalidInput("curves must be non-empty".into()));
    }
    let gaps: Vec<f64> = reference.iter().zip(empirical).map(|(r, e)| r - e).collect();
    let selected = argmax_first(&gaps);
    Ok((gaps, selected))
}

pub fn select_m_aic(fits: &[FitResult]) -> usize {
    argmin_first(&fits.iter().map(aic).collect::<Vec<_>>())
}

pub fn select_m_bic(fits: &[FitResult], n: usize) -> usize {
    argmin_first(&fits.iter().map(|f| bic(f, n)).collect::<Vec<_>>())
}

/// Everything produced by a selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    pub reference: ReferenceCurve,
    pub measure: EmpiricalMeasure,
    /// Log of the empirical error measure per `M`.
    pub empirical: Vec<f64>,
    pub gaps: Vec<f64>,
    pub selected_m: usize,
    pub aic_m: usize,
    pub bic_m: usize,
    pub mspe: Vec<f64>,
    /// Fitted noise variance per `M`.
    pub sigma2: Vec<f64>,
    pub log_likelihood: Vec<f64>,
    pub aic: Vec<f64>,
    pub bic: Vec<f64>,
}

/// Combines a reference curve and an empirical curve over the same `M` range.
pub fn analyze(
    reference: &ReferenceCurve,
    empirical: &EmpiricalCurve,
    n: usize,
    measure: EmpiricalMeasure,
) -> Result<GapResult> {
    let values = empirical.log_values(measure);
    let (gaps, selected_m) = select_m_gap(&reference.values, &values)?;
    let fits = &empirical.fits;
    Ok(GapResult {
        reference: reference.clone(),
        measure,
        empirical: values,
        gaps,
        selected_m,
        aic_m: select_m_aic(fits),
        bic_m: select_m_bic(fits, n),
        mspe: empirical.mspe.clone(),
        sigma2: fits.iter().map(|f| f.model.sigma2).collect(),
        log_likelihood: fits.iter().map(|f| f.log_likelihood).collect(),
        aic: fits.iter().map(aic).collect(),
        bic: fits.iter().map(|f| bic(f, n)).collect(),
    })
}

/// Reference curve check, empirical fit and selection in one call.
pub fn select_number_of_modes(
    series: &TimeSeries,
    reference: &ReferenceCurve,
    m_max: usize,
    config: &EmConfig,
    measure: EmpiricalMeasure,
    seed: u64,
) -> Result<GapResult> {
    if reference.lag != series.lag() {
        return Err(Error::LengthMismatch { expected: series.lag(), actual: reference.lag });
    }
    let reference = reference.truncated(m_max)?;
    let empirical = empirical_curve(series, m_max, config, seed)?;
    analyze(&reference, &empirical, series.len(), measure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::estimate_configuration_volumes;

    #[test]
    fn gap_examples() {
        let (gaps, m) = select_m_gap(&[0.0, -0.5, -0.8], &[0.0, -1.2, -1.3]).unwrap();
        assert!((gaps[1] - 0.7).abs() < 1e-12 && (gaps[2] - 0.5).abs() < 1e-12);
        assert_eq!(m, 2);
        let (gaps, m) = select_m_gap(&[0.3, 0.2], &[0.3, 0.2]).unwrap();
        assert_eq!(gaps, vec![0.0, 0.0]);
        assert_eq!(m, 1);
        assert!(matches!(select_m_gap(&[0.0], &[0.0, 1.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn measure_names_round_trip() {
        for m in [EmpiricalMeasure::MinOverModes, EmpiricalMeasure::NoiseVariance] {
            assert_eq!(m.name().parse::<EmpiricalMeasure>().unwrap(), m);
        }
        assert!("median".parse::<EmpiricalMeasure>().is_err());
    }

    #[test]
    fn criterion_argmin_examples() {
        assert_eq!(argmin_first(&[10.0, 5.0, 7.0]), 2);
        assert_eq!(argmin_first(&[3.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn full_cluster_count_gives_zero() {
        let w = estimate_configuration_volumes(2, 10_000, 1).unwrap();
        let config = ReferenceConfig { lag: 2, m_max: 30, n_filters: 30, n_instances: 1, kmedoids_restarts: 2 };
        let curve = reference_curve(&config, &w, 5).unwrap();
        assert_eq!(curve.values[29], 0.0);
        for pair in curve.values.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn reference_validation() {
        let w = estimate_configuration_volumes(1, 1000, 1).unwrap();
        let config = ReferenceConfig { lag: 1, m_max: 5, n_filters: 4, n_instances: 1, kmedoids_restarts: 1 };
        assert!(reference_curve(&config, &w, 0).is_err());
        let config = ReferenceConfig { lag: 2, m_max: 2, n_filters: 4, n_instances: 1, kmedoids_restarts: 1 };
        assert!(reference_curve(&config, &w, 0).is_err());
    }
}
