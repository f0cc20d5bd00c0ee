//! Mixture of AR filters fitted by expectation–maximisation.
//!
//! Each observation is drawn from `Σ_m α_m N(γ_mᵀ x_n, σ²)` where `x_n` holds
//! the `L` preceding values. Memberships are independent across time; the
//! likelihood conditions on the `L` presample values.

use nalgebra::{DMatrix, DVector};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter_core::Filter;
use crate::seed::{derive_seed, rng_from_seed};

/// Lower bound on the noise variance.
pub const SIGMA2_FLOOR: f64 = 1e-12;

const RIDGE_CONDITION: f64 = 1e12;
const RIDGE_SCALE: f64 = 1e-10;

/// Observations `x_1..x_N` with their presample `x_0, x_{-1}, ..., x_{1-L}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    // x_{1-L}, ..., x_0, x_1, ..., x_N in time order
    values: Vec<f64>,
    lag: usize,
}

impl TimeSeries {
    /// `presample[0] = x_0`, `presample[1] = x_{-1}`, ...; the lag is `presample.len()`.
    pub fn new(presample: Vec<f64>, observations: Vec<f64>) -> Result<Self> {
        let lag = presample.len();
        if lag == 0 {
            return Err(Error::InvalidInput("lag must be at least 1".into()));
        }
        if observations.is_empty() {
            return Err(Error::InvalidInput("series needs at least one observation".into()));
        }
        if presample.iter().chain(&observations).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("series values must be finite".into()));
        }
        let mut values: Vec<f64> = presample.into_iter().rev().collect();
        values.extend(observations);
        Ok(TimeSeries { values, lag })
    }

    /// Uses the first `lag` values of `values` as presample and the rest as observations.
    pub fn from_leading_presample(values: Vec<f64>, lag: usize) -> Result<Self> {
        if lag == 0 {
            return Err(Error::InvalidInput("lag must be at least 1".into()));
        }
        if values.len() < lag + 1 {
            return Err(Error::InvalidInput(format!("series too short: {} values for lag {lag}", values.len())));
        }
        let observations = values[lag..].to_vec();
        let presample = values[..lag].iter().rev().copied().collect();
        TimeSeries::new(presample, observations)
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// Number of observations `N`.
    pub fn len(&self) -> usize {
        self.values.len() - self.lag
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn observations(&self) -> &[f64] {
        &self.values[self.lag..]
    }

    /// `x_0, x_{-1}, ..., x_{1-L}`.
    pub fn presample(&self) -> Vec<f64> {
        self.values[..self.lag].iter().rev().copied().collect()
    }

    /// Regressor `x_n = (x_{n-1}, ..., x_{n-L})` of observation `i` (0-based).
    pub fn regressor(&self, i: usize) -> Vec<f64> {
        (1..=self.lag).map(|l| self.values[self.lag + i - l]).collect()
    }

    fn design(&self) -> Design {
        let n = self.len();
        let regressors = (0..n).map(|i| self.regressor(i)).collect();
        Design { regressors, targets: self.observations().to_vec(), lag: self.lag }
    }
}

/// Regressor rows and targets, materialised once per fit.
struct Design {
    regressors: Vec<Vec<f64>>,
    targets: Vec<f64>,
    lag: usize,
}

impl Design {
    fn residual(&self, i: usize, mode: &Filter) -> f64 {
        self.targets[i] - mode.predict(&self.regressors[i])
    }
}

/// Mixture weights, mode filters and shared noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureARModel {
    pub weights: Vec<f64>,
    pub modes: Vec<Filter>,
    pub sigma2: f64,
}

impl MixtureARModel {
    pub fn new(weights: Vec<f64>, modes: Vec<Filter>, sigma2: f64) -> Result<Self> {
        let model = MixtureARModel { weights, modes, sigma2 };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::InvalidInput("mixture needs at least one mode".into()));
        }
        if self.weights.len() != self.modes.len() {
            return Err(Error::LengthMismatch { expected: self.modes.len(), actual: self.weights.len() });
        }
        let lag = self.modes[0].lag();
        if let Some(m) = self.modes.iter().find(|m| m.lag() != lag) {
            return Err(Error::LengthMismatch { expected: lag, actual: m.lag() });
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("mixture weights must lie on the simplex".into()));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidInput(format!("noise variance must be positive, got {}", self.sigma2)));
        }
        Ok(())
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn lag(&self) -> usize {
        self.modes[0].lag()
    }

    fn check_series(&self, series: &TimeSeries) -> Result<()> {
        if self.lag() != series.lag() {
            return Err(Error::LengthMismatch { expected: series.lag(), actual: self.lag() });
        }
        Ok(())
    }

    /// `log α_m + log N(x | γ_mᵀ x_n, σ²)` for every mode.
    fn component_log_densities(&self, design: &Design, i: usize, out: &mut [f64]) {
        let norm = -0.5 * (2.0 * std::f64::consts::PI * self.sigma2).ln();
        for ((slot, mode), &alpha) in out.iter_mut().zip(&self.modes).zip(&self.weights) {
            let r = design.residual(i, mode);
            *slot = alpha.ln() + norm - r * r / (2.0 * self.sigma2);
        }
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Posterior mode memberships `w_nm`, stored row-major (`N × M`).
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    values: Vec<f64>,
    n_modes: usize,
}

impl Responsibilities {
    /// Builds from rows; each row must be a probability vector (within `1e-10`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_modes = rows.first().map_or(0, Vec::len);
        if n_modes == 0 {
            return Err(Error::InvalidInput("responsibilities need at least one row and column".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * n_modes);
        for row in rows {
            if row.len() != n_modes {
                return Err(Error::LengthMismatch { expected: n_modes, actual: row.len() });
            }
            if row.iter().any(|w| !(0.0..=1.0).contains(w)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidInput("responsibility rows must be probability vectors".into()));
            }
            values.extend_from_slice(row);
        }
        Ok(Responsibilities { values, n_modes })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.n_modes
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_modes..(i + 1) * self.n_modes]
    }

    pub fn get(&self, i: usize, m: usize) -> f64 {
        self.values[i * self.n_modes + m]
    }
}

/// Log-likelihood of the observations given the presample.
pub fn log_likelihood(model: &MixtureARModel, series: &TimeSeries) -> Result<f64> {
    model.check_series(series)?;
    Ok(log_likelihood_design(model, &series.design()))
}

fn log_likelihood_design(model: &MixtureARModel, design: &Design) -> f64 {
    let mut buf = vec![0.0; model.n_modes()];
    (0..design.targets.len())
        .map(|i| {
            model.component_log_densities(design, i, &mut buf);
            log_sum_exp(&buf)
        })
        .sum()
}

/// Posterior memberships under `model`, computed in log space.
pub fn e_step(model: &MixtureARModel, series: &TimeSeries) -> Result<Responsibilities> {
    model.check_series(series)?;
    Ok(e_step_design(model, &series.design()))
}

fn e_step_design(model: &MixtureARModel, design: &Design) -> Responsibilities {
    let m = model.n_modes();
    let n = design.targets.len();
    let mut values = Vec::with_capacity(n * m);
    let mut buf = vec![0.0; m];
    for i in 0..n {
        model.component_log_densities(design, i, &mut buf);
        let total = log_sum_exp(&buf);
        if total.is_finite() {
            values.extend(buf.iter().map(|l| (l - total).exp()));
        } else {
            values.extend(std::iter::repeat_n(1.0 / m as f64, m));
        }
    }
    Responsibilities { values, n_modes: m }
}

/// Solves `(Σ w x xᵀ) γ = Σ w y x`; ridge `1e-10 · trace / L` is added when the
/// Gram matrix is ill-conditioned.
fn weighted_least_squares(design: &Design, weight: impl Fn(usize) -> f64, mode: usize) -> Result<Filter> {
    let lag = design.lag;
    let mut gram = DMatrix::<f64>::zeros(lag, lag);
    let mut rhs = DVector::<f64>::zeros(lag);
    for (i, x) in design.regressors.iter().enumerate() {
        let w = weight(i);
        if w == 0.0 {
            continue;
        }
        let y = design.targets[i];
        for a in 0..lag {
            let wa = w * x[a];
            rhs[a] += wa * y;
            for b in 0..=a {
                gram[(a, b)] += wa * x[b];
            }
        }
    }
    for a in 0..lag {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }
    let trace = gram.trace();
    if !(trace > 0.0 && trace.is_finite()) {
        return Err(Error::SingularSystem { mode });
    }
    let eigen = gram.clone().symmetric_eigenvalues();
    let largest = eigen.max();
    let smallest = eigen.min();
    if !(smallest > 0.0) || largest / smallest > RIDGE_CONDITION {
        let ridge = RIDGE_SCALE * trace / lag as f64;
        for a in 0..lag {
            gram[(a, a)] += ridge;
        }
    }
    let solution = gram.cholesky().ok_or(Error::SingularSystem { mode })?.solve(&rhs);
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem { mode });
    }
    Filter::new(solution.iter().copied().collect())
}

/// Ordinary least-squares AR(`L`) fit over all observations.
pub fn least_squares_ar(series: &TimeSeries) -> Result<Filter> {
    weighted_least_squares(&series.design(), |_| 1.0, 0)
}

/// Closed-form maximisation given memberships. Modes with zero total
/// membership are dead; they get the zero filter and weight zero.
pub fn m_step(resp: &Responsibilities, series: &TimeSeries) -> Result<MixtureARModel> {
    if resp.len() != series.len() {
        return Err(Error::LengthMismatch { expected: series.len(), actual: resp.len() });
    }
    m_step_design(resp, &series.design(), None)
}

fn m_step_design(
    resp: &Responsibilities,
    design: &Design,
    previous: Option<&MixtureARModel>,
) -> Result<MixtureARModel> {
    let n = design.targets.len();
    let m = resp.n_modes();
    let mass: Vec<f64> = (0..m).map(|k| (0..n).map(|i| resp.get(i, k)).sum()).collect();
    let total: f64 = mass.iter().sum();
    let weights: Vec<f64> = mass.iter().map(|s| s / total).collect();
    let mut modes = Vec::with_capacity(m);
    for (k, &mk) in mass.iter().enumerate() {
        if mk == 0.0 {
            let kept = previous.map(|p| p.modes[k].clone()).unwrap_or_else(|| Filter::zeros(design.lag));
            modes.push(kept);
        } else {
            modes.push(weighted_least_squares(design, |i| resp.get(i, k), k)?);
        }
    }
    let mut sse = 0.0;
    for i in 0..n {
        for (k, mode) in modes.iter().enumerate() {
            let w = resp.get(i, k);
            if w > 0.0 {
                let r = design.residual(i, mode);
                sse += w * r * r;
            }
        }
    }
    let sigma2 = (sse / n as f64).max(SIGMA2_FLOOR);
    Ok(MixtureARModel { weights, modes, sigma2 })
}

/// EM stopping rule and restart count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Convergence threshold on the absolute change in log-likelihood.
    pub tol: f64,
    pub n_restarts: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { max_iter: 500, tol: 1e-6, n_restarts: 50 }
    }
}

/// Best EM run over all restarts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: MixtureARModel,
    pub log_likelihood: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub restart_index: usize,
    /// Log-likelihood after initialisation and after every iteration.
    pub history: Vec<f64>,
}

impl FitResult {
    pub fn n_modes(&self) -> usize {
        self.model.n_modes()
    }
}

/// Initial model for one restart: each mode is the least-squares fit of a
/// random contiguous segment, weights uniform, noise variance from the pooled
/// segment residuals.
fn initial_model(design: &Design, m: usize, seed: u64) -> MixtureARModel {
    use rand::Rng;
    let n = design.targets.len();
    let lag = design.lag;
    let seg = (4 * lag + 4).max(n / (2 * m)).min(n);
    let mut rng = rng_from_seed(seed);
    let mut modes = Vec::with_capacity(m);
    let mut sse = 0.0;
    let mut count = 0usize;
    for _ in 0..m {
        let start = rng.random_range(0..=n - seg);
        let range = start..start + seg;
        let mode = weighted_least_squares(design, |i| if range.contains(&i) { 1.0 } else { 0.0 }, 0)
            .unwrap_or_else(|_| Filter::zeros(lag));
        for i in range {
            let r = design.residual(i, &mode);
            sse += r * r;
            count += 1;
        }
        modes.push(mode);
    }
    let sigma2 = (sse / count as f64).max(SIGMA2_FLOOR);
    MixtureARModel { weights: vec![1.0 / m as f64; m], modes, sigma2 }
}

fn run_em(design: &Design, m: usize, config: &EmConfig, seed: u64, restart: usize) -> Result<FitResult> {
    let mut model = initial_model(design, m, derive_seed(seed, restart as u64));
    let mut ll = log_likelihood_design(&model, design);
    let mut history = vec![ll];
    let mut converged = false;
    let mut n_iterations = 0;
    for _ in 0..config.max_iter.max(1) {
        let resp = e_step_design(&model, design);
        model = m_step_design(&resp, design, Some(&model))?;
        let next = log_likelihood_design(&model, design);
        n_iterations += 1;
        history.push(next);
        let change = (next - ll).abs();
        ll = next;
        if change < config.tol {
            converged = true;
            break;
        }
    }
    if !ll.is_finite() {
        return Err(Error::SingularSystem { mode: 0 });
    }
    Ok(FitResult { model, log_likelihood: ll, n_iterations, converged, restart_index: restart, history })
}

/// Fits an `m`-mode mixture, keeping the restart with the highest final
/// log-likelihood (ties to the lowest restart index). Restart `r` is seeded
/// with `derive_seed(seed, r)`, so adding restarts never lowers the result.
/// Failing restarts are discarded; the call fails only if all of them do.
pub fn fit_em(series: &TimeSeries, m: usize, config: &EmConfig, seed: u64) -> Result<FitResult> {
    if m == 0 {
        return Err(Error::InvalidM { m, n: series.len() });
    }
    if config.max_iter == 0 {
        return Err(Error::InvalidInput("max_iter must be at least 1".into()));
    }
    let design = series.design();
    let restarts = config.n_restarts.max(1);
    #[cfg(feature = "parallel")]
    let runs: Vec<Result<FitResult>> =
        (0..restarts).into_par_iter().map(|r| run_em(&design, m, config, seed, r)).collect();
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Result<FitResult>> = (0..restarts).map(|r| run_em(&design, m, config, seed, r)).collect();
    let mut best: Option<FitResult> = None;
    let mut first_error = None;
    for run in runs {
        match run {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.log_likelihood > b.log_likelihood) {
                    best = Some(fit);
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_error.expect("at least one restart ran"))
}

/// `(1/N) Σ_n min_m (x_n - γ_mᵀ x_n)²`: each point is predicted by its best mode.
pub fn empirical_mspe(model: &MixtureARModel, series: &TimeSeries) -> Result<f64> {
    model.check_series(series)?;
    let design = series.design();
    let n = design.targets.len();
    let total: f64 = (0..n)
        .map(|i| model.modes.iter().map(|mode| design.residual(i, mode).powi(2)).fold(f64::INFINITY, f64::min))
        .sum();
    Ok(total / n as f64)
}

/// Free parameters of an `m`-mode mixture: `m·L` coefficients, `m - 1` weights, one variance.
pub fn n_parameters(m: usize, lag: usize) -> usize {
    m * lag + (m - 1) + 1
}

pub fn aic_value(log_likelihood: f64, n_params: usize) -> f64 {
    -2.0 * log_likelihood + 2.0 * n_params as f64
}

pub fn bic_value(log_likelihood: f64, n_params: usize, n: f64) -> f64 {
    -2.0 * log_likelihood + n_params as f64 * n.ln()
}

pub fn aic(fit: &FitResult) -> f64 {
    aic_value(fit.log_likelihood, n_parameters(fit.n_modes(), fit.model.lag()))
}

pub fn bic(fit: &FitResult, n: usize) -> f64 {
    bic_value(fit.log_likelihood, n_parameters(fit.n_modes(), fit.model.lag()), n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn filter(c: &[f64]) -> Filter {
        Filter::new(c.to_vec()).unwrap()
    }

    fn ar1_series(coef: f64, noise: f64, n: usize, seed: u64) -> TimeSeries {
        let mut rng = rng_from_seed(seed);
        let mut x = vec![1.0];
        for _ in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            x.push(coef * x.last().unwrap() + noise * e);
        }
        TimeSeries::from_leading_presample(x, 1).unwrap()
    }

    fn random_instance(n: usize, seed: u64) -> (MixtureARModel, TimeSeries) {
        let mut rng = rng_from_seed(seed);
        let obs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let series = TimeSeries::new(vec![0.3, -0.1], obs).unwrap();
        let a: f64 = rng.random_range(0.1..0.9);
        let model = MixtureARModel::new(
            vec![a, 1.0 - a],
            vec![filter(&[rng.random_range(-1.0..1.0), 0.2]), filter(&[0.1, rng.random_range(-1.0..1.0)])],
            rng.random_range(0.5..2.0),
        )
        .unwrap();
        (model, series)
    }

    fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
        (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    }

    #[test]
    fn perfect_fit_likelihood() {
        let series = TimeSeries::new(vec![0.0], vec![0.0; 10]).unwrap();
        let model = MixtureARModel::new(vec![1.0], vec![filter(&[0.4])], 1.0).unwrap();
        let ll = log_likelihood(&model, &series).unwrap();
        assert!((ll + 5.0 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn identical_modes_collapse() {
        let series = ar1_series(0.5, 1.0, 50, 1);
        let single = MixtureARModel::new(vec![1.0], vec![filter(&[0.3])], 0.7).unwrap();
        let double = MixtureARModel::new(vec![0.3, 0.7], vec![filter(&[0.3]), filter(&[0.3])], 0.7).unwrap();
        let a = log_likelihood(&single, &series).unwrap();
        let b = log_likelihood(&double, &series).unwrap();
        assert!((a - b).abs() < 1e-10);
        let resp = e_step(&MixtureARModel::new(vec![0.5, 0.5], double.modes.clone(), 0.7).unwrap(), &series).unwrap();
        assert!((0..resp.len()).all(|i| resp.row(i).iter().all(|w| (w - 0.5).abs() < 1e-15)));
    }

    #[test]
    fn likelihood_and_e_step_match_naive_evaluation() {
        let (model, series) = random_instance(20, 4);
        let mut naive = 0.0;
        for i in 0..series.len() {
            let x = series.regressor(i);
            let y = series.observations()[i];
            naive += model
                .modes
                .iter()
                .zip(&model.weights)
                .map(|(g, a)| a * normal_pdf(y, g.predict(&x), model.sigma2))
                .sum::<f64>()
                .ln();
        }
        let ll = log_likelihood(&model, &series).unwrap();
        assert!((ll - naive).abs() < 1e-10);

        let (model, series) = random_instance(5, 5);
        let resp = e_step(&model, &series).unwrap();
        for i in 0..5 {
            let x = series.regressor(i);
            let y = series.observations()[i];
            let dens: Vec<f64> = model
                .modes
                .iter()
                .zip(&model.weights)
                .map(|(g, a)| a * normal_pdf(y, g.predict(&x), model.sigma2))
                .collect();
            let total: f64 = dens.iter().sum();
            for (m, d) in dens.iter().enumerate() {
                assert!((resp.get(i, m) - d / total).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_weight_gives_certain_membership() {
        let series = ar1_series(0.5, 1.0, 30, 2);
        let model = MixtureARModel::new(vec![1.0, 0.0], vec![filter(&[0.5]), filter(&[-0.5])], 1.0).unwrap();
        let resp = e_step(&model, &series).unwrap();
        assert!((0..resp.len()).all(|i| resp.get(i, 0) == 1.0));
    }

    #[test]
    fn single_mode_m_step_is_least_squares() {
        let series = ar1_series(0.6, 1.0, 200, 3);
        let resp = Responsibilities::from_rows(&vec![vec![1.0]; series.len()]).unwrap();
        let model = m_step(&resp, &series).unwrap();
        assert_eq!(model.weights, vec![1.0]);
        // normal equations directly
        let x: Vec<f64> = (0..series.len()).map(|i| series.regressor(i)[0]).collect();
        let y = series.observations();
        let ols = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|a| a * a).sum::<f64>();
        assert!((model.modes[0].coefficients()[0] - ols).abs() < 1e-12);
    }

    #[test]
    fn noiseless_regression_recovers_coefficient() {
        let series = ar1_series(0.73, 0.0, 30, 0);
        let fit = least_squares_ar(&series).unwrap();
        assert!((fit.coefficients()[0] - 0.73).abs() < 1e-10);
    }

    #[test]
    fn zero_series_is_regularised() {
        let series = TimeSeries::new(vec![1.0, -0.5], vec![0.0; 20]).unwrap();
        let resp = Responsibilities::from_rows(&vec![vec![1.0]; 20]).unwrap();
        let model = m_step(&resp, &series).unwrap();
        assert!(model.modes[0].coefficients().iter().all(|c| c.is_finite()));
        assert_eq!(model.sigma2, SIGMA2_FLOOR);

        let flat = TimeSeries::new(vec![0.0, 0.0], vec![0.0; 20]).unwrap();
        assert!(matches!(m_step(&resp, &flat), Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn single_mode_fit_is_seed_independent() {
        let series = ar1_series(-0.4, 1.0, 300, 8);
        let ols = least_squares_ar(&series).unwrap();
        for seed in [1, 2, 3] {
            let fit = fit_em(&series, 1, &EmConfig { n_restarts: 2, ..EmConfig::default() }, seed).unwrap();
            assert!((fit.model.modes[0].coefficients()[0] - ols.coefficients()[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn em_history_is_monotone() {
        let (_, series) = random_instance(200, 9);
        let fit = fit_em(&series, 3, &EmConfig { n_restarts: 4, ..EmConfig::default() }, 1).unwrap();
        for w in fit.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
        let recomputed = log_likelihood(&fit.model, &series).unwrap();
        assert!((recomputed - fit.log_likelihood).abs() < 1e-8);
    }

    #[test]
    fn mspe_examples() {
        let series = ar1_series(0.5, 0.0, 40, 0);
        let model = MixtureARModel::new(vec![0.5, 0.5], vec![filter(&[0.5]), filter(&[-0.2])], 1.0).unwrap();
        assert_eq!(empirical_mspe(&model, &series).unwrap(), 0.0);

        let obs = vec![0.3, -1.2, 0.8, 2.0, -0.1, 0.4, -0.9, 1.1, 0.0, 0.6];
        let series = TimeSeries::new(vec![0.5], obs.clone()).unwrap();
        let model = MixtureARModel::new(vec![0.5, 0.5], vec![filter(&[0.9]), filter(&[-0.6])], 1.0).unwrap();
        let mut prev = 0.5;
        let mut total = 0.0;
        for &x in &obs {
            let a = (x - 0.9 * prev).powi(2);
            let b = (x + 0.6 * prev).powi(2);
            total += if a < b { a } else { b };
            prev = x;
        }
        assert!((empirical_mspe(&model, &series).unwrap() - total / 10.0).abs() < 1e-15);
    }

    #[test]
    fn information_criteria_arithmetic() {
        assert_eq!(n_parameters(1, 1), 2);
        assert_eq!(aic_value(0.0, 2), 4.0);
        assert!((bic_value(0.0, 2, std::f64::consts::E.powi(2)) - 4.0).abs() < 1e-12);
        assert_eq!(n_parameters(2, 2), 6);
        assert_eq!(aic_value(-100.0, 6), 212.0);
        assert!((bic_value(-100.0, 6, 100.0) - 227.631_021_115_928_5).abs() < 1e-9);
        for m in 1..6 {
            assert!(aic_value(-50.0, n_parameters(m + 1, 2)) > aic_value(-50.0, n_parameters(m, 2)));
            assert!(bic_value(-50.0, n_parameters(m + 1, 2), 500.0) > bic_value(-50.0, n_parameters(m, 2), 500.0));
        }
    }

    #[test]
    fn series_construction() {
        let s = TimeSeries::from_leading_presample(vec![1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(s.presample(), vec![2.0, 1.0]);
        assert_eq!(s.observations(), &[3.0, 4.0]);
        assert_eq!(s.regressor(0), vec![2.0, 1.0]);
        assert_eq!(s.regressor(1), vec![3.0, 2.0]);
        assert!(TimeSeries::from_leading_presample(vec![1.0, 2.0], 2).is_err());
        assert!(TimeSeries::new(vec![], vec![1.0]).is_err());
        assert!(TimeSeries::new(vec![0.0], vec![f64::NAN]).is_err());
    }
}
