//! Uniform sampling of stable AR filters.
//!
//! The coefficient map from roots has Jacobian determinant equal (in modulus)
//! to `2^c |V(a)|`, `V` being the Vandermonde polynomial of the roots and `c`
//! the number of conjugate pairs. A filter uniform over the stable region
//! `R_L` is therefore obtained by
//!
//! 1. drawing the pair count `c` with probability `Vol(R_L^(c)) / Vol(R_L)`,
//! 2. drawing roots on `disk^c × (-1, 1)^(L-2c)` with density `∝ |V|`,
//! 3. expanding the roots into coefficients.
//!
//! [`sample_coefficient_rejection`] draws the same distribution directly in
//! coefficient space and serves as an independent check.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter_core::{is_stable, roots_to_coefficients, Filter, RootSet};
use crate::seed::{derive_seed, rng_from_seed};

/// Proposal cap for every rejection sampler in this module.
pub const DEFAULT_REJECTION_BUDGET: u64 = 10_000_000;

/// Largest lag the samplers accept.
pub const MAX_LAG: usize = 8;

/// Seed used for volume estimates when the caller does not pick one.
pub const DEFAULT_VOLUME_SEED: u64 = 0x5EED_0001;

/// Monte Carlo estimates of `Vol(R_L^(c))` for `c = 0..=L/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationWeights {
    pub order: usize,
    pub n_samples: u64,
    pub seed: u64,
    pub volumes: Vec<f64>,
    pub standard_errors: Vec<f64>,
}

impl ConfigurationWeights {
    /// Volumes normalised to probabilities.
    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total_volume();
        self.volumes.iter().map(|v| v / total).collect()
    }

    /// Estimate of `Vol(R_L)`.
    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Standard error of [`total_volume`](Self::total_volume); the per-configuration
    /// estimates use independent streams.
    pub fn total_standard_error(&self) -> f64 {
        self.standard_errors.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.order > MAX_LAG {
            return Err(Error::InvalidInput(format!("unsupported lag {}", self.order)));
        }
        let expected = self.order / 2 + 1;
        if self.volumes.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: self.volumes.len() });
        }
        if self.standard_errors.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: self.standard_errors.len() });
        }
        if self.volumes.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.total_volume() <= 0.0 {
            return Err(Error::InvalidInput("configuration volumes must be nonnegative and not all zero".into()));
        }
        Ok(())
    }

    /// Draws a pair count `c`; zero-weight configurations are never chosen.
    pub fn draw_configuration<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = self.total_volume();
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (c, &v) in self.volumes.iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            last_positive = c;
            acc += v;
            if u < acc {
                return c;
            }
        }
        last_positive
    }
}

/// Default Monte Carlo size for [`estimate_configuration_volumes`]: keeps the
/// standard error of the normalised weights near `1e-3`.
pub fn default_volume_samples(lag: usize) -> u64 {
    if lag <= 4 {
        1_000_000
    } else {
        10_000_000
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn check_lag(lag: usize) -> Result<()> {
    if lag == 0 || lag > MAX_LAG {
        return Err(Error::InvalidInput(format!("lag must be in 1..={MAX_LAG}, got {lag}")));
    }
    Ok(())
}

/// One uniform draw from `disk^c × [-1, 1)^(L-2c)`. Pair representatives may
/// have either sign of `y`.
fn propose<R: Rng + ?Sized>(rng: &mut R, lag: usize, c: usize, pairs: &mut Vec<(f64, f64)>, reals: &mut Vec<f64>) {
    pairs.clear();
    reals.clear();
    for _ in 0..c {
        let r = rng.random::<f64>().sqrt();
        let theta = 2.0 * PI * rng.random::<f64>();
        pairs.push((r * theta.cos(), r * theta.sin()));
    }
    for _ in 0..lag - 2 * c {
        reals.push(2.0 * rng.random::<f64>() - 1.0);
    }
}

/// `|V|` of the expanded root list `(x ± jy, ..., reals)`.
fn abs_vandermonde(pairs: &[(f64, f64)], reals: &[f64]) -> f64 {
    let mut product = 1.0;
    for (i, &(x, y)) in pairs.iter().enumerate() {
        // the pair with itself: |2jy|
        product *= 2.0 * y.abs();
        for &(u, v) in &pairs[i + 1..] {
            // four cross terms between {x ± jy} and {u ± jv}
            let dx = x - u;
            product *= (dx * dx + (y - v) * (y - v)) * (dx * dx + (y + v) * (y + v));
        }
        for &r in reals {
            let dx = x - r;
            product *= dx * dx + y * y;
        }
    }
    for (i, &r) in reals.iter().enumerate() {
        for &s in &reals[i + 1..] {
            product *= (r - s).abs();
        }
    }
    product
}

/// Monte Carlo estimate of each configuration volume
/// `π^c 2^(L-2c) / (c! (L-2c)!) · E|V|`, the expectation taken over uniform
/// roots on `disk^c × [-1, 1]^(L-2c)`. Configuration `c` uses the stream
/// `derive_seed(seed, c)`.
pub fn estimate_configuration_volumes(lag: usize, n_samples: u64, seed: u64) -> Result<ConfigurationWeights> {
    check_lag(lag)?;
    if n_samples < 1000 {
        return Err(Error::InvalidInput(format!("need at least 1000 volume samples, got {n_samples}")));
    }
    let mut volumes = Vec::with_capacity(lag / 2 + 1);
    let mut standard_errors = Vec::with_capacity(lag / 2 + 1);
    let mut pairs = Vec::new();
    let mut reals = Vec::new();
    for c in 0..=lag / 2 {
        let mut rng = rng_from_seed(derive_seed(seed, c as u64));
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n_samples {
            propose(&mut rng, lag, c, &mut pairs, &mut reals);
            let v = abs_vandermonde(&pairs, &reals);
            sum += v;
            sum_sq += v * v;
        }
        let n = n_samples as f64;
        let mean = sum / n;
        let variance = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        let scale = PI.powi(c as i32) * 2f64.powi((lag - 2 * c) as i32) / (factorial(c) * factorial(lag - 2 * c));
        volumes.push(scale * mean);
        standard_errors.push(scale * (variance / n).sqrt());
    }
    Ok(ConfigurationWeights { order: lag, n_samples, seed, volumes, standard_errors })
}

/// Cache file for a volume estimate inside `dir`.
pub fn volume_cache_path(dir: &Path, lag: usize, n_samples: u64, seed: u64) -> PathBuf {
    dir.join(format!("volumes_L{lag}_n{n_samples}_s{seed}.json"))
}

/// Reads a cached estimate from `dir` or computes and stores it there.
/// Without a directory the estimate is always recomputed.
pub fn load_or_estimate_volumes(
    dir: Option<&Path>,
    lag: usize,
    n_samples: u64,
    seed: u64,
) -> Result<ConfigurationWeights> {
    let Some(dir) = dir else {
        return estimate_configuration_volumes(lag, n_samples, seed);
    };
    let path = volume_cache_path(dir, lag, n_samples, seed);
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(weights) = serde_json::from_str::<ConfigurationWeights>(&text) {
            if weights.validate().is_ok()
                && weights.order == lag
                && weights.n_samples == n_samples
                && weights.seed == seed
            {
                return Ok(weights);
            }
        }
    }
    let weights = estimate_configuration_volumes(lag, n_samples, seed)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(&path, serde_json::to_string_pretty(&weights)?)?;
    Ok(weights)
}

/// Draws roots with density `∝ |V|` on `disk^c × (-1, 1)^(L-2c)` by joint
/// rejection against the bound `|V| ≤ 2^(L(L-1)/2)`.
pub fn sample_roots<R: Rng + ?Sized>(lag: usize, c: usize, rng: &mut R) -> Result<RootSet> {
    sample_roots_with_budget(lag, c, rng, DEFAULT_REJECTION_BUDGET)
}

pub fn sample_roots_with_budget<R: Rng + ?Sized>(lag: usize, c: usize, rng: &mut R, budget: u64) -> Result<RootSet> {
    check_lag(lag)?;
    if c > lag / 2 {
        return Err(Error::InvalidInput(format!("{c} conjugate pairs do not fit in lag {lag}")));
    }
    let bound = 2f64.powi((lag * (lag - 1) / 2) as i32);
    let mut pairs = Vec::with_capacity(c);
    let mut reals = Vec::with_capacity(lag - 2 * c);
    for _ in 0..budget {
        propose(rng, lag, c, &mut pairs, &mut reals);
        if rng.random::<f64>() * bound >= abs_vandermonde(&pairs, &reals) {
            continue;
        }
        let upper: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x, y.abs())).collect();
        // boundary draws (y = 0, r = -1) have probability zero; treat them as rejections
        if let Ok(roots) = RootSet::new(upper, reals.clone()) {
            return Ok(roots);
        }
    }
    Err(Error::RejectionBudgetExceeded { lag, proposals: budget })
}

/// One filter uniformly distributed over the stable region `R_L`.
pub fn sample_uniform_stable_filter<R: Rng + ?Sized>(weights: &ConfigurationWeights, rng: &mut R) -> Result<Filter> {
    loop {
        let c = weights.draw_configuration(rng);
        let roots = sample_roots(weights.order, c, rng)?;
        let filter = roots_to_coefficients(&roots);
        // roots within rounding of the unit circle can round to a marginal polynomial
        if filter.is_stable() {
            return Ok(filter);
        }
    }
}

/// `count` uniform stable filters from a single stream seeded by `seed`.
pub fn sample_uniform_stable_filters(weights: &ConfigurationWeights, count: usize, seed: u64) -> Result<Vec<Filter>> {
    weights.validate()?;
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| sample_uniform_stable_filter(weights, &mut rng)).collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Uniform stable filter by rejection from the box `|λ_k| ≤ C(L, k)`, which
/// contains every monic polynomial with all roots in the closed unit disk.
pub fn sample_coefficient_rejection<R: Rng + ?Sized>(lag: usize, rng: &mut R) -> Result<Filter> {
    sample_coefficient_rejection_counted(lag, rng).map(|(f, _)| f)
}

/// As [`sample_coefficient_rejection`], also returning the number of proposals used.
pub fn sample_coefficient_rejection_counted<R: Rng + ?Sized>(lag: usize, rng: &mut R) -> Result<(Filter, u64)> {
    check_lag(lag)?;
    let half_widths: Vec<f64> = (1..=lag).map(|k| binomial(lag, k)).collect();
    let mut psi = vec![0.0; lag];
    for attempt in 1..=DEFAULT_REJECTION_BUDGET {
        for (p, &w) in psi.iter_mut().zip(&half_widths) {
            *p = w * (2.0 * rng.random::<f64>() - 1.0);
        }
        if is_stable(&psi) {
            return Ok((Filter::new(psi)?, attempt));
        }
    }
    Err(Error::RejectionBudgetExceeded { lag, proposals: DEFAULT_REJECTION_BUDGET })
}
