//! Mean-squared-prediction-error distance between AR filters.
//!
//! `D(ψ_A, ψ_B)` is the excess one-step prediction error incurred when data
//! generated by `ψ_A` is predicted with `ψ_B`:
//!
//! ```text
//! D = σ²/2π ∫ |Ψ_A(e^{-jω}) - Ψ_B(e^{-jω})|² / |1 - Ψ_A(e^{-jω})|² dω
//! ```
//!
//! Three independent evaluations live here: the residue sum over the roots of
//! `ψ_A` ([`filter_distance`]), trapezoidal quadrature of the spectral integral
//! ([`filter_distance_quadrature`]) and the Yule–Walker quadratic form
//! `δᵀΓδ` ([`autocovariance_form`]).

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{coefficients_to_roots, Filter};
use crate::error::{Error, Result};

/// Roots of the generator closer than this are treated as coincident.
const COINCIDENT_ROOT_GAP: f64 = 1e-7;

/// Node count used when coincident roots force the quadrature route.
pub const DEGENERATE_QUADRATURE_POINTS: usize = 16_384;

const IMAGINARY_RESIDUE_TOLERANCE: f64 = 1e-8;
const NEGATIVE_CLAMP: f64 = 1e-10;

/// A stable generator with its roots and per-root residue denominators
/// precomputed, so distances to many candidate filters are cheap.
#[derive(Debug, Clone)]
pub struct PreparedGenerator {
    filter: Filter,
    roots: Vec<Complex64>,
    // a_k^{-1}-free denominators ∏_{l≠k}(a_k - a_l) · ∏_l (1 - a_k a_l*)
    denominators: Vec<Complex64>,
    degenerate: bool,
}

impl PreparedGenerator {
    pub fn new(psi_a: &Filter) -> Result<Self> {
        if !psi_a.is_stable() {
            return Err(Error::UnstableGenerator);
        }
        let roots = match coefficients_to_roots(psi_a) {
            Ok(r) => r.expanded(),
            Err(Error::NotStable { .. }) => return Err(Error::UnstableGenerator),
            Err(e) => return Err(e),
        };
        let mut degenerate = false;
        let mut denominators = Vec::with_capacity(roots.len());
        for (k, &ak) in roots.iter().enumerate() {
            let mut spread = Complex64::new(1.0, 0.0);
            let mut reflection = Complex64::new(1.0, 0.0);
            for (l, &al) in roots.iter().enumerate() {
                if l != k {
                    let gap = ak - al;
                    if gap.norm() < COINCIDENT_ROOT_GAP {
                        degenerate = true;
                    }
                    spread *= gap;
                }
                reflection *= 1.0 - ak * al.conj();
            }
            denominators.push(spread * reflection);
        }
        Ok(PreparedGenerator { filter: psi_a.clone(), roots, denominators, degenerate })
    }

    pub fn filter(&self) -> &Filter {
        &self.filter
    }

    /// Whether the generator has (numerically) repeated roots, which sends
    /// [`distance_to`](Self::distance_to) to quadrature.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// `D(generator, psi_b)`.
    pub fn distance_to(&self, psi_b: &Filter, sigma2: f64) -> Result<f64> {
        check_sigma2(sigma2)?;
        check_lengths(&self.filter, psi_b)?;
        if self.degenerate {
            return quadrature_unchecked(&self.filter, psi_b, sigma2, DEGENERATE_QUADRATURE_POINTS);
        }
        match self.residue_sum(psi_b) {
            Some(unit) => Ok(sigma2 * unit),
            None => quadrature_unchecked(&self.filter, psi_b, sigma2, DEGENERATE_QUADRATURE_POINTS),
        }
    }

    /// Residue sum at unit noise variance, or `None` when the result fails its
    /// realness / sign sanity checks.
    ///
    /// Term `k` of the root formula is
    /// `∏_l(a_k - b_l) / (a_k ∏_{l≠k}(a_k - a_l)) · (∏_l(1 - a_k b_l*) / ∏_l(1 - a_k a_l*) - 1)`.
    /// The products over the `b_l` are the monic polynomial of `ψ_B` and its
    /// reversal evaluated at `a_k`. Subtracting the (vanishing) polynomial of
    /// `ψ_A` from both leaves `Σ δ_l a_k^{L-l}` and `Σ δ_l a_k^l` with
    /// `δ = ψ_A - ψ_B`; the second carries the `a_k` factor that cancels the
    /// `1/a_k`. No roots of `ψ_B` are needed and `a_k = 0` is not special.
    fn residue_sum(&self, psi_b: &Filter) -> Option<f64> {
        let delta: Vec<f64> = self.filter.coefficients().iter().zip(psi_b.coefficients()).map(|(a, b)| a - b).collect();
        if delta.iter().all(|d| *d == 0.0) {
            return Some(0.0);
        }
        let mut total = Complex64::new(0.0, 0.0);
        let mut magnitude = 0.0;
        for (&ak, &den) in self.roots.iter().zip(&self.denominators) {
            // Σ δ_l a^{L-l}  (Horner from δ_1)
            let mut forward = Complex64::new(0.0, 0.0);
            for &d in &delta {
                forward = forward * ak + d;
            }
            // Σ δ_l a^{l-1}  (Horner from δ_L)
            let mut backward = Complex64::new(0.0, 0.0);
            for &d in delta.iter().rev() {
                backward = backward * ak + d;
            }
            let term = forward * backward / den;
            magnitude += term.norm();
            total += term;
        }
        if !(total.re.is_finite() && total.im.is_finite()) {
            return None;
        }
        if total.im.abs() > IMAGINARY_RESIDUE_TOLERANCE * magnitude.max(f64::MIN_POSITIVE) {
            return None;
        }
        if total.re < 0.0 {
            if total.re >= -NEGATIVE_CLAMP {
                return Some(0.0);
            }
            return None;
        }
        Some(total.re)
    }
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("noise variance must be positive, got {sigma2}")))
    }
}

fn check_lengths(a: &Filter, b: &Filter) -> Result<()> {
    if a.lag() != b.lag() {
        return Err(Error::LengthMismatch { expected: a.lag(), actual: b.lag() });
    }
    Ok(())
}

/// Distance `D(ψ_A, ψ_B)` in closed form over the roots of `ψ_A`.
///
/// Generators with coincident roots are evaluated by quadrature with
/// [`DEGENERATE_QUADRATURE_POINTS`] nodes instead.
pub fn filter_distance(psi_a: &Filter, psi_b: &Filter, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    check_lengths(psi_a, psi_b)?;
    PreparedGenerator::new(psi_a)?.distance_to(psi_b, sigma2)
}

/// Trapezoidal rule on `n_points` equispaced nodes over `[-π, π)`.
///
/// The integrand is smooth and periodic, so the error decays geometrically at
/// rate `ρ^n`, `ρ` being the largest root modulus of `ψ_A`.
pub fn filter_distance_quadrature(psi_a: &Filter, psi_b: &Filter, sigma2: f64, n_points: usize) -> Result<f64> {
    check_sigma2(sigma2)?;
    check_lengths(psi_a, psi_b)?;
    if n_points < 64 {
        return Err(Error::InvalidInput(format!("quadrature needs at least 64 nodes, got {n_points}")));
    }
    if !psi_a.is_stable() {
        return Err(Error::UnstableGenerator);
    }
    quadrature_unchecked(psi_a, psi_b, sigma2, n_points)
}

fn quadrature_unchecked(psi_a: &Filter, psi_b: &Filter, sigma2: f64, n_points: usize) -> Result<f64> {
    let a = psi_a.coefficients();
    let b = psi_b.coefficients();
    let step = 2.0 * std::f64::consts::PI / n_points as f64;
    let mut sum = 0.0;
    for k in 0..n_points {
        let omega = -std::f64::consts::PI + step * k as f64;
        let z = Complex64::from_polar(1.0, -omega);
        let mut power = Complex64::new(1.0, 0.0);
        let mut diff = Complex64::new(0.0, 0.0);
        let mut denom = Complex64::new(1.0, 0.0);
        for (&ca, &cb) in a.iter().zip(b) {
            power *= z;
            diff += power * (ca - cb);
            denom -= power * ca;
        }
        sum += diff.norm_sqr() / denom.norm_sqr();
    }
    Ok(sigma2 * sum / n_points as f64)
}

/// Stationary autocovariance matrix `Γ[i][j] = Cov(x_{n-1-i}, x_{n-1-j})` of
/// the AR(`ψ_A`) process with innovation variance `sigma2`, from the
/// Yule–Walker equations. `D(ψ_A, ψ_B) = δᵀΓδ` with `δ = ψ_A - ψ_B`.
pub fn autocovariance_form(psi_a: &Filter, sigma2: f64) -> Result<DMatrix<f64>> {
    check_sigma2(sigma2)?;
    if !psi_a.is_stable() {
        return Err(Error::UnstableGenerator);
    }
    let psi = psi_a.coefficients();
    let lag = psi.len();
    // Unknowns γ(0..=L): γ(k) - Σ_l ψ_l γ(|k-l|) = σ² [k = 0].
    let mut system = DMatrix::<f64>::identity(lag + 1, lag + 1);
    for k in 0..=lag {
        for (l, &c) in psi.iter().enumerate() {
            let lag_index = (k as isize - (l as isize + 1)).unsigned_abs();
            system[(k, lag_index)] -= c;
        }
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(lag + 1);
    rhs[0] = sigma2;
    let gamma = system.lu().solve(&rhs).ok_or(Error::UnstableGenerator)?;
    Ok(DMatrix::from_fn(lag, lag, |i, j| gamma[i.abs_diff(j)]))
}
