//! Stable AR filters and their root-domain representation.
//!
//! A filter `ψ = (ψ_1, ..., ψ_L)` drives `x_n = Σ ψ_l x_{n-l} + ε_n`. Its
//! characteristic polynomial is `z^L - Σ ψ_l z^{L-l}`; the filter is stable when
//! every root of that polynomial lies strictly inside the unit circle.

mod distance;

pub use distance::{
    autocovariance_form, filter_distance, filter_distance_quadrature, PreparedGenerator, DEGENERATE_QUADRATURE_POINTS,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Imaginary parts at or below this magnitude mark a root as real.
pub const REAL_ROOT_THRESHOLD: f64 = 1e-9;

/// Roots this close to the unit circle are rejected as not stable.
const UNIT_CIRCLE_MARGIN: f64 = 1e-12;

/// Coefficient vector of an AR filter, lowest lag first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Filter {
    coefficients: Vec<f64>,
}

impl Filter {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidInput("filter must have at least one coefficient".into()));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("filter coefficients must be finite".into()));
        }
        Ok(Filter { coefficients })
    }

    /// The all-zero filter (white noise generator).
    pub fn zeros(lag: usize) -> Self {
        assert!(lag >= 1, "lag must be positive");
        Filter { coefficients: vec![0.0; lag] }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn lag(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_stable(&self) -> bool {
        is_stable(&self.coefficients)
    }

    /// One-step prediction `ψᵀ x_n`, where `history[0] = x_{n-1}`, `history[1] = x_{n-2}`, ...
    #[inline]
    pub fn predict(&self, history: &[f64]) -> f64 {
        self.coefficients.iter().zip(history).map(|(c, x)| c * x).sum()
    }
}

impl TryFrom<Vec<f64>> for Filter {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Filter::new(value)
    }
}

impl From<Filter> for Vec<f64> {
    fn from(f: Filter) -> Self {
        f.coefficients
    }
}

/// Root-domain form of a stable filter: `c` conjugate pairs `x ± jy` (stored as
/// the upper half-plane point `(x, y)`, `y > 0`) plus `L - 2c` real roots.
///
/// Pairs are kept sorted by `(x, y)` and reals ascending, so two root sets of the
/// same polynomial compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RootSetRepr")]
pub struct RootSet {
    complex_pairs: Vec<(f64, f64)>,
    reals: Vec<f64>,
}

#[derive(Deserialize)]
struct RootSetRepr {
    complex_pairs: Vec<(f64, f64)>,
    reals: Vec<f64>,
}

impl TryFrom<RootSetRepr> for RootSet {
    type Error = Error;

    fn try_from(r: RootSetRepr) -> Result<Self> {
        RootSet::new(r.complex_pairs, r.reals)
    }
}

impl RootSet {
    /// Validates stability and puts the roots in canonical order.
    pub fn new(mut complex_pairs: Vec<(f64, f64)>, mut reals: Vec<f64>) -> Result<Self> {
        if complex_pairs.is_empty() && reals.is_empty() {
            return Err(Error::InvalidInput("root set must contain at least one root".into()));
        }
        for &(x, y) in &complex_pairs {
            if !(x.is_finite() && y.is_finite()) || y <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "complex pair ({x}, {y}) must have a positive imaginary part"
                )));
            }
            let modulus = x.hypot(y);
            if modulus >= 1.0 {
                return Err(Error::NotStable { modulus });
            }
        }
        for &r in &reals {
            if !r.is_finite() {
                return Err(Error::InvalidInput("real roots must be finite".into()));
            }
            if r.abs() >= 1.0 {
                return Err(Error::NotStable { modulus: r.abs() });
            }
        }
        complex_pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        reals.sort_by(f64::total_cmp);
        Ok(RootSet { complex_pairs, reals })
    }

    pub fn complex_pairs(&self) -> &[(f64, f64)] {
        &self.complex_pairs
    }

    pub fn reals(&self) -> &[f64] {
        &self.reals
    }

    /// Number of conjugate pairs `c`.
    pub fn n_pairs(&self) -> usize {
        self.complex_pairs.len()
    }

    /// Polynomial degree `L = 2c + r`.
    pub fn order(&self) -> usize {
        2 * self.complex_pairs.len() + self.reals.len()
    }

    /// Full root list: each pair as `(x - jy, x + jy)`, then the reals.
    pub fn expanded(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.order());
        for &(x, y) in &self.complex_pairs {
            out.push(Complex64::new(x, -y));
            out.push(Complex64::new(x, y));
        }
        out.extend(self.reals.iter().map(|&r| Complex64::new(r, 0.0)));
        out
    }
}

/// Filter coefficients from raw root parameters, without validation.
///
/// Multiplies the real quadratics `z² - 2xz + x² + y²` and linear factors
/// `z - r`, so the coefficients come out real with no imaginary residue.
pub fn coefficients_from_parts(complex_pairs: &[(f64, f64)], reals: &[f64]) -> Vec<f64> {
    let degree = 2 * complex_pairs.len() + reals.len();
    // poly[k] is the coefficient of z^{degree-k}, i.e. λ_k.
    let mut poly = Vec::with_capacity(degree + 1);
    poly.push(1.0);
    for &(x, y) in complex_pairs {
        multiply_monic(&mut poly, &[-2.0 * x, x * x + y * y]);
    }
    for &r in reals {
        multiply_monic(&mut poly, &[-r]);
    }
    poly[1..].iter().map(|l| -l).collect()
}

fn multiply_monic(poly: &mut Vec<f64>, factor_tail: &[f64]) {
    let old = poly.clone();
    poly.resize(old.len() + factor_tail.len(), 0.0);
    for (k, slot) in poly.iter_mut().enumerate().skip(1) {
        let mut acc = if k < old.len() { old[k] } else { 0.0 };
        for (j, f) in factor_tail.iter().enumerate() {
            if let Some(o) = k.checked_sub(j + 1).and_then(|i| old.get(i)) {
                acc += f * o;
            }
        }
        *slot = acc;
    }
}

/// `ψ_l = -λ_l` with `λ_k = (-1)^k e_k(a_1..a_L)`.
pub fn roots_to_coefficients(roots: &RootSet) -> Filter {
    Filter { coefficients: coefficients_from_parts(&roots.complex_pairs, &roots.reals) }
}

/// Evaluates `z^L - Σ ψ_l z^{L-l}` and its derivative by Horner's rule.
fn eval_characteristic(psi: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in psi {
        dp = dp * z + p;
        p = p * z - c;
    }
    (p, dp)
}

/// All roots of `z^L - Σ ψ_l z^{L-l}` (no stability requirement).
///
/// Trailing zero coefficients are deflated as exact zero roots. The rest come
/// from the eigenvalues of the companion matrix (Aberth iteration if the QR
/// sweep fails), each polished by Newton steps that are kept only while they
/// reduce the residual.
pub fn polynomial_roots(psi: &[f64]) -> Result<Vec<Complex64>> {
    let degree = psi.len();
    let effective = psi.iter().rposition(|&c| c != 0.0).map_or(0, |i| i + 1);
    let psi = &psi[..effective];
    let mut roots = match effective {
        0 => Vec::new(),
        1 => vec![Complex64::new(psi[0], 0.0)],
        _ => match companion_eigenvalues(psi) {
            Some(r) => r,
            None => aberth(psi).ok_or(Error::RootFindingFailure { degree })?,
        },
    };
    for root in roots.iter_mut() {
        polish(psi, root);
        if !(root.re.is_finite() && root.im.is_finite()) {
            return Err(Error::RootFindingFailure { degree });
        }
    }
    roots.resize(degree, Complex64::new(0.0, 0.0));
    Ok(roots)
}

fn companion_eigenvalues(psi: &[f64]) -> Option<Vec<Complex64>> {
    let degree = psi.len();
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for (j, &c) in psi.iter().enumerate() {
        companion[(0, j)] = c;
    }
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    let schur = companion.try_schur(f64::EPSILON, 10_000)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

/// Simultaneous Aberth–Ehrlich iteration, converged when every correction is
/// below `1e-12` relative.
fn aberth(psi: &[f64]) -> Option<Vec<Complex64>> {
    let degree = psi.len();
    let radius = 1.0 + psi.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let mut z: Vec<Complex64> = (0..degree)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / degree as f64 + 0.4;
            Complex64::from_polar(0.5 * radius, angle)
        })
        .collect();
    for _ in 0..1000 {
        let mut largest = 0.0_f64;
        for k in 0..degree {
            let (p, dp) = eval_characteristic(psi, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..degree).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let correction = ratio / (1.0 - ratio * repulsion);
            z[k] -= correction;
            largest = largest.max(correction.norm() / z[k].norm().max(1.0));
        }
        if largest < 1e-12 {
            return Some(z);
        }
    }
    None
}

fn polish(psi: &[f64], root: &mut Complex64) {
    let (mut value, _) = eval_characteristic(psi, *root);
    for _ in 0..4 {
        let (p, dp) = eval_characteristic(psi, *root);
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        let candidate = *root - step;
        let (next, _) = eval_characteristic(psi, candidate);
        if next.norm() >= value.norm() {
            break;
        }
        *root = candidate;
        value = next;
        if step.norm() <= 1e-12 * root.norm().max(1.0) {
            break;
        }
    }
}

/// Root-domain representation of a stable filter.
pub fn coefficients_to_roots(filter: &Filter) -> Result<RootSet> {
    let roots = polynomial_roots(filter.coefficients())?;
    if let Some(r) = roots.iter().find(|r| r.norm() >= 1.0 - UNIT_CIRCLE_MARGIN) {
        return Err(Error::NotStable { modulus: r.norm() });
    }
    let mut complex_pairs = Vec::new();
    let mut reals = Vec::new();
    let mut n_lower = 0usize;
    for r in &roots {
        if r.im > REAL_ROOT_THRESHOLD {
            complex_pairs.push((r.re, r.im));
        } else if r.im < -REAL_ROOT_THRESHOLD {
            n_lower += 1;
        } else {
            reals.push(r.re);
        }
    }
    if n_lower != complex_pairs.len() {
        return Err(Error::RootFindingFailure { degree: roots.len() });
    }
    RootSet::new(complex_pairs, reals)
}

/// Schur–Cohn stability test by step-down recursion on the reflection
/// coefficients of `z^L - Σ ψ_l z^{L-l}`. A root of modulus exactly one counts
/// as unstable.
pub fn is_stable(coefficients: &[f64]) -> bool {
    // a[0] = 1, a[k] = λ_k = -ψ_k
    let mut a: Vec<f64> = std::iter::once(1.0).chain(coefficients.iter().map(|c| -c)).collect();
    for m in (1..a.len()).rev() {
        let k = a[m];
        if !(k.abs() < 1.0) {
            return false;
        }
        let scale = 1.0 - k * k;
        let prev: Vec<f64> = (0..m).map(|i| (a[i] - k * a[m - i]) / scale).collect();
        a.truncate(m);
        a.copy_from_slice(&prev);
    }
    true
}

/// `∏_{u<v} (a_v - a_u)` over an explicit root list.
pub fn vandermonde_of(roots: &[Complex64]) -> Complex64 {
    let mut product = Complex64::new(1.0, 0.0);
    for v in 1..roots.len() {
        for u in 0..v {
            product *= roots[v] - roots[u];
        }
    }
    product
}

/// Vandermonde polynomial of the canonically expanded roots.
pub fn vandermonde(roots: &RootSet) -> Complex64 {
    vandermonde_of(&roots.expanded())
}
