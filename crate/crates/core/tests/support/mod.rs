//! Statistical and numerical oracles shared by the integration tests.
#![allow(dead_code)]

use argap::filter_core::{coefficients_from_parts, filter_distance_quadrature};
use argap::{Filter, RootSet};
use nalgebra::DMatrix;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Root set with `c` complex pairs uniform on the disk of radius `radius` and
/// real roots uniform on `(-radius, radius)`.
pub fn random_roots<R: Rng>(rng: &mut R, lag: usize, c: usize, radius: f64) -> RootSet {
    let pairs = (0..c)
        .map(|_| loop {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y: f64 = rng.random_range(0.0..1.0);
            if x * x + y * y < 1.0 && y > 1e-3 {
                break (x * radius, y * radius);
            }
        })
        .collect();
    let reals = (0..lag - 2 * c).map(|_| rng.random_range(-radius..radius)).collect();
    RootSet::new(pairs, reals).unwrap()
}

/// Trapezoidal quadrature of the prediction-error integral, doubling the grid
/// until two successive values agree to `rel`.
pub fn converged_quadrature(a: &Filter, b: &Filter, sigma2: f64, rel: f64) -> f64 {
    let mut n = 256;
    let mut prev = filter_distance_quadrature(a, b, sigma2, n).unwrap();
    loop {
        n *= 2;
        let next = filter_distance_quadrature(a, b, sigma2, n).unwrap();
        if (next - prev).abs() <= rel * next.abs().max(1e-300) || n >= 1 << 22 {
            return next;
        }
        prev = next;
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

/// Absolute determinant of the central-difference Jacobian of the map from
/// `(x_1, y_1, ..., x_c, y_c, r_1, ..., r_{L-2c})` to the filter coefficients.
pub fn jacobian_determinant(roots: &RootSet, h: f64) -> f64 {
    let mut params: Vec<f64> = roots.complex_pairs().iter().flat_map(|&(x, y)| [x, y]).collect();
    params.extend_from_slice(roots.reals());
    let c = roots.n_pairs();
    let eval = |p: &[f64]| {
        let pairs: Vec<(f64, f64)> = (0..c).map(|k| (p[2 * k], p[2 * k + 1])).collect();
        coefficients_from_parts(&pairs, &p[2 * c..])
    };
    let l = params.len();
    let mut jac = DMatrix::zeros(l, l);
    for j in 0..l {
        let mut up = params.clone();
        let mut down = params.clone();
        up[j] += h;
        down[j] -= h;
        let (fu, fd) = (eval(&up), eval(&down));
        for i in 0..l {
            jac[(i, j)] = (fu[i] - fd[i]) / (2.0 * h);
        }
    }
    jac.determinant().abs()
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < n && j < m {
        let t = a[i].min(b[j]);
        while i < n && a[i] <= t {
            i += 1;
        }
        while j < m && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    (d, kolmogorov_survival(lambda))
}

/// Chi-squared goodness-of-fit p-value of `counts` against `expected`.
pub fn chi2_goodness_of_fit(counts: &[usize], expected: &[f64]) -> f64 {
    let stat: f64 = counts.iter().zip(expected).map(|(&o, &e)| (o as f64 - e).powi(2) / e).sum();
    let df = (counts.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

/// Chi-squared test that two samples share cell probabilities; cells empty in
/// both samples are dropped.
pub fn chi2_homogeneity(a: &[usize], b: &[usize]) -> f64 {
    let (na, nb) = (a.iter().sum::<usize>() as f64, b.iter().sum::<usize>() as f64);
    let mut stat = 0.0;
    let mut cells = 0;
    for (&x, &y) in a.iter().zip(b) {
        let total = (x + y) as f64;
        if total == 0.0 {
            continue;
        }
        cells += 1;
        let ea = total * na / (na + nb);
        let eb = total * nb / (na + nb);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

/// Cell (0..16) of the AR(2) stability triangle, split into 16 congruent
/// sub-triangles by quartering each side.
pub fn triangle_cell(psi1: f64, psi2: f64) -> usize {
    // Barycentric weights of the vertices (-2,-1), (2,-1), (0,1).
    let w3 = (psi2 + 1.0) / 2.0;
    let w2 = (psi1 + 2.0 - 2.0 * w3) / 4.0;
    let w1 = 1.0 - w2 - w3;
    let (u, v) = ((4.0 * w1).clamp(0.0, 3.999_999), (4.0 * w2).clamp(0.0, 3.999_999));
    let (i, j) = (u.floor() as usize, v.floor() as usize);
    let upright = u.fract() + v.fract() < 1.0 || i + j == 3;
    // 10 upright cells with i + j <= 3, then 6 inverted cells with i + j <= 2.
    let index = |i: usize, j: usize, size: usize| (0..i).map(|r| size - r).sum::<usize>() + j;
    if upright {
        index(i, j.min(3 - i), 4)
    } else {
        10 + index(i, j.min(2 - i), 3)
    }
}

/// Cell index on a grid whose per-coordinate edges are the quantiles of `pooled`.
pub struct QuantileGrid {
    edges: Vec<Vec<f64>>,
    bins: usize,
}

impl QuantileGrid {
    pub fn new(pooled: &[Vec<f64>], bins: usize) -> Self {
        let dims = pooled[0].len();
        let edges = (0..dims)
            .map(|d| {
                let mut col: Vec<f64> = pooled.iter().map(|p| p[d]).collect();
                col.sort_by(f64::total_cmp);
                (1..bins).map(|k| col[k * col.len() / bins]).collect()
            })
            .collect();
        QuantileGrid { edges, bins }
    }

    pub fn n_cells(&self) -> usize {
        self.bins.pow(self.edges.len() as u32)
    }

    pub fn cell(&self, point: &[f64]) -> usize {
        point.iter().zip(&self.edges).fold(0, |acc, (x, e)| acc * self.bins + e.partition_point(|q| q <= x))
    }

    pub fn counts(&self, points: &[Vec<f64>]) -> Vec<usize> {
        let mut counts = vec![0; self.n_cells()];
        for p in points {
            counts[self.cell(p)] += 1;
        }
        counts
    }
}
