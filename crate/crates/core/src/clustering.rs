//! k-medoids clustering of filters under the (asymmetric) prediction-error distance.
//!
//! The medoid always occupies the generator slot: a point `y` in the cluster of
//! medoid `μ` costs `D(μ, y)`, i.e. `table.get(μ, y)`.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter_core::{Filter, PreparedGenerator};
use crate::seed::{derive_seed, rng_from_seed};

/// Dense `n × n` table, `get(i, j) = D(filter_i, filter_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceTable {
    /// Builds a table from rows; the diagonal must be zero and entries finite and nonnegative.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::LengthMismatch { expected: n, actual: row.len() });
            }
            if row[i] != 0.0 {
                return Err(Error::InvalidInput(format!("diagonal entry {i} is {} (must be 0)", row[i])));
            }
            if let Some(bad) = row.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
                return Err(Error::InvalidInput(format!("row {i} contains invalid distance {bad}")));
            }
            entries.extend(row);
        }
        Ok(DistanceTable { n, entries })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.n.max(1)).take(self.n)
    }

    /// Within-cluster sum of distances for a fixed medoid set, each point
    /// charged to its nearest medoid.
    pub fn cost(&self, medoids: &[usize]) -> f64 {
        (0..self.n).map(|o| medoids.iter().map(|&m| self.get(m, o)).fold(f64::INFINITY, f64::min)).sum()
    }
}

/// Pairwise distance table at noise variance `sigma2`.
pub fn pairwise_distances(filters: &[Filter], sigma2: f64) -> Result<DistanceTable> {
    let lag = filters.first().map(Filter::lag).unwrap_or(0);
    if let Some(f) = filters.iter().find(|f| f.lag() != lag) {
        return Err(Error::LengthMismatch { expected: lag, actual: f.lag() });
    }
    let row = |i: usize| -> Result<Vec<f64>> {
        let generator = PreparedGenerator::new(&filters[i])?;
        filters
            .iter()
            .enumerate()
            .map(|(j, f)| if i == j { Ok(0.0) } else { generator.distance_to(f, sigma2) })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let rows: Result<Vec<Vec<f64>>> = (0..filters.len()).into_par_iter().map(row).collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Result<Vec<Vec<f64>>> = (0..filters.len()).map(row).collect();
    DistanceTable::from_rows(rows?)
}

/// Outcome of a k-medoids run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    /// Medoid point indices, ascending.
    pub medoid_indices: Vec<usize>,
    /// For each point, the position in `medoid_indices` of its medoid.
    pub assignments: Vec<usize>,
    /// Within-cluster sum of distances at the returned medoids.
    pub wcsd: f64,
}

impl ClusteringResult {
    fn from_medoids(table: &DistanceTable, mut medoids: Vec<usize>) -> Self {
        medoids.sort_unstable();
        let mut assignments = Vec::with_capacity(table.len());
        let mut wcsd = 0.0;
        for o in 0..table.len() {
            let (slot, d) = match medoids.binary_search(&o) {
                Ok(slot) => (slot, 0.0),
                Err(_) => nearest(table, &medoids, o),
            };
            assignments.push(slot);
            wcsd += d;
        }
        ClusteringResult { medoid_indices: medoids, assignments, wcsd }
    }
}

/// Nearest medoid of point `o`, ties to the lowest slot.
fn nearest(table: &DistanceTable, medoids: &[usize], o: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (slot, &m) in medoids.iter().enumerate() {
        let d = table.get(m, o);
        if d < best.1 {
            best = (slot, d);
        }
    }
    best
}

/// Per-point nearest and second-nearest medoid bookkeeping for the swap phase.
struct Assignment {
    near: Vec<usize>,
    dnear: Vec<f64>,
    dsec: Vec<f64>,
    loss: f64,
}

impl Assignment {
    fn new(table: &DistanceTable, medoids: &[usize]) -> Self {
        let n = table.len();
        let mut near = vec![0; n];
        let mut dnear = vec![f64::INFINITY; n];
        let mut dsec = vec![f64::INFINITY; n];
        for o in 0..n {
            for (slot, &m) in medoids.iter().enumerate() {
                let d = if m == o { 0.0 } else { table.get(m, o) };
                if d < dnear[o] {
                    dsec[o] = dnear[o];
                    dnear[o] = d;
                    near[o] = slot;
                } else if d < dsec[o] {
                    dsec[o] = d;
                }
            }
        }
        let loss = dnear.iter().sum();
        Assignment { near, dnear, dsec, loss }
    }
}

/// Eager swap local search: scan candidates cyclically, apply the best swap
/// for a candidate as soon as it lowers the loss, stop after a full pass with
/// no improvement. Requires at least two medoids.
fn swap_search(table: &DistanceTable, medoids: &mut [usize]) -> f64 {
    let n = table.len();
    let k = medoids.len();
    let mut is_medoid = vec![false; n];
    for &m in medoids.iter() {
        is_medoid[m] = true;
    }
    let mut state = Assignment::new(table, medoids);
    if k >= n {
        return state.loss;
    }
    let mut removal = vec![0.0; k];
    let mut delta = vec![0.0; k];
    let refresh_removal = |state: &Assignment, removal: &mut [f64]| {
        removal.fill(0.0);
        for o in 0..n {
            removal[state.near[o]] += state.dsec[o] - state.dnear[o];
        }
    };
    refresh_removal(&state, &mut removal);
    let mut since_last_swap = 0;
    let mut candidate = 0;
    while since_last_swap < n {
        let c = candidate;
        candidate = (candidate + 1) % n;
        since_last_swap += 1;
        if is_medoid[c] {
            continue;
        }
        delta.copy_from_slice(&removal);
        let mut shared = 0.0;
        let row = table.row(c);
        for o in 0..n {
            let d = if o == c { 0.0 } else { row[o] };
            if d < state.dnear[o] {
                shared += d - state.dnear[o];
                delta[state.near[o]] += state.dnear[o] - state.dsec[o];
            } else if d < state.dsec[o] {
                delta[state.near[o]] += d - state.dsec[o];
            }
        }
        let (slot, best) =
            delta.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        if best + shared >= 0.0 {
            continue;
        }
        let old = medoids[slot];
        medoids[slot] = c;
        let next = Assignment::new(table, medoids);
        if next.loss < state.loss {
            is_medoid[old] = false;
            is_medoid[c] = true;
            state = next;
            refresh_removal(&state, &mut removal);
            since_last_swap = 0;
        } else {
            medoids[slot] = old;
        }
    }
    state.loss
}

/// Greedy farthest-point seeding from a given first medoid: each new medoid
/// is the point currently worst served (ties to the lowest index).
fn farthest_point_init(table: &DistanceTable, first: usize, m: usize) -> Vec<usize> {
    let n = table.len();
    let mut medoids = vec![first];
    let mut served: Vec<f64> = (0..n).map(|o| if o == first { 0.0 } else { table.get(first, o) }).collect();
    while medoids.len() < m {
        let mut pick = usize::MAX;
        let mut worst = f64::NEG_INFINITY;
        for (o, &d) in served.iter().enumerate() {
            if d > worst && !medoids.contains(&o) {
                worst = d;
                pick = o;
            }
        }
        medoids.push(pick);
        for (o, s) in served.iter_mut().enumerate() {
            let d = if o == pick { 0.0 } else { table.get(pick, o) };
            *s = s.min(d);
        }
    }
    medoids
}

/// Single best medoid: `argmin_i Σ_j D(i, j)`, ties to the lowest index.
fn best_single_medoid(table: &DistanceTable) -> usize {
    let mut best = (0, f64::INFINITY);
    for i in 0..table.len() {
        let total: f64 = table.row(i).iter().sum();
        if total < best.1 {
            best = (i, total);
        }
    }
    best.0
}

fn check_m(table: &DistanceTable, m: usize) -> Result<()> {
    if m < 1 || m > table.len() {
        return Err(Error::InvalidM { m, n: table.len() });
    }
    Ok(())
}

fn run_restart(table: &DistanceTable, m: usize, seed: u64, restart: usize) -> ClusteringResult {
    use rand::Rng;
    let n = table.len();
    let mut rng = rng_from_seed(derive_seed(seed, restart as u64));
    let mut medoids = if restart.is_multiple_of(2) {
        let first = rng.random_range(0..n);
        farthest_point_init(table, first, m)
    } else {
        rand::seq::index::sample(&mut rng, n, m).into_vec()
    };
    swap_search(table, &mut medoids);
    ClusteringResult::from_medoids(table, medoids)
}

/// Best of `n_restarts` swap searches.
///
/// Even restarts seed with farthest-point initialisation from a random first
/// medoid, odd restarts with a uniformly random medoid set; restart `r` uses
/// `derive_seed(seed, r)`. The lowest WCSD wins, ties to the earliest restart.
pub fn k_medoids(table: &DistanceTable, m: usize, seed: u64, n_restarts: usize) -> Result<ClusteringResult> {
    check_m(table, m)?;
    if m == 1 {
        return Ok(ClusteringResult::from_medoids(table, vec![best_single_medoid(table)]));
    }
    if m == table.len() {
        return Ok(ClusteringResult::from_medoids(table, (0..m).collect()));
    }
    let restarts = n_restarts.max(1);
    #[cfg(feature = "parallel")]
    let results: Vec<ClusteringResult> =
        (0..restarts).into_par_iter().map(|r| run_restart(table, m, seed, r)).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<ClusteringResult> = (0..restarts).map(|r| run_restart(table, m, seed, r)).collect();
    Ok(pick_best(results))
}

fn pick_best(results: Vec<ClusteringResult>) -> ClusteringResult {
    let mut iter = results.into_iter();
    let mut best = iter.next().expect("at least one candidate");
    for r in iter {
        if r.wcsd < best.wcsd {
            best = r;
        }
    }
    best
}

/// Clusterings for `M = 1..=m_max` with WCSD guaranteed non-increasing in `M`.
///
/// Each `M` takes the better of [`k_medoids`] and a warm start that adds the
/// most useful point to the `M - 1` solution before the swap search; the warm
/// start alone can never be worse than the previous `M`.
pub fn k_medoids_path(
    table: &DistanceTable,
    m_max: usize,
    seed: u64,
    n_restarts: usize,
) -> Result<Vec<ClusteringResult>> {
    check_m(table, m_max)?;
    let mut path: Vec<ClusteringResult> = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let fresh = k_medoids(table, m, derive_seed(seed, m as u64), n_restarts)?;
        let best = match path.last() {
            Some(prev) if m < table.len() => {
                let mut medoids = prev.medoid_indices.clone();
                medoids.push(best_addition(table, &medoids));
                swap_search(table, &mut medoids);
                let warm = ClusteringResult::from_medoids(table, medoids);
                pick_best(vec![fresh, warm])
            }
            _ => fresh,
        };
        path.push(best);
    }
    Ok(path)
}

/// Non-medoid point whose addition lowers the WCSD the most (ties to the lowest index).
fn best_addition(table: &DistanceTable, medoids: &[usize]) -> usize {
    let n = table.len();
    let served: Vec<f64> = (0..n).map(|o| nearest(table, medoids, o).1).collect();
    let mut best = (usize::MAX, f64::INFINITY);
    for c in (0..n).filter(|c| !medoids.contains(c)) {
        let row = table.row(c);
        let total: f64 = (0..n).map(|o| if o == c { 0.0 } else { row[o].min(served[o]) }).sum();
        if total < best.1 {
            best = (c, total);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_table(n: usize, seed: u64) -> DistanceTable {
        let mut rng = rng_from_seed(seed);
        let rows = (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { rng.random::<f64>() }).collect()).collect();
        DistanceTable::from_rows(rows).unwrap()
    }

    fn exhaustive_pairs(table: &DistanceTable) -> f64 {
        let n = table.len();
        let mut best = f64::INFINITY;
        for a in 0..n {
            for b in a + 1..n {
                best = best.min(table.cost(&[a, b]));
            }
        }
        best
    }

    #[test]
    fn pairwise_examples() {
        let t = pairwise_distances(&[Filter::new(vec![0.3]).unwrap()], 1.0).unwrap();
        assert_eq!(t.row(0), &[0.0]);

        let filters = [Filter::new(vec![0.5]).unwrap(), Filter::new(vec![0.0]).unwrap()];
        let t = pairwise_distances(&filters, 1.0).unwrap();
        assert!((t.get(0, 1) - 1.0 / 3.0).abs() < 1e-14);
        assert!((t.get(1, 0) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn all_points_as_medoids() {
        let t = random_table(7, 1);
        let r = k_medoids(&t, 7, 0, 3).unwrap();
        assert_eq!(r.wcsd, 0.0);
        assert_eq!(r.assignments, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn single_medoid_is_row_sum_minimizer() {
        let t = random_table(12, 2);
        let r = k_medoids(&t, 1, 0, 1).unwrap();
        let expected =
            (0..12).min_by(|&a, &b| t.row(a).iter().sum::<f64>().total_cmp(&t.row(b).iter().sum::<f64>())).unwrap();
        assert_eq!(r.medoid_indices, vec![expected]);
    }

    #[test]
    fn two_medoids_match_exhaustive_search() {
        for seed in 0..20 {
            let t = random_table(8, 100 + seed);
            let r = k_medoids(&t, 2, seed, 20).unwrap();
            assert!((r.wcsd - exhaustive_pairs(&t)).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn assignments_are_nearest_medoid() {
        let t = random_table(40, 3);
        let r = k_medoids(&t, 4, 5, 10).unwrap();
        let mut total = 0.0;
        for (o, &slot) in r.assignments.iter().enumerate() {
            let d = t.get(r.medoid_indices[slot], o);
            for &m in &r.medoid_indices {
                assert!(d <= t.get(m, o));
            }
            total += d;
        }
        for (slot, &m) in r.medoid_indices.iter().enumerate() {
            assert_eq!(r.assignments[m], slot);
        }
        assert!((total - r.wcsd).abs() < 1e-12);
    }

    #[test]
    fn invalid_m() {
        let t = random_table(4, 0);
        assert!(matches!(k_medoids(&t, 0, 0, 1), Err(Error::InvalidM { .. })));
        assert!(matches!(k_medoids(&t, 5, 0, 1), Err(Error::InvalidM { .. })));
    }

    #[test]
    fn path_is_monotone_and_reproducible() {
        let t = random_table(60, 4);
        let path = k_medoids_path(&t, 8, 9, 4).unwrap();
        for w in path.windows(2) {
            assert!(w[1].wcsd <= w[0].wcsd + 1e-12);
        }
        assert_eq!(path, k_medoids_path(&t, 8, 9, 4).unwrap());
    }

    #[test]
    fn table_validation() {
        assert!(DistanceTable::from_rows(vec![vec![0.0, 1.0]]).is_err());
        assert!(DistanceTable::from_rows(vec![vec![1.0]]).is_err());
        assert!(DistanceTable::from_rows(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).is_err());
    }
}
