//! K-means over discretized states and elbow selection of `k`.
//!
//! Discretized data has few distinct points, so Lloyd's algorithm runs on
//! the distinct level vectors weighted by multiplicity. This is exactly
//! k-means on the expanded data: identical points always share a cluster,
//! centroids are the same weighted means and k-means++ draws points with the
//! same probabilities.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::predicates::DiscreteState;
use crate::rng::{streams, Rng};

pub const MAX_ITER: usize = 300;
pub const DEFAULT_K_MAX: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clustering {
    /// Cluster of each input point, in input order.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
    /// `k` was lowered to the number of distinct points.
    pub k_reduced: bool,
    pub stats: KMeansStats,
}

/// Work counters; `coordinate_ops` counts per-coordinate terms evaluated in
/// squared-distance computations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct KMeansStats {
    pub distance_evals: u64,
    pub coordinate_ops: u64,
}

/// Distinct points with multiplicities, in sorted order.
#[derive(Debug, Clone)]
pub(crate) struct WeightedPoints {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub keys: Vec<DiscreteState>,
}

impl WeightedPoints {
    pub fn from_states<'a>(data: impl IntoIterator<Item = &'a DiscreteState>) -> Self {
        let mut counts: BTreeMap<&DiscreteState, usize> = BTreeMap::new();
        for s in data {
            *counts.entry(s).or_default() += 1;
        }
        let mut out = WeightedPoints {
            points: Vec::with_capacity(counts.len()),
            weights: Vec::with_capacity(counts.len()),
            keys: Vec::with_capacity(counts.len()),
        };
        for (s, c) in counts {
            out.points.push(s.0.iter().map(|&l| l as f64).collect());
            out.weights.push(c as f64);
            out.keys.push(s.clone());
        }
        out
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct WeightedFit {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
    pub stats: KMeansStats,
}

fn sq_dist(a: &[f64], b: &[f64], stats: &mut KMeansStats) -> f64 {
    stats.distance_evals += 1;
    stats.coordinate_ops += a.len() as u64;
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>], stats: &mut KMeansStats) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c, stats);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Draws an index with probability proportional to `mass`.
fn draw(mass: &[f64], rng: &mut Rng) -> usize {
    let total: f64 = mass.iter().sum();
    let target = rng.next_f64() * total;
    let mut acc = 0.0;
    for (i, &m) in mass.iter().enumerate() {
        acc += m;
        if target < acc && m > 0.0 {
            return i;
        }
    }
    // Rounding left the target past the end: take the last positive entry.
    mass.iter().rposition(|&m| m > 0.0).unwrap_or(0)
}

/// Lloyd's algorithm with k-means++ seeding. Requires `1 <= k <= data.len()`.
pub(crate) fn fit_weighted(data: &WeightedPoints, k: usize, seed: u64, max_iter: usize) -> WeightedFit {
    debug_assert!(k >= 1 && k <= data.len());
    let mut stats = KMeansStats::default();
    let mut rng = Rng::new(seed, streams::KMEANS);
    let n = data.len();

    let first = draw(&data.weights, &mut rng);
    let mut centroids = vec![data.points[first].clone()];
    let mut d2: Vec<f64> = data
        .points
        .iter()
        .map(|p| sq_dist(p, &centroids[0], &mut stats))
        .collect();
    while centroids.len() < k {
        let mass: Vec<f64> = d2.iter().zip(&data.weights).map(|(d, w)| d * w).collect();
        let next = draw(&mass, &mut rng);
        centroids.push(data.points[next].clone());
        let c = centroids.last().expect("just pushed");
        for (i, p) in data.points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, c, &mut stats));
        }
    }

    let mut assignments: Vec<usize> = data
        .points
        .iter()
        .map(|p| nearest(p, &centroids, &mut stats).0)
        .collect();
    let dims = data.points[0].len();
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; dims]; k];
        let mut mass = vec![0.0; k];
        for i in 0..n {
            let a = assignments[i];
            mass[a] += data.weights[i];
            for (s, x) in sums[a].iter_mut().zip(&data.points[i]) {
                *s += data.weights[i] * x;
            }
        }
        for j in 0..k {
            // An emptied cluster keeps its previous centroid.
            if mass[j] > 0.0 {
                centroids[j] = sums[j].iter().map(|s| s / mass[j]).collect();
            }
        }
        let next: Vec<usize> = data
            .points
            .iter()
            .map(|p| nearest(p, &centroids, &mut stats).0)
            .collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }
    let inertia = data
        .points
        .iter()
        .zip(&assignments)
        .zip(&data.weights)
        .map(|((p, &a), w)| w * sq_dist(p, &centroids[a], &mut stats))
        .sum();
    WeightedFit {
        assignments,
        centroids,
        inertia,
        iterations,
        stats,
    }
}

/// K-means on integer level vectors treated as reals. If `k` exceeds the
/// number of distinct points it is lowered and `k_reduced` is set.
pub fn kmeans_fit(data: &[DiscreteState], k: usize, seed: u64) -> Result<Clustering> {
    kmeans_fit_with(data, k, seed, MAX_ITER)
}

pub fn kmeans_fit_with(data: &[DiscreteState], k: usize, seed: u64, max_iter: usize) -> Result<Clustering> {
    if data.is_empty() {
        return Err(Error::EmptyData("k-means needs at least one point".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let dims = data[0].len();
    if data.iter().any(|s| s.len() != dims) {
        return Err(Error::InvalidArgument("points have different dimensions".into()));
    }
    let weighted = WeightedPoints::from_states(data);
    let k_eff = k.min(weighted.len());
    let fit = fit_weighted(&weighted, k_eff, seed, max_iter.max(1));
    let index: BTreeMap<&DiscreteState, usize> =
        weighted.keys.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let assignments = data.iter().map(|s| fit.assignments[index[s]]).collect();
    Ok(Clustering {
        assignments,
        centroids: fit.centroids,
        inertia: fit.inertia,
        iterations: fit.iterations,
        k_reduced: k_eff < k,
        stats: fit.stats,
    })
}

/// Index (0-based, so `k = index + 1`) of the elbow of an inertia curve:
/// the point farthest from the chord joining the first and last points.
/// Only interior points compete; near-ties go to the lowest `k`.
pub fn elbow_index(inertias: &[f64]) -> usize {
    match inertias.len() {
        0 | 1 => return 0,
        2 => return 1,
        _ => {}
    }
    let last = inertias.len() - 1;
    let (x1, y1) = (0.0, inertias[0]);
    let (x2, y2) = (last as f64, inertias[last]);
    let norm = ((x2 - x1).powi(2) + (y2 - y1).powi(2)).sqrt();
    let scale = inertias.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut best = (1, f64::NEG_INFINITY);
    for (i, &y) in inertias.iter().enumerate().take(last).skip(1) {
        let x = i as f64;
        let d = ((x2 - x1) * (y1 - y) - (x1 - x) * (y2 - y1)).abs() / norm;
        if d > best.1 + 1e-12 * scale {
            best = (i, d);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElbowResult {
    pub k: usize,
    /// Inertia for `k = 1..=inertias.len()`.
    pub inertias: Vec<f64>,
}

/// Chooses `k` in `1..=min(k_max, distinct points)` by the elbow rule.
pub fn choose_k_elbow(data: &[DiscreteState], k_max: usize, seed: u64) -> Result<ElbowResult> {
    if k_max < 2 {
        return Err(Error::InvalidArgument(format!("k_max must be at least 2, got {k_max}")));
    }
    if data.is_empty() {
        return Err(Error::EmptyData("elbow needs at least one point".into()));
    }
    let weighted = WeightedPoints::from_states(data);
    Ok(elbow_weighted(&weighted, k_max, seed).0)
}

/// Elbow selection on prepared points; also returns the fit for the chosen k.
pub(crate) fn elbow_weighted(data: &WeightedPoints, k_max: usize, seed: u64) -> (ElbowResult, WeightedFit) {
    let k_hi = k_max.min(data.len()).max(1);
    let fits: Vec<WeightedFit> = (1..=k_hi)
        .into_par_iter()
        .map(|k| fit_weighted(data, k, seed, MAX_ITER))
        .collect();
    let inertias: Vec<f64> = fits.iter().map(|f| f.inertia).collect();
    let k = elbow_index(&inertias) + 1;
    let fit = fits.into_iter().nth(k - 1).expect("k within fitted range");
    (ElbowResult { k, inertias }, fit)
}
