//! One-dimensional k-means used to discretize a continuous attribute.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RESTARTS: usize = 10;
const MAX_LLOYD_ITERS: usize = 300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    /// Cluster centers in ascending order.
    pub centers: Vec<f64>,
    /// Per-value cluster label; label `l` refers to `centers[l]`.
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares.
    pub inertia: f64,
}

/// Index of the nearest center; ties go to the lower index.
pub fn nearest(centers: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &c) in centers.iter().enumerate() {
        let d = (x - c).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

pub fn inertia(values: &[f64], centers: &[f64], labels: &[usize]) -> f64 {
    values
        .iter()
        .zip(labels)
        .map(|(&x, &l)| (x - centers[l]).powi(2))
        .sum()
}

fn plus_plus_init(values: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut centers = Vec::with_capacity(k);
    centers.push(values[rng.random_range(0..values.len())]);
    let mut dist: Vec<f64> = values.iter().map(|&x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = values.len() - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            // Guard against landing on an already-chosen value through rounding.
            if dist[pick] == 0.0 {
                pick = dist.iter().position(|&d| d > 0.0).unwrap_or(pick);
            }
            values[pick]
        } else {
            values[rng.random_range(0..values.len())]
        };
        centers.push(next);
        for (d, &x) in dist.iter_mut().zip(values) {
            *d = d.min((x - next).powi(2));
        }
    }
    centers
}

/// Lloyd iterations from the given centers. Empty clusters keep their center.
pub fn lloyd(values: &[f64], mut centers: Vec<f64>) -> Segmentation {
    let k = centers.len();
    let mut labels: Vec<usize> = values.iter().map(|&x| nearest(&centers, x)).collect();
    for _ in 0..MAX_LLOYD_ITERS {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&x, &l) in values.iter().zip(&labels) {
            sums[l] += x;
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c] / counts[c] as f64;
            }
        }
        let mut changed = false;
        for (l, &x) in labels.iter_mut().zip(values) {
            let n = nearest(&centers, x);
            if n != *l {
                *l = n;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = inertia(values, &centers, &labels);
    Segmentation {
        centers,
        labels,
        inertia,
    }
}

/// Cluster `values` into `k` segments with k-means++ seeding and Lloyd
/// refinement, keeping the best of several seeded restarts. Labels are
/// renumbered by ascending center.
pub fn kmeans_segment(values: &[f64], k: usize, seed: u64) -> Result<Segmentation> {
    if k < 2 {
        return Err(Error::Argument(format!("k-means needs k >= 2, got {k}")));
    }
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if k > distinct.len() {
        return Err(Error::Argument(format!(
            "k = {k} exceeds the {} distinct values",
            distinct.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Segmentation> = None;
    for _ in 0..RESTARTS {
        let init = plus_plus_init(values, k, &mut rng);
        let seg = lloyd(values, init);
        if best.as_ref().is_none_or(|b| seg.inertia < b.inertia) {
            best = Some(seg);
        }
    }
    let best = best.unwrap();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| best.centers[a].total_cmp(&best.centers[b]));
    let mut rank = vec![0; k];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    Ok(Segmentation {
        centers: order.iter().map(|&c| best.centers[c]).collect(),
        labels: best.labels.iter().map(|&l| rank[l]).collect(),
        inertia: best.inertia,
    })
}
