#![allow(dead_code)]

use std::path::PathBuf;

use ard_choice::data::{load_dataset, DatasetSchema};
use ard_choice::space::DesignTensor;
use ard_choice::ChoiceDataset;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn swissmetro() -> ChoiceDataset {
    let schema = DatasetSchema::from_json_file(root().join("configs/swissmetro/schema.json")).unwrap();
    load_dataset(root().join("data/swissmetro.csv"), &schema).unwrap().0
}

/// Random design with standard-normal entries, random availability (at
/// least one alternative per row) and choices drawn among the available ones.
pub fn random_problem(seed: u64, n: usize, widths: &[usize], sparse_availability: bool) -> (DesignTensor, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = widths.len();
    let blocks: Vec<Vec<f64>> = widths
        .iter()
        .map(|&w| (0..n * w).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut availability = vec![true; n * j];
    let mut choices = Vec::with_capacity(n);
    for r in 0..n {
        if sparse_availability {
            for i in 0..j {
                availability[r * j + i] = rng.random_bool(0.7);
            }
            let keep = rng.random_range(0..j);
            availability[r * j + keep] = true;
        }
        let offered: Vec<usize> = (0..j).filter(|&i| availability[r * j + i]).collect();
        choices.push(offered[rng.random_range(0..offered.len())]);
    }
    (DesignTensor::from_blocks(n, widths, blocks, availability).unwrap(), choices)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

/// Gauss–Hermite nodes and weights for the weight `exp(−x²)`.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut out = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    let mut z: f64 = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * out[0].0,
            3 => 1.91 * z - 0.91 * out[1].0,
            _ => 2.0 * z - out[i - 2].0,
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / (pp * pp);
        out[i] = (z, w);
        out[n - 1 - i] = (-z, w);
    }
    out
}

/// One group's bound in `u = log λ`, up to terms free of λ.
pub fn group_bound(u: f64, mu: &[f64], c: &[f64]) -> f64 {
    let lambda = u.exp();
    mu.iter()
        .zip(c)
        .map(|(m, s)| -0.5 * ((2.0 * std::f64::consts::PI * lambda).ln() + (s * s + m * m) / lambda))
        .sum()
}

/// Maximize the bound by bisection on the sign of its central-difference slope.
pub fn numeric_lambda(mu: &[f64], c: &[f64]) -> f64 {
    let (mut lo, mut hi) = (-60.0, 60.0);
    let h = 1e-6;
    let slope = |u: f64| group_bound(u + h, mu, c) - group_bound(u - h, mu, c);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Newton–Raphson logistic regression of `y` on the columns of `x`.
pub fn newton_logistic(x: &DMatrix<f64>, y: &[f64]) -> DVector<f64> {
    let (n, d) = x.shape();
    let mut beta = DVector::zeros(d);
    for _ in 0..100 {
        let mut grad = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        for r in 0..n {
            let row = x.row(r).transpose();
            let p = 1.0 / (1.0 + (-row.dot(&beta)).exp());
            grad += &row * (y[r] - p);
            hess += &row * row.transpose() * (p * (1.0 - p));
        }
        let delta = hess.lu().solve(&grad).unwrap();
        beta += &delta;
        if delta.amax() < 1e-14 {
            break;
        }
    }
    beta
}
