//! Box-Cox power transform with a maximum-likelihood exponent.

use crate::error::{Error, Result};

/// `(x^λ - 1) / λ`, continuous at λ = 0 where it equals `ln x`.
pub fn boxcox(x: f64, exponent: f64) -> f64 {
    if exponent.abs() < 1e-12 {
        x.ln()
    } else {
        (exponent * x.ln()).exp_m1() / exponent
    }
}

/// Gaussian profile log-likelihood of the transformed sample, constants dropped.
pub fn profile_loglik(values: &[f64], exponent: f64) -> f64 {
    let n = values.len() as f64;
    let log_sum: f64 = values.iter().map(|x| x.ln()).sum();
    let transformed: Vec<f64> = values.iter().map(|&x| boxcox(x, exponent)).collect();
    let mean = transformed.iter().sum::<f64>() / n;
    let var = transformed.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    (exponent - 1.0) * log_sum - 0.5 * n * var.ln()
}

const SEARCH_LO: f64 = -5.0;
const SEARCH_HI: f64 = 5.0;

/// Exponent maximizing [`profile_loglik`].
///
/// A coarse scan brackets the maximum, then golden-section search refines it.
pub fn fit_boxcox(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Transform {
            column: String::new(),
            message: "Box-Cox needs at least two values".into(),
        });
    }
    if let Some(bad) = values.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Transform {
            column: String::new(),
            message: format!("Box-Cox requires strictly positive values, found {bad}"),
        });
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Err(Error::Transform {
            column: String::new(),
            message: "degenerate input: zero variance".into(),
        });
    }
    let f = |lam: f64| profile_loglik(values, lam);

    let steps = 40;
    let h = (SEARCH_HI - SEARCH_LO) / steps as f64;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..=steps {
        let v = f(SEARCH_LO + i as f64 * h);
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    let mut a = SEARCH_LO + (best.max(1) - 1) as f64 * h;
    let mut b = SEARCH_LO + (best + 1).min(steps) as f64 * h;

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-10 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    Ok(0.5 * (a + b))
}
