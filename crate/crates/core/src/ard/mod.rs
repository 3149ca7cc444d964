//! Automatic relevance determination for MNL utilities, trained by doubly
//! stochastic variational inference.
//!
//! The posterior over coefficients is a factorized Gaussian with mean `μ` and
//! scale `c`. Each candidate group shares a prior variance `λ`, which is
//! optimized out in closed form, so the trainer only follows `(μ, c)`.

mod checkpoint;
mod select;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mnl::loglik_and_grad;
use crate::space::{CandidateCatalog, DesignTensor};

pub use checkpoint::Checkpoint;
pub use select::{lambda_table, read_lambda_csv, select_variables, write_lambda_csv, LambdaRow, Selection, SelectionMode};

/// Lower bound enforced on every posterior scale.
pub const C_FLOOR: f64 = 1e-8;

/// Column-to-group tying.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupLayout {
    /// Group of each column.
    pub column_group: Vec<usize>,
    /// Number of columns `K_d` in each group.
    pub sizes: Vec<usize>,
    /// Alternative of each group.
    pub alternative: Vec<usize>,
    pub n_alternatives: usize,
}

impl GroupLayout {
    pub fn from_catalog(catalog: &CandidateCatalog) -> Self {
        GroupLayout {
            column_group: catalog.group_index(),
            sizes: catalog.groups.iter().map(|g| g.size()).collect(),
            alternative: catalog.groups.iter().map(|g| g.alternative).collect(),
            n_alternatives: catalog.n_alternatives(),
        }
    }

    /// Every column its own group, each in alternative 0.
    pub fn singletons(columns: usize) -> Self {
        GroupLayout {
            column_group: (0..columns).collect(),
            sizes: vec![1; columns],
            alternative: vec![0; columns],
            n_alternatives: 1,
        }
    }

    pub fn n_columns(&self) -> usize {
        self.column_group.len()
    }

    pub fn n_groups(&self) -> usize {
        self.sizes.len()
    }

    /// `Σ_{k∈G} (c_k² + μ_k²)` for every group.
    pub fn group_sums(&self, mu: &[f64], c: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_groups()];
        for ((&g, m), s) in self.column_group.iter().zip(mu).zip(c) {
            sums[g] += s * s + m * m;
        }
        sums
    }
}

/// Step-size rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// Per-coordinate steps `ρ_k = rate_t / sqrt(v_k)`, where `v_k` is a
    /// moving average of the squared likelihood gradient with factor `beta2`
    /// and `rate_t = rate / (1 + t/decay)^power`; `ρ_k = rate_t` while
    /// `v_k = 0`.
    Adaptive {
        rate: f64,
        beta2: f64,
        decay: f64,
        power: f64,
    },
    /// Plain Robbins–Monro steps `ρ_t = ρ0 / (1 + t/T0)`.
    Decay { rho0: f64, t0: f64 },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Adaptive {
            rate: 0.05,
            beta2: 0.999,
            decay: 1000.0,
            power: 1.0,
        }
    }
}

impl Schedule {
    /// Step size of every coordinate at step `t` (0-based), updating the
    /// second-moment accumulator with the likelihood gradient `g`.
    fn rates(&self, t: u64, g: &[f64], v: &mut [f64], out: &mut [f64]) {
        let step = (t + 1) as f64;
        match *self {
            Schedule::Adaptive {
                rate,
                beta2,
                decay,
                power,
            } => {
                let base = rate / (1.0 + step / decay).powf(power);
                let correction = 1.0 - beta2.powf(step);
                for k in 0..g.len() {
                    v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                    let rms = (v[k] / correction).sqrt();
                    // A column without likelihood signal is moved by the prior alone.
                    out[k] = if rms > 0.0 { base / rms } else { base };
                }
            }
            Schedule::Decay { rho0, t0 } => out.fill(rho0 / (1.0 + step / t0)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub max_iterations: u64,
    /// Iterations that always run before convergence is checked.
    pub min_iterations: u64,
    pub schedule: Schedule,
    /// Monte Carlo draws of `z` per step.
    pub mc_samples: usize,
    /// Smoothing factor of the ELBO moving average.
    pub smoothing: f64,
    pub window: u64,
    pub tolerance: f64,
    pub selection: Selection,
    pub seed: u64,
    /// Treat the prior terms implicitly (stable for any step size); when
    /// false, apply the plain explicit gradient step to both parts.
    pub proximal: bool,
    pub init_mu: f64,
    pub init_c: f64,
    /// Report the running average of the iterates from this step on.
    pub average_from: Option<u64>,
    /// Record λ every this many iterations (0 disables).
    pub snapshot_every: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 500,
            max_iterations: 50_000,
            min_iterations: 0,
            schedule: Schedule::default(),
            mc_samples: 1,
            smoothing: 0.01,
            window: 500,
            tolerance: 1e-5,
            selection: Selection::default(),
            seed: 0,
            proximal: true,
            init_mu: 0.0,
            init_c: 0.1,
            average_from: None,
            snapshot_every: 0,
        }
    }
}

impl TrainingConfig {
    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: TrainingConfig = serde_json::from_str(&text)?;
        config.validate(None)?;
        Ok(config)
    }

    pub fn validate(&self, n_rows: Option<usize>) -> Result<()> {
        if self.batch_size == 0 || n_rows.is_some_and(|n| self.batch_size > n) {
            return Err(Error::Config(format!(
                "batch size {} outside [1, {}]",
                self.batch_size,
                n_rows.map_or("N".to_string(), |n| n.to_string())
            )));
        }
        if self.mc_samples == 0 {
            return Err(Error::Config("mc_samples must be positive".into()));
        }
        if !(self.selection.threshold >= 0.0) {
            return Err(Error::Config("selection threshold must be non-negative".into()));
        }
        if !(self.init_c > 0.0) {
            return Err(Error::Config("initial scale must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.smoothing) || self.window == 0 {
            return Err(Error::Config("smoothing must lie in [0, 1] and window be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

/// Second-moment accumulator of the adaptive schedule.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub v: Vec<f64>,
}

/// Running mean of `(μ, c)` over the averaging tail.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterateAverage {
    pub mu: Vec<f64>,
    pub c: Vec<f64>,
    pub count: u64,
}

impl IterateAverage {
    fn push(&mut self, mu: &[f64], c: &[f64]) {
        if self.count == 0 {
            self.mu = mu.to_vec();
            self.c = c.to_vec();
        } else {
            let w = 1.0 / (self.count + 1) as f64;
            for (a, x) in self.mu.iter_mut().zip(mu) {
                *a += w * (x - *a);
            }
            for (a, x) in self.c.iter_mut().zip(c) {
                *a += w * (x - *a);
            }
        }
        self.count += 1;
    }
}

/// Mean-field Gaussian posterior and the trainer's bookkeeping.
#[derive(Clone, Debug)]
pub struct VariationalState {
    pub mu: Vec<f64>,
    pub c: Vec<f64>,
    /// Completed steps.
    pub t: u64,
    pub optimizer: OptimizerState,
    pub rng: ChaCha8Rng,
    /// Exponentially smoothed ELBO.
    pub smoothed: Option<f64>,
    /// Smoothed ELBO at the start of the current convergence window.
    pub window_anchor: Option<f64>,
    pub average: IterateAverage,
}

impl PartialEq for VariationalState {
    fn eq(&self, other: &Self) -> bool {
        self.mu == other.mu
            && self.c == other.c
            && self.t == other.t
            && self.optimizer == other.optimizer
            && self.rng.get_seed() == other.rng.get_seed()
            && self.rng.get_word_pos() == other.rng.get_word_pos()
            && self.smoothed == other.smoothed
            && self.window_anchor == other.window_anchor
            && self.average == other.average
    }
}

impl VariationalState {
    pub fn new(columns: usize, config: &TrainingConfig) -> Self {
        VariationalState {
            mu: vec![config.init_mu; columns],
            c: vec![config.init_c.max(C_FLOOR); columns],
            t: 0,
            optimizer: OptimizerState { v: vec![0.0; columns] },
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            smoothed: None,
            window_anchor: None,
            average: IterateAverage::default(),
        }
    }

    /// Averaged iterate when averaging has begun, otherwise the current one.
    pub fn estimate(&self) -> (&[f64], &[f64]) {
        if self.average.count > 0 {
            (&self.average.mu, &self.average.c)
        } else {
            (&self.mu, &self.c)
        }
    }
}

/// One λ per candidate group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub values: Vec<f64>,
}

/// `λ_G = (1/K_d) Σ_{k∈G} (c_k² + μ_k²)`.
pub fn lambda_optimal(mu: &[f64], c: &[f64], layout: &GroupLayout) -> LambdaEstimate {
    let sums = layout.group_sums(mu, c);
    LambdaEstimate {
        values: sums.iter().zip(&layout.sizes).map(|(s, &k)| s / k as f64).collect(),
    }
}

/// Penalty part of the optimized bound: `Σ log c − ½ Σ_G K_d log S_G`.
pub fn penalty(mu: &[f64], c: &[f64], layout: &GroupLayout) -> f64 {
    let sums = layout.group_sums(mu, c);
    let logs: f64 = c.iter().map(|v| v.ln()).sum();
    let groups: f64 = sums.iter().zip(&layout.sizes).map(|(s, &k)| k as f64 * s.ln()).sum();
    logs - 0.5 * groups
}

/// Exact derivatives of [`penalty`] with respect to `μ` and `c`.
pub fn penalty_grad(mu: &[f64], c: &[f64], layout: &GroupLayout) -> (Vec<f64>, Vec<f64>) {
    let sums = layout.group_sums(mu, c);
    let mut gm = Vec::with_capacity(mu.len());
    let mut gc = Vec::with_capacity(mu.len());
    for (k, &g) in layout.column_group.iter().enumerate() {
        let w = layout.sizes[g] as f64 / sums[g];
        gm.push(-w * mu[k]);
        gc.push(1.0 / c[k] - w * c[k]);
    }
    (gm, gc)
}

/// Stochastic ELBO at one draw `z`:
/// `N/|B| · log p(y_B | c∘z + μ) + Σ log c − ½ Σ_G K_d log S_G`.
pub fn elbo_estimate(
    mu: &[f64],
    c: &[f64],
    design: &DesignTensor,
    choices: &[usize],
    n_total: usize,
    batch: &[usize],
    z: &[f64],
    layout: &GroupLayout,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    if mu.len() != layout.n_columns() || c.len() != mu.len() || z.len() != mu.len() {
        return Err(Error::Argument("state, draw and layout disagree in size".into()));
    }
    let beta: Vec<f64> = c.iter().zip(z).zip(mu).map(|((s, z), m)| s * z + m).collect();
    let (ll, _) = loglik_and_grad(&beta, design, choices, batch)?;
    Ok(n_total as f64 / batch.len() as f64 * ll + penalty(mu, c, layout))
}

fn draw_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// One doubly stochastic update; returns the ELBO sample at the pre-update state.
///
/// `rows` is the training population from which the mini-batch is drawn.
pub fn step(
    state: &mut VariationalState,
    design: &DesignTensor,
    choices: &[usize],
    rows: &[usize],
    layout: &GroupLayout,
    config: &TrainingConfig,
) -> Result<f64> {
    let d = layout.n_columns();
    if state.mu.len() != d || design.total_columns() != d {
        return Err(Error::Argument("state, design and layout disagree in size".into()));
    }
    let n = rows.len();
    let b = config.batch_size.min(n);
    if b == 0 {
        return Err(Error::Argument("no training rows".into()));
    }
    let scale = n as f64 / b as f64;
    let samples = config.mc_samples.max(1);

    let mut g_mu = vec![0.0; d];
    let mut g_c = vec![0.0; d];
    let mut ll_sum = 0.0;
    for _ in 0..samples {
        let z = draw_normals(&mut state.rng, d);
        let mut batch: Vec<usize> = if b == n {
            rows.to_vec()
        } else {
            index::sample(&mut state.rng, n, b).into_iter().map(|i| rows[i]).collect()
        };
        batch.sort_unstable();
        let beta: Vec<f64> = state.c.iter().zip(&z).zip(&state.mu).map(|((s, z), m)| s * z + m).collect();
        let (ll, g) = loglik_and_grad(&beta, design, choices, &batch)?;
        if let Some(col) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Training {
                iteration: state.t,
                column: col,
            });
        }
        ll_sum += ll;
        for k in 0..d {
            g_mu[k] += scale * g[k];
            g_c[k] += scale * g[k] * z[k];
        }
    }
    let inv = 1.0 / samples as f64;
    g_mu.iter_mut().for_each(|g| *g *= inv);
    g_c.iter_mut().for_each(|g| *g *= inv);
    let elbo = scale * ll_sum * inv + penalty(&state.mu, &state.c, layout);

    let mut rho = vec![0.0; d];
    config.schedule.rates(state.t, &g_mu, &mut state.optimizer.v, &mut rho);
    let sums = layout.group_sums(&state.mu, &state.c);
    for k in 0..d {
        let g = layout.column_group[k];
        // 1/λ of the column's group at the current state.
        let prec = layout.sizes[g] as f64 / sums[g];
        let (mu, c, r) = (state.mu[k], state.c[k], rho[k]);
        let (mu_new, c_new) = if config.proximal {
            // Implicit step on the prior terms: solve
            // μ' = μ + ρ(g − μ'/λ) and c' = c + ρ(g z + 1/c' − c'/λ).
            let a = 1.0 + r * prec;
            let b = c + r * g_c[k];
            ((mu + r * g_mu[k]) / a, (b + (b * b + 4.0 * a * r).sqrt()) / (2.0 * a))
        } else {
            (
                mu + r * (g_mu[k] - prec * mu),
                c + r * (g_c[k] + 1.0 / c - prec * c),
            )
        };
        if !mu_new.is_finite() || !c_new.is_finite() {
            return Err(Error::Training {
                iteration: state.t,
                column: k,
            });
        }
        state.mu[k] = mu_new;
        state.c[k] = c_new.max(C_FLOOR);
    }
    state.t += 1;
    Ok(elbo)
}

/// Per-iteration ELBO record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ElboTrace {
    /// Iteration index of the first entry.
    pub start: u64,
    pub elbo: Vec<f64>,
    pub smoothed: Vec<f64>,
    /// `(iteration, λ)` snapshots.
    pub snapshots: Vec<(u64, Vec<f64>)>,
}

impl ElboTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,elbo,smoothed\n");
        for (k, (e, s)) in self.elbo.iter().zip(&self.smoothed).enumerate() {
            out.push_str(&format!("{},{e},{s}\n", self.start + k as u64 + 1));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct ArdFit {
    pub state: VariationalState,
    pub lambda: LambdaEstimate,
    pub trace: ElboTrace,
    pub converged: bool,
}

/// Run [`step`] until the smoothed ELBO stalls or the iteration budget is spent.
/// Passing `resume` continues from a saved state.
pub fn fit(
    design: &DesignTensor,
    choices: &[usize],
    rows: &[usize],
    layout: &GroupLayout,
    config: &TrainingConfig,
    resume: Option<VariationalState>,
) -> Result<ArdFit> {
    config.validate(Some(rows.len()))?;
    if choices.len() != design.n_rows() {
        return Err(Error::Argument("choices and design disagree in length".into()));
    }
    let mut state = resume.unwrap_or_else(|| VariationalState::new(layout.n_columns(), config));
    let mut trace = ElboTrace {
        start: state.t,
        ..Default::default()
    };
    let mut converged = false;
    while state.t < config.max_iterations {
        let elbo = step(&mut state, design, choices, rows, layout, config)?;
        if config.average_from.is_some_and(|t0| state.t > t0) {
            state.average.push(&state.mu, &state.c);
        }
        let smoothed = match state.smoothed {
            Some(s) => config.smoothing * elbo + (1.0 - config.smoothing) * s,
            None => elbo,
        };
        state.smoothed = Some(smoothed);
        trace.elbo.push(elbo);
        trace.smoothed.push(smoothed);
        if config.snapshot_every > 0 && state.t % config.snapshot_every == 0 {
            trace.snapshots.push((state.t, lambda_optimal(&state.mu, &state.c, layout).values));
        }
        if state.t % config.window == 0 {
            if let Some(anchor) = state.window_anchor {
                let rel = (smoothed - anchor).abs() / anchor.abs().max(f64::MIN_POSITIVE);
                if state.t >= config.min_iterations && rel < config.tolerance {
                    state.window_anchor = Some(smoothed);
                    converged = true;
                    break;
                }
            }
            state.window_anchor = Some(smoothed);
        }
    }
    if !converged {
        log::info!("ARD training stopped at the iteration cap ({}) without meeting the tolerance", config.max_iterations);
    }
    let (mu, c) = state.estimate();
    Ok(ArdFit {
        lambda: lambda_optimal(mu, c, layout),
        state,
        trace,
        converged,
    })
}
