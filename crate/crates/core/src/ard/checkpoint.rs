use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{lambda_optimal, GroupLayout, IterateAverage, OptimizerState, VariationalState};
use crate::error::{Error, Result};

/// JSON snapshot of a training run that can be resumed exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub mu: Vec<f64>,
    pub c: Vec<f64>,
    pub t: u64,
    pub lambda: Vec<f64>,
    pub optimizer: OptimizerState,
    /// Hex-encoded generator seed.
    pub rng_seed: String,
    pub rng_stream: u64,
    /// Word position of the generator, as a decimal string.
    pub rng_word_pos: String,
    pub smoothed: Option<f64>,
    pub window_anchor: Option<f64>,
    #[serde(default)]
    pub average: IterateAverage,
    pub config_hash: String,
    #[serde(default)]
    pub catalog_hash: Option<String>,
}

impl Checkpoint {
    pub fn from_state(state: &VariationalState, layout: &GroupLayout, config_hash: String, catalog_hash: Option<String>) -> Self {
        Checkpoint {
            mu: state.mu.clone(),
            c: state.c.clone(),
            t: state.t,
            lambda: {
                let (mu, c) = state.estimate();
                lambda_optimal(mu, c, layout).values
            },
            optimizer: state.optimizer.clone(),
            rng_seed: hex::encode(state.rng.get_seed()),
            rng_stream: state.rng.get_stream(),
            rng_word_pos: state.rng.get_word_pos().to_string(),
            smoothed: state.smoothed,
            window_anchor: state.window_anchor,
            average: state.average.clone(),
            config_hash,
            catalog_hash,
        }
    }

    pub fn to_state(&self) -> Result<VariationalState> {
        let bad = |m: &str| Error::Validation(format!("checkpoint: {m}"));
        let seed: [u8; 32] = hex::decode(&self.rng_seed)
            .map_err(|_| bad("rng seed is not hex"))?
            .try_into()
            .map_err(|_| bad("rng seed must be 32 bytes"))?;
        let word_pos: u128 = self.rng_word_pos.parse().map_err(|_| bad("rng position is not an integer"))?;
        let d = self.mu.len();
        let o = &self.optimizer;
        let a = &self.average;
        if self.c.len() != d || o.v.len() != d || (a.count > 0 && (a.mu.len() != d || a.c.len() != d)) {
            return Err(bad("vector lengths disagree"));
        }
        if self.c.iter().any(|&c| !(c > 0.0)) || self.mu.iter().any(|m| !m.is_finite()) {
            return Err(bad("invalid posterior parameters"));
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.rng_stream);
        rng.set_word_pos(word_pos);
        Ok(VariationalState {
            mu: self.mu.clone(),
            c: self.c.clone(),
            t: self.t,
            optimizer: self.optimizer.clone(),
            rng,
            smoothed: self.smoothed,
            window_anchor: self.window_anchor,
            average: self.average.clone(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
