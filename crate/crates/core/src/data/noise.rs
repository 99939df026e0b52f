use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    SaltPepper,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Fraction of entries to corrupt.
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, level: f64, seed: u64) -> Result<Self> {
        let s = Self { kind, level, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.level) {
            Ok(())
        } else {
            Err(Error::Range(format!("noise level {} is outside [0, 1]", self.level)))
        }
    }

    /// Corrupts one tensor; `index` keys the random draws (e.g. sample number).
    pub fn apply(&self, data: &[f64], index: u64) -> Vec<f64> {
        let mut rng = stream_rng(self.seed, Stream::Noise, &[index]);
        let k = (self.level * data.len() as f64).floor() as usize;
        let mut out = data.to_vec();
        for i in sample(&mut rng, data.len(), k.min(data.len())).into_iter() {
            out[i] = match self.kind {
                NoiseKind::SaltPepper => {
                    if rng.random_bool(0.5) {
                        1.0
                    } else {
                        0.0
                    }
                }
                NoiseKind::Uniform => rng.random::<f64>(),
            };
        }
        out
    }
}

/// Sets a random `floor(level * n)` subset of entries to 0 or 1 with equal odds.
pub fn inject_salt_pepper(data: &[f64], level: f64, seed: u64) -> Result<Vec<f64>> {
    Ok(NoiseSpec::new(NoiseKind::SaltPepper, level, seed)?.apply(data, 0))
}

/// Replaces a random `floor(level * n)` subset of entries with `U[0, 1)` draws.
pub fn inject_uniform_noise(data: &[f64], level: f64, seed: u64) -> Result<Vec<f64>> {
    Ok(NoiseSpec::new(NoiseKind::Uniform, level, seed)?.apply(data, 0))
}
