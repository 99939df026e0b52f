use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

pub fn check_rate(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("dropout rate must lie in [0, 1), got {p}")))
    }
}

/// Inverted-dropout mask for one sample: each unit survives with probability
/// `1 - p` and survivors carry `1 / (1 - p)`. In eval mode the mask is all
/// ones. The caller reuses one mask across every timestep of the window.
pub fn dropout_mask(width: usize, p: f64, seed: u64, train: bool) -> Result<Vec<f64>> {
    check_rate(p)?;
    if !train || p == 0.0 {
        return Ok(vec![1.0; width]);
    }
    let keep = 1.0 / (1.0 - p);
    let mut rng = stream_rng(seed, Stream::Dropout, &[]);
    Ok((0..width)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect())
}
