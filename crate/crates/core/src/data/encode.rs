use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

pub fn check_pixels(pixels: &[f64]) -> Result<()> {
    match pixels.iter().position(|p| !(0.0..=1.0).contains(p)) {
        None => Ok(()),
        Some(i) => Err(Error::Range(format!("pixel {i} = {} is outside [0, 1]", pixels[i]))),
    }
}

/// Rate-codes an image as `T` frames of independent Bernoulli spikes, each
/// firing with probability equal to its pixel value. Returns `[T][pixels]`.
pub fn bernoulli_encode(pixels: &[f64], time_steps: usize, seed: u64) -> Result<Vec<f64>> {
    check_pixels(pixels)?;
    let mut rng = stream_rng(seed, Stream::Encoder, &[]);
    let mut out = Vec::with_capacity(time_steps * pixels.len());
    for _ in 0..time_steps {
        // random::<f64>() lies in [0, 1): p = 0 never fires, p = 1 always does
        out.extend(pixels.iter().map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 }));
    }
    Ok(out)
}

/// Presents the analog image unchanged at every step.
pub fn direct_encode(pixels: &[f64], time_steps: usize) -> Vec<f64> {
    pixels.repeat(time_steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        let s = bernoulli_encode(&[0.0, 1.0], 50, 3).unwrap();
        for t in 0..50 {
            assert_eq!(&s[2 * t..2 * t + 2], &[0.0, 1.0]);
        }
    }

    #[test]
    fn half_rate() {
        let s = bernoulli_encode(&[0.5; 100], 100, 9).unwrap();
        let rate = s.iter().sum::<f64>() / s.len() as f64;
        assert!((rate - 0.5).abs() < 0.02, "{rate}");
        assert_eq!(s, bernoulli_encode(&[0.5; 100], 100, 9).unwrap());
    }

    #[test]
    fn range_errors() {
        assert!(matches!(bernoulli_encode(&[1.5], 1, 0), Err(Error::Range(_))));
        assert!(matches!(bernoulli_encode(&[f64::NAN], 1, 0), Err(Error::Range(_))));
    }
}
