use crate::error::{Error, Result};
use crate::par;
use crate::tensor::Shape;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization of a spiking layer's synaptic input.
///
/// Statistics pool over batch, time and spatial positions together.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

/// What the backward pass needs from one normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct BnCache {
    pub train: bool,
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    /// Unbiased batch variance, fed to the running estimate.
    pub batch_var: Vec<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes `x`, laid out as rows of `shape`. Train mode uses the batch
    /// statistics; eval mode uses the running estimates.
    pub fn forward(&self, x: &[f64], shape: Shape, train: bool) -> Result<(Vec<f64>, BnCache)> {
        let (width, sp) = (shape.numel(), shape.spatial());
        if shape.channels != self.channels() {
            return Err(Error::Shape(format!(
                "batch norm has {} channels, input has {}",
                self.channels(),
                shape.channels
            )));
        }
        let rows = x.len().checked_div(width).unwrap_or(0);
        let n = rows * sp;
        if n == 0 {
            return Err(Error::EmptyInput("batch norm received no values".into()));
        }
        if train && n < 2 {
            return Err(Error::Shape(
                "batch norm in train mode needs more than one value per channel".into(),
            ));
        }
        let channel_values =
            |c: usize| (0..rows).flat_map(move |r| x[r * width + c * sp..r * width + (c + 1) * sp].iter().copied());
        let (mean, var_biased, var_unbiased): (Vec<f64>, Vec<f64>, Vec<f64>) = if train {
            let stats = par::map_indices(shape.channels, |c| {
                let mean = channel_values(c).sum::<f64>() / n as f64;
                let ss: f64 = channel_values(c).map(|v| (v - mean) * (v - mean)).sum();
                (mean, ss / n as f64, ss / (n - 1) as f64)
            });
            (
                stats.iter().map(|s| s.0).collect(),
                stats.iter().map(|s| s.1).collect(),
                stats.iter().map(|s| s.2).collect(),
            )
        } else {
            (
                self.running_mean.clone(),
                self.running_var.clone(),
                self.running_var.clone(),
            )
        };
        let inv_std: Vec<f64> = var_biased.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut xhat = x.to_vec();
        let mut y = vec![0.0; x.len()];
        par::for_each_row_pair(&mut xhat, width, &mut y, width, |_, xh, yr| {
            for (i, (h, o)) in xh.iter_mut().zip(yr.iter_mut()).enumerate() {
                let c = i / sp;
                *h = (*h - mean[c]) * inv_std[c];
                *o = self.gamma[c] * *h + self.beta[c];
            }
        });
        Ok((
            y,
            BnCache {
                train,
                xhat,
                inv_std,
                batch_mean: mean,
                batch_var: var_unbiased,
            },
        ))
    }

    pub fn update_running(&mut self, cache: &BnCache) {
        if !cache.train {
            return;
        }
        for c in 0..self.channels() {
            self.running_mean[c] = (1.0 - BN_MOMENTUM) * self.running_mean[c] + BN_MOMENTUM * cache.batch_mean[c];
            self.running_var[c] = (1.0 - BN_MOMENTUM) * self.running_var[c] + BN_MOMENTUM * cache.batch_var[c];
        }
    }

    /// Returns the input gradient; accumulates into `dgamma` and `dbeta`.
    pub fn backward(
        &self,
        cache: &BnCache,
        grad_out: &[f64],
        shape: Shape,
        dgamma: &mut [f64],
        dbeta: &mut [f64],
    ) -> Vec<f64> {
        let (width, sp) = (shape.numel(), shape.spatial());
        let rows = grad_out.len() / width;
        let n = (rows * sp) as f64;
        let sums = par::map_indices(shape.channels, |c| {
            let mut sg = 0.0;
            let mut sgx = 0.0;
            for r in 0..rows {
                let off = r * width + c * sp;
                for (g, xh) in grad_out[off..off + sp].iter().zip(&cache.xhat[off..off + sp]) {
                    sg += g;
                    sgx += g * xh;
                }
            }
            (sg, sgx)
        });
        for (c, &(sg, sgx)) in sums.iter().enumerate() {
            dbeta[c] += sg;
            dgamma[c] += sgx;
        }
        let mut grad_in = grad_out.to_vec();
        par::for_each_row(&mut grad_in, width, |r, gi| {
            for (i, g) in gi.iter_mut().enumerate() {
                let c = i / sp;
                let scale = self.gamma[c] * cache.inv_std[c];
                if cache.train {
                    let (sg, sgx) = sums[c];
                    let xh = cache.xhat[r * width + i];
                    *g = scale * (*g - sg / n - xh * sgx / n);
                } else {
                    *g *= scale;
                }
            }
        });
        grad_in
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_input_passes_through() {
        let bn = BatchNorm::new(1);
        let x = [-1.5, -0.5, 0.5, 1.5];
        let mean = 0.0;
        let var: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        let z: Vec<f64> = x.iter().map(|v| v / var.sqrt()).collect();
        let (y, _) = bn.forward(&z, Shape::flat(1), true).unwrap();
        for (a, b) in y.iter().zip(&z) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn zero_gamma_collapses_to_beta() {
        let mut bn = BatchNorm::new(2);
        bn.gamma = vec![0.0, 0.0];
        bn.beta = vec![0.3, -0.7];
        let (y, _) = bn
            .forward(&[1.0, 5.0, -2.0, 4.0, 8.0, 0.0], Shape::flat(2), true)
            .unwrap();
        assert_eq!(y, vec![0.3, -0.7, 0.3, -0.7, 0.3, -0.7]);
    }

    #[test]
    fn plus_minus_one_batch() {
        let bn = BatchNorm::new(1);
        let (y, c) = bn.forward(&[-1.0, 1.0], Shape::flat(1), true).unwrap();
        assert!((y[0] + 1.0).abs() < 1e-5 && (y[1] - 1.0).abs() < 1e-5);
        assert_eq!(c.batch_mean, vec![0.0]);
        assert_eq!(c.batch_var, vec![2.0]);
    }

    #[test]
    fn running_stats_use_momentum() {
        let mut bn = BatchNorm::new(1);
        let (_, c) = bn.forward(&[1.0, 3.0], Shape::flat(1), true).unwrap();
        bn.update_running(&c);
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-15);
        assert!((bn.running_var[0] - (0.9 + 0.1 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn empty_and_singleton_inputs_fail() {
        let bn = BatchNorm::new(1);
        assert!(matches!(
            bn.forward(&[], Shape::flat(1), true),
            Err(Error::EmptyInput(_))
        ));
        assert!(bn.forward(&[1.0], Shape::flat(1), true).is_err());
        assert!(bn.forward(&[1.0], Shape::flat(1), false).is_ok());
    }

    #[test]
    fn train_backward_matches_finite_differences() {
        let mut bn = BatchNorm::new(2);
        bn.gamma = vec![1.3, 0.7];
        bn.beta = vec![0.1, -0.2];
        let shape = Shape::new(2, 1, 2);
        let x: Vec<f64> = (0..12)
            .map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.37 + i as f64 * 0.05)
            .collect();
        let w: Vec<f64> = (0..12).map(|i| (i as f64 * 0.9).sin()).collect();
        let loss = |x: &[f64]| -> f64 {
            let (y, _) = bn.forward(x, shape, true).unwrap();
            y.iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = bn.forward(&x, shape, true).unwrap();
        let mut dg = vec![0.0; 2];
        let mut db = vec![0.0; 2];
        let gi = bn.backward(&cache, &w, shape, &mut dg, &mut db);
        let h = 1e-6;
        for k in 0..x.len() {
            let mut xp = x.clone();
            xp[k] += h;
            let mut xm = x.clone();
            xm[k] -= h;
            let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
            assert!((fd - gi[k]).abs() < 1e-6, "k={k} fd={fd} an={}", gi[k]);
        }
    }
}
