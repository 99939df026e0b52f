use crate::error::{Error, Result};
use crate::par;

/// Fully connected synapses, `weights` row-major `[out][in]`, no bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_features: usize,
    pub out_features: usize,
    pub weights: Vec<f64>,
}

impl Dense {
    pub fn new(in_features: usize, out_features: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != in_features * out_features {
            return Err(Error::Shape(format!(
                "dense weights hold {} values, expected {out_features}x{in_features}",
                weights.len()
            )));
        }
        Ok(Self {
            in_features,
            out_features,
            weights,
        })
    }

    /// `x_i = sum_j w_ij * o_j` for a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_features {
            return Err(Error::Shape(format!(
                "dense layer expects {} inputs, got {}",
                self.in_features,
                input.len()
            )));
        }
        let mut out = vec![0.0; self.out_features];
        self.forward_row(input, &mut out);
        Ok(out)
    }

    fn forward_row(&self, input: &[f64], out: &mut [f64]) {
        // spike inputs are mostly zero
        let active: Vec<(usize, f64)> = input.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect();
        for (i, x) in out.iter_mut().enumerate() {
            let w = &self.weights[i * self.in_features..(i + 1) * self.in_features];
            *x = active.iter().map(|&(j, v)| w[j] * v).sum();
        }
    }

    pub(crate) fn forward_rows(&self, input: &[f64], out: &mut [f64]) {
        let nin = self.in_features;
        par::for_each_row(out, self.out_features, |r, row| {
            self.forward_row(&input[r * nin..(r + 1) * nin], row)
        });
    }

    /// Accumulates `dw += g^T * input` over all rows and, if requested, writes
    /// `grad_in = g * W`.
    pub(crate) fn backward_rows(&self, input: &[f64], grad_out: &[f64], dw: &mut [f64], grad_in: Option<&mut [f64]>) {
        let (nin, nout) = (self.in_features, self.out_features);
        let rows = grad_out.len() / nout;
        par::for_each_row(dw, nin, |i, dw_row| {
            for r in 0..rows {
                let g = grad_out[r * nout + i];
                if g == 0.0 {
                    continue;
                }
                let inp = &input[r * nin..(r + 1) * nin];
                for (d, &x) in dw_row.iter_mut().zip(inp) {
                    *d += g * x;
                }
            }
        });
        if let Some(grad_in) = grad_in {
            par::for_each_row(grad_in, nin, |r, gi| {
                gi.fill(0.0);
                let g_row = &grad_out[r * nout..(r + 1) * nout];
                for (i, &g) in g_row.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    let w = &self.weights[i * nin..(i + 1) * nin];
                    for (d, &wij) in gi.iter_mut().zip(w) {
                        *d += g * wij;
                    }
                }
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_examples() {
        let eye = Dense::new(3, 3, vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        assert_eq!(eye.forward(&[0., 0., 0.]).unwrap(), vec![0., 0., 0.]);
        assert_eq!(eye.forward(&[1., 0., 1.]).unwrap(), vec![1., 0., 1.]);
        let d = Dense::new(2, 1, vec![0.5, -0.2]).unwrap();
        assert!((d.forward(&[1., 1.]).unwrap()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        assert!(Dense::new(2, 2, vec![0.0; 3]).is_err());
        let d = Dense::new(2, 1, vec![0.5, -0.2]).unwrap();
        assert!(matches!(d.forward(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn backward_matches_outer_product() {
        let d = Dense::new(2, 2, vec![1., 2., 3., 4.]).unwrap();
        let input = [1.0, 0.5, 0.0, 2.0];
        let g = [1.0, -1.0, 0.5, 0.0];
        let mut dw = vec![0.0; 4];
        let mut gi = vec![9.0; 4];
        d.backward_rows(&input, &g, &mut dw, Some(&mut gi));
        assert_eq!(dw, vec![1.0, 1.5, -1.0, -0.5]);
        assert_eq!(gi, vec![-2.0, -2.0, 0.5, 1.0]);
    }
}
