use crate::error::{Error, Result};
use crate::par;
use crate::tensor::Shape;

#[derive(Debug, Clone, PartialEq)]
pub struct MaxPool2d {
    pub in_shape: Shape,
    pub window: usize,
    pub stride: usize,
}

fn pooled(size: usize, window: usize, stride: usize) -> Result<usize> {
    if window == 0 || stride == 0 {
        return Err(Error::Shape("pool window and stride must be positive".into()));
    }
    if size < window || !(size - window).is_multiple_of(stride) {
        return Err(Error::Shape(format!(
            "size {size} is not covered exactly by window {window} with stride {stride}"
        )));
    }
    Ok((size - window) / stride + 1)
}

impl MaxPool2d {
    pub fn new(in_shape: Shape, window: usize, stride: usize) -> Result<Self> {
        pooled(in_shape.height, window, stride)?;
        pooled(in_shape.width, window, stride)?;
        Ok(Self {
            in_shape,
            window,
            stride,
        })
    }

    pub fn out_shape(&self) -> Shape {
        Shape::new(
            self.in_shape.channels,
            (self.in_shape.height - self.window) / self.stride + 1,
            (self.in_shape.width - self.window) / self.stride + 1,
        )
    }

    /// Pools one frame. Also returns, per output, the flat frame index of the
    /// first maximal element in row-major order.
    pub fn forward(&self, frame: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
        if frame.len() != self.in_shape.numel() {
            return Err(Error::Shape(format!(
                "max pool expects {} values, got {}",
                self.in_shape.numel(),
                frame.len()
            )));
        }
        let n = self.out_shape().numel();
        let mut out = vec![0.0; n];
        let mut arg = vec![0.0; n];
        self.forward_frame(frame, &mut out, &mut arg);
        Ok((out, arg.into_iter().map(|a| a as usize).collect()))
    }

    fn forward_frame(&self, frame: &[f64], out: &mut [f64], arg: &mut [f64]) {
        let os = self.out_shape();
        let (h, w) = (self.in_shape.height, self.in_shape.width);
        for c in 0..os.channels {
            for oy in 0..os.height {
                for ox in 0..os.width {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for ky in 0..self.window {
                        for kx in 0..self.window {
                            let idx = (c * h + oy * self.stride + ky) * w + ox * self.stride + kx;
                            if frame[idx] > best {
                                best = frame[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let o = (c * os.height + oy) * os.width + ox;
                    out[o] = best;
                    arg[o] = best_idx as f64;
                }
            }
        }
    }

    /// Argmax indices are stored as floats so they can share the row helpers.
    pub(crate) fn forward_rows(&self, input: &[f64], out: &mut [f64], arg: &mut [f64]) {
        let (nin, nout) = (self.in_shape.numel(), self.out_shape().numel());
        par::for_each_row_pair(out, nout, arg, nout, |r, o, a| {
            self.forward_frame(&input[r * nin..(r + 1) * nin], o, a)
        });
    }

    pub(crate) fn backward_rows(&self, arg: &[f64], grad_out: &[f64], grad_in: &mut [f64]) {
        let (nin, nout) = (self.in_shape.numel(), self.out_shape().numel());
        par::for_each_row(grad_in, nin, |r, gi| {
            gi.fill(0.0);
            for o in 0..nout {
                gi[arg[r * nout + o] as usize] += grad_out[r * nout + o];
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool2() -> MaxPool2d {
        MaxPool2d::new(Shape::new(1, 2, 2), 2, 2).unwrap()
    }

    #[test]
    fn window_examples() {
        assert_eq!(pool2().forward(&[0., 0., 0., 0.]).unwrap(), (vec![0.0], vec![0]));
        assert_eq!(pool2().forward(&[0., 1., 0., 0.]).unwrap(), (vec![1.0], vec![1]));
        assert_eq!(pool2().forward(&[1., 1., 1., 1.]).unwrap(), (vec![1.0], vec![0]));
    }

    #[test]
    fn indivisible_dims_fail() {
        assert!(MaxPool2d::new(Shape::new(1, 5, 5), 2, 2).is_err());
        assert!(MaxPool2d::new(Shape::new(1, 5, 5), 3, 2).is_ok());
    }

    #[test]
    fn routing_conserves_gradient() {
        let p = MaxPool2d::new(Shape::new(2, 4, 4), 2, 2).unwrap();
        let input: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 / 10.0).collect();
        let mut out = vec![0.0; 16];
        let mut arg = vec![0.0; 16];
        p.forward_rows(&input, &mut out, &mut arg);
        let g: Vec<f64> = (0..16).map(|i| i as f64 - 3.5).collect();
        let mut gi = vec![0.0; 64];
        p.backward_rows(&arg, &g, &mut gi);
        let total: f64 = gi.iter().sum();
        assert!((total - g.iter().sum::<f64>()).abs() < 1e-12);
        for (k, &v) in gi.iter().enumerate() {
            let (r, i) = (k / 32, k % 32);
            if v != 0.0 {
                assert!(arg[r * 8..(r + 1) * 8].iter().any(|&a| a as usize == i));
            }
        }
    }
}
