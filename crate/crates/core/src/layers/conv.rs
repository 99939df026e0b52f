use crate::error::{Error, Result};
use crate::par;
use crate::tensor::Shape;

/// 2-D cross-correlation with shared kernels `[out_ch][in_ch][k][k]`, no bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_shape: Shape,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub weights: Vec<f64>,
}

pub fn conv_output_size(size: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    if kernel == 0 || stride == 0 {
        return Err(Error::Shape("kernel and stride must be positive".into()));
    }
    let padded = size + 2 * padding;
    if padded < kernel {
        return Err(Error::Shape(format!(
            "kernel {kernel} does not fit input of size {size} with padding {padding}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

impl Conv2d {
    pub fn new(
        in_shape: Shape,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        conv_output_size(in_shape.height, kernel, stride, padding)?;
        conv_output_size(in_shape.width, kernel, stride, padding)?;
        let want = out_channels * in_shape.channels * kernel * kernel;
        if weights.len() != want {
            return Err(Error::Shape(format!(
                "conv kernels hold {} values, expected {want}",
                weights.len()
            )));
        }
        Ok(Self {
            in_shape,
            out_channels,
            kernel,
            stride,
            padding,
            weights,
        })
    }

    pub fn out_shape(&self) -> Shape {
        let h = conv_output_size(self.in_shape.height, self.kernel, self.stride, self.padding).unwrap();
        let w = conv_output_size(self.in_shape.width, self.kernel, self.stride, self.padding).unwrap();
        Shape::new(self.out_channels, h, w)
    }

    pub fn fan_in(&self) -> usize {
        self.in_shape.channels * self.kernel * self.kernel
    }

    /// Input pixel feeding output `(oy, ox)` through kernel tap `(ky, kx)`.
    #[inline]
    fn tap(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<usize> {
        let iy = (oy * self.stride + ky).checked_sub(self.padding)?;
        let ix = (ox * self.stride + kx).checked_sub(self.padding)?;
        (iy < self.in_shape.height && ix < self.in_shape.width).then_some(iy * self.in_shape.width + ix)
    }

    /// Convolves one `[in_ch][H][W]` frame.
    pub fn forward(&self, frame: &[f64]) -> Result<Vec<f64>> {
        if frame.len() != self.in_shape.numel() {
            return Err(Error::Shape(format!(
                "conv expects a {} frame ({} values), got {}",
                self.in_shape,
                self.in_shape.numel(),
                frame.len()
            )));
        }
        let mut out = vec![0.0; self.out_shape().numel()];
        self.forward_frame(frame, &mut out);
        Ok(out)
    }

    fn forward_frame(&self, frame: &[f64], out: &mut [f64]) {
        let os = self.out_shape();
        let (k, ic_n) = (self.kernel, self.in_shape.channels);
        let in_sp = self.in_shape.spatial();
        for oc in 0..self.out_channels {
            for oy in 0..os.height {
                for ox in 0..os.width {
                    let mut acc = 0.0;
                    for ic in 0..ic_n {
                        let wbase = (oc * ic_n + ic) * k * k;
                        let plane = &frame[ic * in_sp..(ic + 1) * in_sp];
                        for ky in 0..k {
                            for kx in 0..k {
                                if let Some(p) = self.tap(oy, ox, ky, kx) {
                                    acc += self.weights[wbase + ky * k + kx] * plane[p];
                                }
                            }
                        }
                    }
                    out[(oc * os.height + oy) * os.width + ox] = acc;
                }
            }
        }
    }

    pub(crate) fn forward_rows(&self, input: &[f64], out: &mut [f64]) {
        let nin = self.in_shape.numel();
        par::for_each_row(out, self.out_shape().numel(), |r, row| {
            self.forward_frame(&input[r * nin..(r + 1) * nin], row)
        });
    }

    pub(crate) fn backward_rows(&self, input: &[f64], grad_out: &[f64], dw: &mut [f64], grad_in: Option<&mut [f64]>) {
        let os = self.out_shape();
        let (k, ic_n) = (self.kernel, self.in_shape.channels);
        let in_sp = self.in_shape.spatial();
        let (nin, nout) = (self.in_shape.numel(), os.numel());
        let rows = grad_out.len() / nout;
        // one output channel's kernels per task
        par::for_each_row(dw, ic_n * k * k, |oc, dw_oc| {
            for r in 0..rows {
                let g = &grad_out[r * nout + oc * os.spatial()..r * nout + (oc + 1) * os.spatial()];
                let frame = &input[r * nin..(r + 1) * nin];
                for oy in 0..os.height {
                    for ox in 0..os.width {
                        let go = g[oy * os.width + ox];
                        if go == 0.0 {
                            continue;
                        }
                        for ic in 0..ic_n {
                            let plane = &frame[ic * in_sp..(ic + 1) * in_sp];
                            for ky in 0..k {
                                for kx in 0..k {
                                    if let Some(p) = self.tap(oy, ox, ky, kx) {
                                        dw_oc[(ic * k + ky) * k + kx] += go * plane[p];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
        if let Some(grad_in) = grad_in {
            par::for_each_row(grad_in, nin, |r, gi| {
                gi.fill(0.0);
                let g_row = &grad_out[r * nout..(r + 1) * nout];
                for oc in 0..self.out_channels {
                    for oy in 0..os.height {
                        for ox in 0..os.width {
                            let go = g_row[(oc * os.height + oy) * os.width + ox];
                            if go == 0.0 {
                                continue;
                            }
                            for ic in 0..ic_n {
                                let wbase = (oc * ic_n + ic) * k * k;
                                for ky in 0..k {
                                    for kx in 0..k {
                                        if let Some(p) = self.tap(oy, ox, ky, kx) {
                                            gi[ic * in_sp + p] += go * self.weights[wbase + ky * k + kx];
                                        }
                                    }
                                }
                            }
                        }
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
    fn zero_input_gives_zero_output() {
        let c = Conv2d::new(Shape::new(2, 4, 4), 3, 3, 1, 1, vec![0.7; 54]).unwrap();
        assert!(c.forward(&[0.0; 32]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_kernel_is_identity() {
        let c = Conv2d::new(Shape::new(1, 3, 3), 1, 1, 1, 0, vec![1.0]).unwrap();
        let x: Vec<f64> = (0..9).map(|v| v as f64).collect();
        assert_eq!(c.forward(&x).unwrap(), x);
    }

    #[test]
    fn ones_kernel_sums_window() {
        let c = Conv2d::new(Shape::new(1, 2, 2), 1, 2, 1, 0, vec![1.0; 4]).unwrap();
        assert_eq!(c.out_shape(), Shape::new(1, 1, 1));
        assert_eq!(c.forward(&[1., 2., 3., 4.]).unwrap(), vec![10.0]);
    }

    #[test]
    fn output_size_formula() {
        assert_eq!(conv_output_size(28, 3, 1, 1).unwrap(), 28);
        assert_eq!(conv_output_size(7, 3, 2, 0).unwrap(), 3);
        assert_eq!(conv_output_size(8, 3, 2, 1).unwrap(), 4);
        assert!(conv_output_size(2, 5, 1, 1).is_err());
    }

    #[test]
    fn shape_errors() {
        assert!(Conv2d::new(Shape::new(1, 3, 3), 1, 2, 1, 0, vec![1.0; 3]).is_err());
        let c = Conv2d::new(Shape::new(1, 3, 3), 1, 1, 1, 0, vec![1.0]).unwrap();
        assert!(c.forward(&[0.0; 4]).is_err());
    }
}
