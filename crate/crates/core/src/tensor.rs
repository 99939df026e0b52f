use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-sample feature shape. Flat feature vectors are `(n, 1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub const fn flat(n: usize) -> Self {
        Self::new(n, 1, 1)
    }

    pub const fn numel(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn spatial(&self) -> usize {
        self.height * self.width
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }
}

impl From<[usize; 3]> for Shape {
    fn from(a: [usize; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// A `[T][batch][features]` buffer, time-major. Row `(t, b)` holds one
/// sample's features at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub time_steps: usize,
    pub batch: usize,
    pub shape: Shape,
    pub data: Vec<f64>,
}

impl Activations {
    pub fn zeros(time_steps: usize, batch: usize, shape: Shape) -> Self {
        Self {
            time_steps,
            batch,
            shape,
            data: vec![0.0; time_steps * batch * shape.numel()],
        }
    }

    pub fn from_vec(time_steps: usize, batch: usize, shape: Shape, data: Vec<f64>) -> Result<Self> {
        let want = time_steps * batch * shape.numel();
        if data.len() != want {
            return Err(Error::Shape(format!(
                "buffer of {} values cannot hold {time_steps}x{batch}x{shape}",
                data.len()
            )));
        }
        Ok(Self {
            time_steps,
            batch,
            shape,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.shape.numel()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.time_steps * self.batch
    }

    #[inline]
    pub fn row(&self, t: usize, b: usize) -> &[f64] {
        let w = self.width();
        let start = (t * self.batch + b) * w;
        &self.data[start..start + w]
    }

    #[inline]
    pub fn row_mut(&mut self, t: usize, b: usize) -> &mut [f64] {
        let w = self.width();
        let start = (t * self.batch + b) * w;
        &mut self.data[start..start + w]
    }

    #[inline]
    pub fn get(&self, t: usize, b: usize, i: usize) -> f64 {
        self.data[(t * self.batch + b) * self.width() + i]
    }

    /// Total activity of one sample summed over time.
    pub fn sample_sum(&self, b: usize) -> f64 {
        (0..self.time_steps).map(|t| self.row(t, b).iter().sum::<f64>()).sum()
    }

    /// The `[T][features]` slice of one sample, as a fresh single-sample buffer.
    pub fn sample(&self, b: usize) -> Activations {
        let mut out = Activations::zeros(self.time_steps, 1, self.shape);
        for t in 0..self.time_steps {
            out.row_mut(t, 0).copy_from_slice(self.row(t, b));
        }
        out
    }

    /// Stacks single-timestep-major samples (`[T][features]` each) into a batch.
    pub fn stack(samples: &[Activations]) -> Result<Activations> {
        let first = samples
            .first()
            .ok_or_else(|| Error::EmptyInput("no samples to stack".into()))?;
        let (t_steps, shape) = (first.time_steps, first.shape);
        let mut out = Activations::zeros(t_steps, samples.len(), shape);
        for (b, s) in samples.iter().enumerate() {
            if s.time_steps != t_steps || s.shape != shape || s.batch != 1 {
                return Err(Error::Shape(format!(
                    "sample {b} is {}x{}x{}, expected {t_steps}x1x{shape}",
                    s.time_steps, s.batch, s.shape
                )));
            }
            for t in 0..t_steps {
                out.row_mut(t, b).copy_from_slice(s.row(t, 0));
            }
        }
        Ok(out)
    }
}
