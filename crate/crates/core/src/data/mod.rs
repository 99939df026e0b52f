//! Dataset ingestion, input encoders, event slicing and noise corruption.

mod encode;
mod events;
mod idx;
mod noise;
mod synthetic;

pub use encode::{bernoulli_encode, check_pixels, direct_encode};
pub use events::{
    format_events, load_events, parse_events, slice_equal_count, slice_fixed_duration, Event, EventStream, FrameTensor,
};
pub use idx::{encode_images, encode_labels, load_idx, parse_images, parse_labels, write_idx};
pub use noise::{inject_salt_pepper, inject_uniform_noise, NoiseKind, NoiseSpec};
pub use synthetic::{synthetic_events, synthetic_images};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{Activations, Shape};

/// Images with pixels in `[0, 1]`, stored `[N][C][H][W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub shape: Shape,
    pub pixels: Vec<f64>,
    pub labels: Vec<usize>,
}

impl ImageSet {
    pub fn new(shape: Shape, pixels: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if pixels.len() != labels.len() * shape.numel() {
            return Err(Error::Length(format!(
                "{} pixels for {} images of {shape}",
                pixels.len(),
                labels.len()
            )));
        }
        check_pixels(&pixels)?;
        Ok(Self { shape, pixels, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.shape.numel();
        &self.pixels[i * n..(i + 1) * n]
    }

    /// The first `n` images (all of them if there are fewer).
    pub fn truncate(mut self, n: usize) -> Self {
        let n = n.min(self.len());
        self.labels.truncate(n);
        self.pixels.truncate(n * self.shape.numel());
        self
    }

    /// Averages non-overlapping `factor x factor` blocks.
    pub fn downsample(&self, factor: usize) -> Result<Self> {
        let Shape {
            channels,
            height,
            width,
        } = self.shape;
        if factor == 0 || height % factor != 0 || width % factor != 0 {
            return Err(Error::Config(format!("cannot downsample {} by {factor}", self.shape)));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let out = Shape::new(channels, height / factor, width / factor);
        let area = (factor * factor) as f64;
        let mut pixels = vec![0.0; self.len() * out.numel()];
        par::for_each_row(&mut pixels, out.numel(), |i, dst| {
            let src = self.image(i);
            for c in 0..channels {
                for y in 0..out.height {
                    for x in 0..out.width {
                        let mut s = 0.0;
                        for dy in 0..factor {
                            let row = (c * height + y * factor + dy) * width + x * factor;
                            s += src[row..row + factor].iter().sum::<f64>();
                        }
                        dst[(c * out.height + y) * out.width + x] = s / area;
                    }
                }
            }
        });
        Ok(Self {
            shape: out,
            pixels,
            labels: self.labels.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Pixels become Bernoulli spike trains.
    Bernoulli,
    /// Pixels are fed as analog currents at every step.
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
enum Inputs {
    Images { pixels: Vec<f64>, encoding: Encoding },
    Frames { time_steps: usize, data: Vec<f64> },
}

/// A labelled set of samples that can be turned into `[T][batch]` input blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub shape: Shape,
    pub labels: Vec<usize>,
    inputs: Inputs,
}

impl Dataset {
    pub fn from_images(set: ImageSet, encoding: Encoding) -> Self {
        Self {
            shape: set.shape,
            labels: set.labels,
            inputs: Inputs::Images {
                pixels: set.pixels,
                encoding,
            },
        }
    }

    pub fn from_frames(frames: Vec<FrameTensor>, labels: Vec<usize>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::EmptyInput("no frame tensors".into()))?;
        if frames.len() != labels.len() {
            return Err(Error::Consistency(format!(
                "{} frame tensors but {} labels",
                frames.len(),
                labels.len()
            )));
        }
        let (time_steps, shape) = (first.slices, first.shape);
        if frames.iter().any(|f| f.slices != time_steps || f.shape != shape) {
            return Err(Error::Consistency("frame tensors differ in slice count or size".into()));
        }
        let data = frames.into_iter().flat_map(|f| f.data).collect();
        Ok(Self {
            shape,
            labels,
            inputs: Inputs::Frames { time_steps, data },
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_event_data(&self) -> bool {
        matches!(self.inputs, Inputs::Frames { .. })
    }

    /// Raw per-sample tensor: the image, or the `[T][2][H][W]` frame stack.
    pub fn raw(&self, i: usize) -> &[f64] {
        let (data, n) = match &self.inputs {
            Inputs::Images { pixels, .. } => (pixels, self.shape.numel()),
            Inputs::Frames { time_steps, data } => (data, time_steps * self.shape.numel()),
        };
        &data[i * n..(i + 1) * n]
    }

    /// `[T][features]` input for sample `i`.
    pub fn encode_sample(&self, i: usize, time_steps: usize, seed: u64) -> Result<Vec<f64>> {
        match &self.inputs {
            Inputs::Images { encoding, .. } => match encoding {
                Encoding::Bernoulli => bernoulli_encode(self.raw(i), time_steps, seed),
                Encoding::Direct => Ok(direct_encode(self.raw(i), time_steps)),
            },
            Inputs::Frames { time_steps: ts, .. } => {
                if *ts != time_steps {
                    return Err(Error::Config(format!(
                        "event samples have {ts} slices but the time window is {time_steps}"
                    )));
                }
                Ok(self.raw(i).to_vec())
            }
        }
    }

    /// Stacks samples into a time-major block; `seed_of(i)` keys the encoder
    /// for dataset index `i`.
    pub fn batch(
        &self,
        indices: &[usize],
        time_steps: usize,
        seed_of: impl Fn(usize) -> u64 + Sync,
    ) -> Result<Activations> {
        let encoded = par::try_map(indices, |&i| self.encode_sample(i, time_steps, seed_of(i)))?;
        let n = self.shape.numel();
        let b = indices.len();
        let mut data = vec![0.0; time_steps * b * n];
        par::for_each_row(&mut data, n, |r, row| {
            let (t, k) = (r / b, r % b);
            row.copy_from_slice(&encoded[k][t * n..(t + 1) * n]);
        });
        Activations::from_vec(time_steps, b, self.shape, data)
    }

    /// Corrupts every sample independently.
    pub fn with_noise(&self, spec: &NoiseSpec) -> Result<Self> {
        spec.validate()?;
        let corrupt = |data: &[f64], per: usize| -> Vec<f64> {
            let rows = par::map_indices(data.len() / per.max(1), |i| {
                spec.apply(&data[i * per..(i + 1) * per], i as u64)
            });
            rows.concat()
        };
        let inputs = match &self.inputs {
            Inputs::Images { pixels, encoding } => Inputs::Images {
                pixels: corrupt(pixels, self.shape.numel()),
                encoding: *encoding,
            },
            Inputs::Frames { time_steps, data } => Inputs::Frames {
                time_steps: *time_steps,
                data: corrupt(data, time_steps * self.shape.numel()),
            },
        };
        Ok(Self {
            shape: self.shape,
            labels: self.labels.clone(),
            inputs,
        })
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let inputs = match &self.inputs {
            Inputs::Images { encoding, .. } => Inputs::Images {
                pixels: indices.iter().flat_map(|&i| self.raw(i).iter().copied()).collect(),
                encoding: *encoding,
            },
            Inputs::Frames { time_steps, .. } => Inputs::Frames {
                time_steps: *time_steps,
                data: indices.iter().flat_map(|&i| self.raw(i).iter().copied()).collect(),
            },
        };
        Self {
            shape: self.shape,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            inputs,
        }
    }

    /// The underlying images, if this is an image dataset.
    pub fn images(&self) -> Option<ImageSet> {
        match &self.inputs {
            Inputs::Images { pixels, .. } => Some(ImageSet {
                shape: self.shape,
                pixels: pixels.clone(),
                labels: self.labels.clone(),
            }),
            Inputs::Frames { .. } => None,
        }
    }
}
