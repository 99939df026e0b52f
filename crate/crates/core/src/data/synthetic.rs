//! Seeded toy datasets for tests and desk-scale event experiments.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::tensor::Shape;

use super::{Event, EventStream, ImageSet};

/// Noisy copies of one random binary prototype per class. Labels cycle
/// through the classes.
pub fn synthetic_images(n: usize, classes: usize, shape: Shape, seed: u64) -> Result<ImageSet> {
    if classes == 0 || shape.numel() == 0 {
        return Err(Error::Config(
            "synthetic images need at least one class and pixel".into(),
        ));
    }
    let protos: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            let mut rng = stream_rng(seed, Stream::Synthetic, &[0, c as u64]);
            (0..shape.numel())
                .map(|_| if rng.random_bool(0.3) { 0.9 } else { 0.05 })
                .collect()
        })
        .collect();
    let mut pixels = Vec::with_capacity(n * shape.numel());
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        let mut rng = stream_rng(seed, Stream::Synthetic, &[1, i as u64]);
        pixels.extend(
            protos[c]
                .iter()
                .map(|&p| (p + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0)),
        );
        labels.push(c);
    }
    ImageSet::new(shape, pixels, labels)
}

/// Streams of a bar sweeping across the sensor; the bar's orientation
/// encodes the class. Leading-edge events are ON, trailing-edge OFF.
pub fn synthetic_events(
    n: usize,
    classes: usize,
    height: usize,
    width: usize,
    duration_us: u64,
    seed: u64,
) -> Result<(Vec<EventStream>, Vec<usize>)> {
    if classes == 0 || height == 0 || width == 0 || duration_us == 0 {
        return Err(Error::Config(
            "synthetic events need positive sizes and duration".into(),
        ));
    }
    let count = 40 * (height + width);
    let (cy, cx) = (height as f64 / 2.0, width as f64 / 2.0);
    let span = (height.max(width)) as f64;
    let mut streams = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        let mut rng = stream_rng(seed, Stream::Synthetic, &[2, i as u64]);
        let angle = std::f64::consts::PI * c as f64 / classes as f64 + rng.random_range(-0.05..0.05);
        let (dx, dy) = (angle.cos(), angle.sin());
        let mut times: Vec<u64> = (0..count).map(|_| rng.random_range(0..duration_us)).collect();
        times.sort_unstable();
        let mut events = Vec::with_capacity(count);
        for t_us in times {
            let progress = t_us as f64 / duration_us as f64 - 0.5;
            let along = rng.random_range(-0.5..0.5) * span;
            let edge: f64 = rng.random_range(-1.0..1.0);
            let offset = progress * span + edge;
            let x = cx + along * dx - offset * dy;
            let y = cy + along * dy + offset * dx;
            if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
                continue;
            }
            events.push(Event {
                t_us,
                x: x as usize,
                y: y as usize,
                pol: u8::from(edge > 0.0),
            });
        }
        streams.push(EventStream { height, width, events });
        labels.push(c);
    }
    Ok((streams, labels))
}
