//! Event streams in a plain-text format and their conversion to frames.
//!
//! ```text
//! H,W
//! t_us,x,y,pol
//! ...
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Shape;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub t_us: u64,
    pub x: usize,
    pub y: usize,
    pub pol: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    pub height: usize,
    pub width: usize,
    pub events: Vec<Event>,
}

/// Per-slice event counts, one channel per polarity: `[T][2][H][W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTensor {
    pub slices: usize,
    pub shape: Shape,
    pub data: Vec<f64>,
}

impl FrameTensor {
    fn zeros(slices: usize, height: usize, width: usize) -> Self {
        let shape = Shape::new(2, height, width);
        Self {
            slices,
            shape,
            data: vec![0.0; slices * shape.numel()],
        }
    }

    fn add(&mut self, slice: usize, e: &Event) {
        let s = self.shape;
        self.data[slice * s.numel() + (e.pol as usize * s.height + e.y) * s.width + e.x] += 1.0;
    }

    pub fn frame(&self, slice: usize) -> &[f64] {
        let n = self.shape.numel();
        &self.data[slice * n..(slice + 1) * n]
    }

    pub fn slice_sum(&self, slice: usize) -> f64 {
        self.frame(slice).iter().sum()
    }
}

fn field<T: std::str::FromStr>(s: Option<&str>, line: usize, name: &str) -> Result<T> {
    let s = s.ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing {name}"),
    })?;
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {name} `{}`", s.trim()),
    })
}

pub fn parse_events(text: &str) -> Result<EventStream> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hl, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing `H,W` header".into(),
    })?;
    let mut hw = header.split(',');
    let height: usize = field(hw.next(), hl, "height")?;
    let width: usize = field(hw.next(), hl, "width")?;
    if hw.next().is_some() || height == 0 || width == 0 {
        return Err(Error::Parse {
            line: hl,
            msg: format!("header must be `H,W` with positive sizes, got `{header}`"),
        });
    }
    let mut events = Vec::new();
    let mut last = 0;
    for (line, text) in lines {
        if text.trim().is_empty() {
            continue;
        }
        let mut f = text.split(',');
        let t_us: u64 = field(f.next(), line, "timestamp")?;
        let x: usize = field(f.next(), line, "x")?;
        let y: usize = field(f.next(), line, "y")?;
        let pol: u8 = field(f.next(), line, "polarity")?;
        let bad = |msg: String| Error::Parse { line, msg };
        if f.next().is_some() {
            return Err(bad("expected 4 fields".into()));
        }
        if x >= width || y >= height {
            return Err(bad(format!("pixel ({x},{y}) outside {height}x{width} sensor")));
        }
        if pol > 1 {
            return Err(bad(format!("polarity {pol} is not 0 or 1")));
        }
        if t_us < last {
            return Err(Error::Order { line, t_us });
        }
        last = t_us;
        events.push(Event { t_us, x, y, pol });
    }
    Ok(EventStream { height, width, events })
}

pub fn load_events(path: impl AsRef<Path>) -> Result<EventStream> {
    let p = path.as_ref();
    parse_events(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)
}

pub fn format_events(ev: &EventStream) -> String {
    let mut s = format!("{},{}\n", ev.height, ev.width);
    for e in &ev.events {
        s.push_str(&format!("{},{},{},{}\n", e.t_us, e.x, e.y, e.pol));
    }
    s
}

/// Splits the stream into `n` slices of nearly equal event count: slice `j`
/// takes events `floor(j*M/n) .. floor((j+1)*M/n)`.
pub fn slice_equal_count(ev: &EventStream, n: usize) -> Result<FrameTensor> {
    if n == 0 {
        return Err(Error::Config("slice count must be at least 1".into()));
    }
    if ev.events.is_empty() {
        return Err(Error::EmptyInput("event stream has no events".into()));
    }
    let m = ev.events.len();
    let mut frames = FrameTensor::zeros(n, ev.height, ev.width);
    for j in 0..n {
        for e in &ev.events[j * m / n..(j + 1) * m / n] {
            frames.add(j, e);
        }
    }
    Ok(frames)
}

fn to_us(ms: f64, what: &str) -> Result<u64> {
    let us = ms * 1000.0;
    if us.is_nan() || us <= 0.0 || (us - us.round()).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "{what} {ms} ms is not a positive whole number of microseconds"
        )));
    }
    Ok(us.round() as u64)
}

/// Bins the first `total_ms` after the first event into slices of `slice_ms`,
/// half-open on the right. Later events are dropped.
pub fn slice_fixed_duration(ev: &EventStream, slice_ms: f64, total_ms: f64) -> Result<FrameTensor> {
    let slice = to_us(slice_ms, "slice length")?;
    let total = to_us(total_ms, "window")?;
    if total % slice != 0 {
        return Err(Error::Config(format!(
            "window {total_ms} ms is not a multiple of the {slice_ms} ms slice"
        )));
    }
    let first = ev
        .events
        .first()
        .ok_or_else(|| Error::EmptyInput("event stream has no events".into()))?
        .t_us;
    let n = (total / slice) as usize;
    let mut frames = FrameTensor::zeros(n, ev.height, ev.width);
    for e in &ev.events {
        let rel = e.t_us - first;
        if rel >= total {
            break;
        }
        frames.add((rel / slice) as usize, e);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(times: &[u64]) -> EventStream {
        EventStream {
            height: 2,
            width: 2,
            events: times
                .iter()
                .map(|&t_us| Event {
                    t_us,
                    x: 1,
                    y: 0,
                    pol: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn parse_examples() {
        let ev = parse_events("2,2\n0,0,1,1\n").unwrap();
        assert_eq!(
            ev.events,
            vec![Event {
                t_us: 0,
                x: 0,
                y: 1,
                pol: 1
            }]
        );
        assert!(parse_events("2,2\n").unwrap().events.is_empty());
        assert!(matches!(
            parse_events("2,2\n5,0,0,0\n4,0,0,0\n"),
            Err(Error::Order { line: 3, t_us: 4 })
        ));
        assert!(matches!(
            parse_events("2,2\n0,0,0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_events("2,2\n0,2,0,0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_events("2,x\n"), Err(Error::Parse { line: 1, .. })));
        let ev = parse_events("3,4\n1,3,2,0\n1,0,0,1\n9,1,1,1\n").unwrap();
        assert_eq!(parse_events(&format_events(&ev)).unwrap(), ev);
    }

    #[test]
    fn equal_count_examples() {
        let f = slice_equal_count(&stream(&[0; 10]), 3).unwrap();
        assert_eq!((0..3).map(|j| f.slice_sum(j)).collect::<Vec<_>>(), vec![3.0, 3.0, 4.0]);
        let f = slice_equal_count(&stream(&[0; 4]), 4).unwrap();
        assert!((0..4).all(|j| f.slice_sum(j) == 1.0));
        let f = slice_equal_count(&stream(&[0; 7]), 1).unwrap();
        assert_eq!(f.frame(0)[1], 7.0);
        assert!(matches!(slice_equal_count(&stream(&[]), 2), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn fixed_duration_examples() {
        let f = slice_fixed_duration(&stream(&[0]), 5.0, 100.0).unwrap();
        assert_eq!(f.slices, 20);
        assert_eq!(f.slice_sum(0), 1.0);
        let f = slice_fixed_duration(&stream(&[1000, 5999, 6000, 101_000]), 5.0, 100.0).unwrap();
        // relative to the first event: 0, 4999, 5000 (next slice), 100000 (dropped)
        assert_eq!(f.slice_sum(0), 2.0);
        assert_eq!(f.slice_sum(1), 1.0);
        assert_eq!(f.data.iter().sum::<f64>(), 3.0);
        assert!(matches!(
            slice_fixed_duration(&stream(&[0]), 3.0, 100.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            slice_fixed_duration(&stream(&[0]), 0.0, 100.0),
            Err(Error::Config(_))
        ));
    }
}
