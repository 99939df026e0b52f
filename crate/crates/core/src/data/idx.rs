//! IDX image/label files: big-endian headers followed by raw unsigned bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Shape;

use super::ImageSet;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Length(format!("{what}: header truncated at byte {at}")))
}

fn check_magic(found: u32, expected: u32, what: &str) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::Format(format!(
            "{what}: magic {found:#010x}, expected {expected:#010x}"
        )))
    }
}

/// Parses an image file into `(count, height, width, pixels in [0, 1])`.
pub fn parse_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f64>)> {
    check_magic(be_u32(bytes, 0, "image file")?, IMAGE_MAGIC, "image file")?;
    let n = be_u32(bytes, 4, "image file")? as usize;
    let h = be_u32(bytes, 8, "image file")? as usize;
    let w = be_u32(bytes, 12, "image file")? as usize;
    let need = n * h * w;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::Length(format!(
            "image file: {n} images of {h}x{w} need {need} bytes, found {}",
            body.len()
        )));
    }
    let pixels = body[..need].iter().map(|&b| b as f64 / 255.0).collect();
    Ok((n, h, w, pixels))
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    check_magic(be_u32(bytes, 0, "label file")?, LABEL_MAGIC, "label file")?;
    let n = be_u32(bytes, 4, "label file")? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(Error::Length(format!(
            "label file: {n} labels, found {} bytes",
            body.len()
        )));
    }
    Ok(body[..n].iter().map(|&b| b as usize).collect())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<ImageSet> {
    let (n, h, w, pixels) = parse_images(&read(images.as_ref())?)?;
    let labels = parse_labels(&read(labels.as_ref())?)?;
    if labels.len() != n {
        return Err(Error::Consistency(format!("{n} images but {} labels", labels.len())));
    }
    ImageSet::new(Shape::new(1, h, w), pixels, labels)
}

/// Encodes single-channel images, rounding pixels to the nearest byte.
pub fn encode_images(set: &ImageSet) -> Result<Vec<u8>> {
    if set.shape.channels != 1 {
        return Err(Error::Shape(format!(
            "IDX images are single-channel, not {}",
            set.shape
        )));
    }
    let mut out = Vec::with_capacity(16 + set.pixels.len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    for d in [set.len(), set.shape.height, set.shape.width] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend(set.pixels.iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
    Ok(out)
}

pub fn encode_labels(labels: &[usize]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        out.push(u8::try_from(l).map_err(|_| Error::Range(format!("label {l} does not fit in a byte")))?);
    }
    Ok(out)
}

pub fn write_idx(set: &ImageSet, images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<()> {
    let (ip, lp) = (images.as_ref(), labels.as_ref());
    std::fs::write(ip, encode_images(set)?).map_err(|e| Error::io(ip, e))?;
    std::fs::write(lp, encode_labels(&set.labels)?).map_err(|e| Error::io(lp, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_bytes(n: u32, h: u32, w: u32, body: &[u8]) -> Vec<u8> {
        let mut v = vec![0, 0, 8, 3];
        for d in [n, h, w] {
            v.extend_from_slice(&d.to_be_bytes());
        }
        v.extend_from_slice(body);
        v
    }

    #[test]
    fn zeros_and_full_scale() {
        let (n, h, w, px) = parse_images(&image_bytes(1, 2, 2, &[0, 0, 0, 255])).unwrap();
        assert_eq!((n, h, w), (1, 2, 2));
        assert_eq!(px, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn wrong_magic_names_expected() {
        let mut b = image_bytes(1, 1, 1, &[0]);
        b[3] = 2;
        let e = parse_images(&b).unwrap_err();
        assert!(matches!(e, Error::Format(_)));
        assert!(e.to_string().contains("0x00000803"), "{e}");
    }

    #[test]
    fn truncation_is_a_length_error() {
        assert!(matches!(
            parse_images(&image_bytes(2, 2, 2, &[0; 7])),
            Err(Error::Length(_))
        ));
        assert!(matches!(parse_images(&[0, 0, 8]), Err(Error::Length(_))));
        assert!(matches!(
            parse_labels(&[0, 0, 8, 1, 0, 0, 0, 3, 1]),
            Err(Error::Length(_))
        ));
    }
}
