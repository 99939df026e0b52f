//! Experiment configuration files, checkpoints, metrics CSV and tensor files.

mod checkpoint;
mod config;
mod metrics;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION,
};
pub use config::{
    emit_config, parse_config, parse_config_str, DatasetConfig, ExperimentConfig, SliceMethod, SyntheticSource,
    DEFAULT_NETWORK,
};
pub use metrics::{format_g6, metrics_csv, write_metrics, METRICS_HEADER};

use std::io::Write;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

/// Writes `bytes` to a sibling temp file, then renames it over `path`, so a
/// reader never sees a half-written file.
pub fn atomic_write(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// `<magic> <version>\n<header length>\n<JSON header>` then raw little-endian
/// f64 values.
fn frame<H: Serialize>(magic: &str, version: u32, header: &H, payload: &[f64]) -> Result<Vec<u8>> {
    let json = serde_json::to_string(header).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = format!("{magic} {version}\n{}\n{json}", json.len()).into_bytes();
    out.reserve(payload.len() * 8);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn unframe<H: DeserializeOwned>(magic: &str, version: u32, bytes: &[u8]) -> Result<(H, Vec<f64>)> {
    let line = |from: usize| -> Result<(&str, usize)> {
        let end = bytes[from..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Length("header truncated".into()))?;
        let s =
            std::str::from_utf8(&bytes[from..from + end]).map_err(|_| Error::Format("header is not text".into()))?;
        Ok((s, from + end + 1))
    };
    let (first, next) = line(0)?;
    let found = first
        .strip_prefix(magic)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| Error::Format(format!("not a {magic} file")))?;
    let found: u32 = found
        .parse()
        .map_err(|_| Error::Format(format!("bad version `{found}`")))?;
    if found != version {
        return Err(Error::Version {
            found,
            expected: version,
        });
    }
    let (len, start) = line(next)?;
    let len: usize = len
        .parse()
        .map_err(|_| Error::Format(format!("bad header length `{len}`")))?;
    let body = bytes
        .get(start..start + len)
        .ok_or_else(|| Error::Length("header truncated".into()))?;
    let header = serde_json::from_slice(body).map_err(|e| Error::Format(format!("header: {e}")))?;
    let raw = &bytes[start + len..];
    if !raw.len().is_multiple_of(8) {
        return Err(Error::Length(format!(
            "payload of {} bytes is not whole f64 values",
            raw.len()
        )));
    }
    let payload = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((header, payload))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

const TENSOR_MAGIC: &str = "stlsnn-tensor";

/// A labelled stack of per-sample tensors, as written by `encode` and `noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFile {
    /// Per-sample shape, e.g. `[T, C, H, W]`.
    pub shape: Vec<usize>,
    pub labels: Vec<usize>,
    #[serde(skip)]
    pub data: Vec<f64>,
}

impl TensorFile {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let per: usize = self.shape.iter().product();
        if self.data.len() != per * self.labels.len() {
            return Err(Error::Length(format!(
                "{} values for {} samples of {:?}",
                self.data.len(),
                self.labels.len(),
                self.shape
            )));
        }
        frame(TENSOR_MAGIC, 1, self, &self.data)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut t, data): (TensorFile, _) = unframe(TENSOR_MAGIC, 1, bytes)?;
        let per: usize = t.shape.iter().product();
        if data.len() != per * t.labels.len() {
            return Err(Error::Length(format!(
                "payload holds {} values, header declares {}",
                data.len(),
                per * t.labels.len()
            )));
        }
        t.data = data;
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path, &self.to_bytes()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&read_file(path.as_ref())?)
    }
}
