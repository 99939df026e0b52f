//! TOML experiment files.
//!
//! ```toml
//! network = "{128C3-BN-MP}*2-DP-FC2048-DP-VotingC10P10"
//! jdf_k = 1
//! track_samples = 100
//!
//! [train]            # any TrainConfig key; missing keys take defaults
//! time_window = 4
//! mode = "stl"
//!
//! [dataset]
//! kind = "idx"       # or "events", "synthetic"
//! train_images = "data/mnist/train-images-idx3-ubyte"
//! ...
//!
//! [noise]            # optional, applied to the test split
//! kind = "salt_pepper"
//! level = 0.1
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    load_events, load_idx, slice_equal_count, slice_fixed_duration, synthetic_events, synthetic_images, Dataset,
    Encoding, EventStream, FrameTensor, ImageSet, NoiseSpec,
};
use crate::error::{Error, Result};
use crate::layers::{parse_network, LayerSpec};
use crate::net::{check_chain, Network};
use crate::tensor::Shape;
use crate::train::TrainConfig;

pub const DEFAULT_NETWORK: &str = "{128C3-BN-MP}*2-DP-FC2048-DP-VotingC10P10";

fn d_network() -> String {
    DEFAULT_NETWORK.into()
}
fn d_one() -> usize {
    1
}
fn d_track() -> usize {
    100
}
fn d_encoding() -> Encoding {
    Encoding::Bernoulli
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceMethod {
    /// `time_window` slices with equal event counts.
    EqualCount,
    /// Slices of `slice_ms` covering the first `total_ms`.
    FixedDuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticSource {
    Images,
    Events,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default = "d_encoding")]
        encoding: Encoding,
        /// Block-average factor applied at load time.
        #[serde(default = "d_one")]
        downsample: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_limit: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_limit: Option<usize>,
    },
    /// List files hold `path,label` lines; paths are relative to the list.
    Events {
        train_list: PathBuf,
        test_list: PathBuf,
        slicing: SliceMethod,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slice_ms: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_ms: Option<f64>,
    },
    Synthetic {
        source: SyntheticSource,
        train_samples: usize,
        test_samples: usize,
        classes: usize,
        #[serde(default = "d_one")]
        channels: usize,
        height: usize,
        width: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "d_encoding")]
        encoding: Encoding,
        /// Stream length for synthetic events.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration_ms: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slicing: Option<SliceMethod>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slice_ms: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "d_network")]
    pub network: String,
    /// Ensemble size for `jdf-eval`.
    #[serde(default = "d_one")]
    pub jdf_k: usize,
    /// Units per layer followed by `track-thresholds`.
    #[serde(default = "d_track")]
    pub track_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainConfig,
    pub dataset: DatasetConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_list(list: &Path) -> Result<Vec<(PathBuf, usize)>> {
    let text = std::fs::read_to_string(list).map_err(|e| Error::io(list, e))?;
    let dir = list.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: i + 1,
            msg: format!("{}: {msg}", list.display()),
        };
        let (p, l) = line.rsplit_once(',').ok_or_else(|| bad("expected `path,label`"))?;
        let label = l.trim().parse().map_err(|_| bad("label is not an integer"))?;
        out.push((resolve(dir, Path::new(p.trim())), label));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// A config with every default and the given dataset.
    pub fn with_dataset(dataset: DatasetConfig) -> Self {
        Self {
            network: d_network(),
            jdf_k: 1,
            track_samples: d_track(),
            out_dir: None,
            train: TrainConfig::default(),
            dataset,
            noise: None,
        }
    }

    /// The same config with dataset paths made absolute against `base`, so
    /// it can be stored away from its original directory.
    pub fn with_absolute_paths(&self, base: &Path) -> Result<Self> {
        let abs = |p: &mut PathBuf| -> Result<()> {
            let joined = resolve(base, p);
            *p = std::path::absolute(&joined).map_err(|e| Error::io(&joined, e))?;
            Ok(())
        };
        let mut out = self.clone();
        match &mut out.dataset {
            DatasetConfig::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                ..
            } => {
                for p in [train_images, train_labels, test_images, test_labels] {
                    abs(p)?;
                }
            }
            DatasetConfig::Events {
                train_list, test_list, ..
            } => {
                abs(train_list)?;
                abs(test_list)?;
            }
            DatasetConfig::Synthetic { .. } => {}
        }
        Ok(out)
    }

    pub fn specs(&self) -> Result<Vec<LayerSpec>> {
        parse_network(&self.network, self.train.dropout_p)
    }

    fn frame_count(&self, slicing: SliceMethod, slice_ms: Option<f64>, total_ms: Option<f64>) -> Result<()> {
        if slicing == SliceMethod::FixedDuration {
            let (s, t) = match (slice_ms, total_ms) {
                (Some(s), Some(t)) => (s, t),
                _ => {
                    return Err(Error::Config(
                        "fixed_duration slicing needs slice_ms and total_ms".into(),
                    ))
                }
            };
            let n = t / s;
            if (n - n.round()).abs() > 1e-9 || n.round() as usize != self.train.time_window {
                return Err(Error::Config(format!(
                    "{t} ms in {s} ms slices does not give time_window = {} frames",
                    self.train.time_window
                )));
            }
        }
        Ok(())
    }

    /// Per-sample input shape if it can be known without loading the data
    /// (IDX headers are read when the file exists).
    pub fn input_shape(&self, base: &Path) -> Option<Shape> {
        match &self.dataset {
            DatasetConfig::Idx {
                train_images,
                downsample,
                ..
            } => {
                let mut head = [0u8; 16];
                let mut f = std::fs::File::open(resolve(base, train_images)).ok()?;
                std::io::Read::read_exact(&mut f, &mut head).ok()?;
                let dim = |i: usize| u32::from_be_bytes(head[i..i + 4].try_into().unwrap()) as usize;
                let d = (*downsample).max(1);
                Some(Shape::new(1, dim(8) / d, dim(12) / d))
            }
            DatasetConfig::Events { .. } => None,
            DatasetConfig::Synthetic {
                source,
                channels,
                height,
                width,
                ..
            } => Some(match source {
                SyntheticSource::Images => Shape::new(*channels, *height, *width),
                SyntheticSource::Events => Shape::new(2, *height, *width),
            }),
        }
    }

    /// Checks everything that does not need the data itself.
    pub fn validate(&self, base: &Path) -> Result<()> {
        self.train.validate()?;
        if self.jdf_k == 0 {
            return Err(Error::Config("jdf_k must be at least 1".into()));
        }
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        match &self.dataset {
            DatasetConfig::Idx { downsample, .. } if *downsample == 0 => {
                return Err(Error::Config("downsample must be at least 1".into()))
            }
            DatasetConfig::Events {
                slicing,
                slice_ms,
                total_ms,
                ..
            } => self.frame_count(*slicing, *slice_ms, *total_ms)?,
            DatasetConfig::Synthetic {
                source: SyntheticSource::Events,
                duration_ms,
                slicing,
                slice_ms,
                ..
            } => self.frame_count(slicing.unwrap_or(SliceMethod::EqualCount), *slice_ms, *duration_ms)?,
            _ => {}
        }
        let specs = self.specs().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(shape) = self.input_shape(base) {
            check_chain(&specs, shape).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn build_network(&self, input_shape: Shape) -> Result<Network> {
        Network::build(&self.specs()?, input_shape, self.train.lif()?, &self.train.init_spec())
    }

    fn slice(
        &self,
        ev: &EventStream,
        slicing: SliceMethod,
        slice_ms: Option<f64>,
        total_ms: Option<f64>,
    ) -> Result<FrameTensor> {
        match slicing {
            SliceMethod::EqualCount => slice_equal_count(ev, self.train.time_window),
            SliceMethod::FixedDuration => slice_fixed_duration(
                ev,
                slice_ms.ok_or_else(|| Error::Config("missing slice_ms".into()))?,
                total_ms.ok_or_else(|| Error::Config("missing total_ms".into()))?,
            ),
        }
    }

    /// Loads `(train, test)`; any noise spec corrupts the test split only.
    pub fn load_datasets(&self, base: &Path) -> Result<(Dataset, Dataset)> {
        let (train, test) = match &self.dataset {
            DatasetConfig::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                encoding,
                downsample,
                train_limit,
                test_limit,
            } => {
                let load = |i: &PathBuf, l: &PathBuf, limit: &Option<usize>| -> Result<Dataset> {
                    let mut set = load_idx(resolve(base, i), resolve(base, l))?;
                    if let Some(n) = limit {
                        set = set.truncate(*n);
                    }
                    Ok(Dataset::from_images(set.downsample(*downsample)?, *encoding))
                };
                (
                    load(train_images, train_labels, train_limit)?,
                    load(test_images, test_labels, test_limit)?,
                )
            }
            DatasetConfig::Events {
                train_list,
                test_list,
                slicing,
                slice_ms,
                total_ms,
            } => {
                let load = |list: &PathBuf| -> Result<Dataset> {
                    let entries = read_list(&resolve(base, list))?;
                    let frames = entries
                        .iter()
                        .map(|(p, _)| self.slice(&load_events(p)?, *slicing, *slice_ms, *total_ms))
                        .collect::<Result<Vec<_>>>()?;
                    Dataset::from_frames(frames, entries.into_iter().map(|(_, l)| l).collect())
                };
                (load(train_list)?, load(test_list)?)
            }
            DatasetConfig::Synthetic {
                source,
                train_samples,
                test_samples,
                classes,
                channels,
                height,
                width,
                seed,
                encoding,
                duration_ms,
                slicing,
                slice_ms,
            } => {
                let n = train_samples + test_samples;
                let split = |all: Dataset| -> (Dataset, Dataset) {
                    let tr: Vec<usize> = (0..*train_samples).collect();
                    let te: Vec<usize> = (*train_samples..n).collect();
                    (all.subset(&tr), all.subset(&te))
                };
                match source {
                    SyntheticSource::Images => {
                        let set: ImageSet =
                            synthetic_images(n, *classes, Shape::new(*channels, *height, *width), *seed)?;
                        split(Dataset::from_images(set, *encoding))
                    }
                    SyntheticSource::Events => {
                        let dur = duration_ms.unwrap_or(100.0);
                        let (streams, labels) =
                            synthetic_events(n, *classes, *height, *width, (dur * 1000.0).round() as u64, *seed)?;
                        let method = slicing.unwrap_or(SliceMethod::EqualCount);
                        let frames = streams
                            .iter()
                            .map(|ev| self.slice(ev, method, *slice_ms, Some(dur)))
                            .collect::<Result<Vec<_>>>()?;
                        split(Dataset::from_frames(frames, labels)?)
                    }
                }
            }
        };
        let test = match &self.noise {
            Some(spec) => test.with_noise(spec)?,
            None => test,
        };
        Ok((train, test))
    }
}

pub fn parse_config_str(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.validate(base)?;
    Ok(cfg)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn emit_config(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[dataset]
kind = "idx"
train_images = "a"
train_labels = "b"
test_images = "c"
test_labels = "d"
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config_str(MINIMAL, Path::new("/nonexistent")).unwrap();
        let t = &cfg.train;
        assert_eq!(
            (t.tau, t.dt, t.eta0, t.gamma, t.dropout_p, t.initial_threshold),
            (2.0, 1.0, 0.001, 0.93, 0.5, 2.0)
        );
        assert_eq!(cfg.network, DEFAULT_NETWORK);
        let specs = cfg.specs().unwrap();
        assert_eq!(specs.iter().filter(|s| s.is_spiking()).count(), 4);
    }

    #[test]
    fn unknown_keys_are_named() {
        for extra in ["bogus = 1\n", "[train]\nlearning_rate = 1\n"] {
            let e = parse_config_str(&format!("{extra}{MINIMAL}"), Path::new(".")).unwrap_err();
            let key = if extra.starts_with("bogus") {
                "bogus"
            } else {
                "learning_rate"
            };
            assert!(e.to_string().contains(key), "{e}");
        }
        let bad = MINIMAL.replace("test_labels", "test_labelz");
        assert!(parse_config_str(&bad, Path::new(".")).is_err());
    }

    #[test]
    fn chain_failure_names_boundary() {
        let text = r#"
network = "FC8-MP2-VotingC2P1"
[dataset]
kind = "synthetic"
source = "images"
train_samples = 4
test_samples = 4
classes = 2
height = 4
width = 4
"#;
        let e = parse_config_str(text, Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(e.to_string().contains("layer 1"), "{e}");
    }

    #[test]
    fn round_trip() {
        let mut cfg = parse_config_str(MINIMAL, Path::new(".")).unwrap();
        cfg.noise = Some(NoiseSpec::new(crate::data::NoiseKind::Uniform, 0.3, 2).unwrap());
        cfg.train.layer_thresholds = Some(vec![0.5, 1.0, 1.0, 1.0]);
        cfg.train.eta0 = 0.1 + 0.2;
        let text = emit_config(&cfg).unwrap();
        assert_eq!(parse_config_str(&text, Path::new(".")).unwrap(), cfg);
    }
}
