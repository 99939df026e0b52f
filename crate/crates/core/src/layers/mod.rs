//! Layer descriptions and the linear/normalization/pooling primitives the
//! network is built from.
//!
//! Network strings use the compact notation common in the SNN literature:
//!
//! | token          | meaning                                              |
//! |----------------|------------------------------------------------------|
//! | `128C3`        | conv, 128 output channels, 3x3 kernel, stride 1, same padding |
//! | `BN`           | batch norm on the preceding conv/FC synaptic input   |
//! | `MP2` / `MP`   | 2x2 max pooling, stride 2                            |
//! | `DP` / `DP0.3` | dropout (rate from the config, or explicit)          |
//! | `FC2048`       | fully connected spiking layer                        |
//! | `VotingC10P10` | voting layer, 10 classes x 10 neurons                |
//! | `EN`           | encoding layer: LIF units fed the raw input          |
//! | `AP`           | average-pool readout marker (implicit; accepted)     |
//! | `{...}*n`      | the bracketed chain repeated `n` times              |

mod batchnorm;
mod conv;
mod dense;
mod dropout;
mod maxpool;

pub use batchnorm::{BatchNorm, BnCache, BN_EPS, BN_MOMENTUM};
pub use conv::{conv_output_size, Conv2d};
pub use dense::Dense;
pub use dropout::{check_rate, dropout_mask};
pub use maxpool::MaxPool2d;

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Encoding,
    Dense {
        out_features: usize,
    },
    Conv2d {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    BatchNorm,
    MaxPool2d {
        window: usize,
        stride: usize,
    },
    Dropout {
        p: f64,
    },
    Voting {
        classes: usize,
        population: usize,
    },
}

impl LayerSpec {
    pub fn is_spiking(&self) -> bool {
        matches!(
            self,
            LayerSpec::Encoding | LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. } | LayerSpec::Voting { .. }
        )
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Encoding => write!(f, "EN"),
            LayerSpec::Dense { out_features } => write!(f, "FC{out_features}"),
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                write!(f, "{out_channels}C{kernel}")?;
                if stride != 1 {
                    write!(f, "s{stride}")?;
                }
                if padding != kernel / 2 {
                    write!(f, "p{padding}")?;
                }
                Ok(())
            }
            LayerSpec::BatchNorm => write!(f, "BN"),
            LayerSpec::MaxPool2d { window, stride } if window == stride => write!(f, "MP{window}"),
            LayerSpec::MaxPool2d { window, stride } => write!(f, "MP{window}s{stride}"),
            LayerSpec::Dropout { p } => write!(f, "DP{p}"),
            LayerSpec::Voting { classes, population } => write!(f, "VotingC{classes}P{population}"),
        }
    }
}

/// Renders a layer list back into network-string form (without `{}*n`).
pub fn format_network(specs: &[LayerSpec]) -> String {
    specs.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("-")
}

/// Parses a network string; `DP` without an explicit rate uses `default_dropout`.
pub fn parse_network(s: &str, default_dropout: f64) -> Result<Vec<LayerSpec>> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(Error::Config("empty network description".into()));
    }
    let specs = parse_chain(&s, default_dropout)?;
    if specs.is_empty() {
        return Err(Error::Config(format!("network `{s}` has no layers")));
    }
    Ok(specs)
}

fn parse_chain(s: &str, default_dropout: f64) -> Result<Vec<LayerSpec>> {
    let mut out = Vec::new();
    for item in split_top_level(s)? {
        if let Some(rest) = item.strip_prefix('{') {
            let close = rest
                .rfind('}')
                .ok_or_else(|| Error::Config(format!("unbalanced braces in `{item}`")))?;
            let inner = &rest[..close];
            let reps = rest[close + 1..]
                .strip_prefix('*')
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n >= 1)
                .ok_or_else(|| Error::Config(format!("group `{item}` needs a `*n` repeat count")))?;
            let body = parse_chain(inner, default_dropout)?;
            for _ in 0..reps {
                out.extend_from_slice(&body);
            }
        } else if let Some(spec) = parse_token(item, default_dropout)? {
            out.push(spec);
        }
    }
    Ok(out)
}

fn split_top_level(s: &str) -> Result<Vec<&str>> {
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth < 0 {
                    return Err(Error::Config(format!("unbalanced braces in `{s}`")));
                }
            }
            '-' if depth == 0 => {
                items.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(Error::Config(format!("unbalanced braces in `{s}`")));
    }
    items.push(&s[start..]);
    if items.iter().any(|t| t.is_empty()) {
        return Err(Error::Config(format!("empty layer token in `{s}`")));
    }
    Ok(items)
}

fn number(s: &str, tok: &str) -> Result<usize> {
    s.parse::<usize>()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("bad number `{s}` in layer token `{tok}`")))
}

/// Splits `"3s2p0"` into the leading number and optional `s`/`p` suffixes.
fn with_suffixes(s: &str, tok: &str) -> Result<(usize, Option<usize>, Option<usize>)> {
    let end = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let head = number(&s[..end], tok)?;
    let (mut stride, mut pad) = (None, None);
    let mut rest = &s[end..];
    while let Some(c) = rest.chars().next() {
        let tail = &rest[1..];
        let n_end = tail.find(|c: char| !c.is_ascii_digit()).unwrap_or(tail.len());
        let digits = &tail[..n_end];
        match c {
            's' => stride = Some(number(digits, tok)?),
            'p' => {
                pad = Some(
                    digits
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad padding in `{tok}`")))?,
                )
            }
            _ => return Err(Error::Config(format!("unknown layer token `{tok}`"))),
        }
        rest = &tail[n_end..];
    }
    Ok((head, stride, pad))
}

fn parse_token(tok: &str, default_dropout: f64) -> Result<Option<LayerSpec>> {
    let unknown = || Error::Config(format!("unknown layer token `{tok}`"));
    let spec = match tok {
        "BN" => LayerSpec::BatchNorm,
        "EN" => LayerSpec::Encoding,
        "AP" => return Ok(None),
        "MP" => LayerSpec::MaxPool2d { window: 2, stride: 2 },
        "DP" => LayerSpec::Dropout { p: default_dropout },
        _ => {
            if let Some(rest) = tok.strip_prefix("Voting") {
                let rest = rest.strip_prefix('C').ok_or_else(unknown)?;
                let (c, p) = rest.split_once('P').ok_or_else(unknown)?;
                LayerSpec::Voting {
                    classes: number(c, tok)?,
                    population: number(p, tok)?,
                }
            } else if let Some(rest) = tok.strip_prefix("FC") {
                LayerSpec::Dense {
                    out_features: number(rest, tok)?,
                }
            } else if let Some(rest) = tok.strip_prefix("MP") {
                let (window, stride, pad) = with_suffixes(rest, tok)?;
                if pad.is_some() {
                    return Err(unknown());
                }
                LayerSpec::MaxPool2d {
                    window,
                    stride: stride.unwrap_or(window),
                }
            } else if let Some(rest) = tok.strip_prefix("DP") {
                let p: f64 = rest.parse().map_err(|_| unknown())?;
                check_rate(p)?;
                LayerSpec::Dropout { p }
            } else if let Some((ch, rest)) = tok.split_once('C') {
                let out_channels = number(ch, tok)?;
                let (kernel, stride, pad) = with_suffixes(rest, tok)?;
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    stride: stride.unwrap_or(1),
                    padding: pad.unwrap_or(kernel / 2),
                }
            } else {
                return Err(unknown());
            }
        }
    };
    Ok(Some(spec))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(c: usize, k: usize) -> LayerSpec {
        LayerSpec::Conv2d {
            out_channels: c,
            kernel: k,
            stride: 1,
            padding: k / 2,
        }
    }

    #[test]
    fn mnist_structure() {
        let specs = parse_network("{128C3-BN-MP}*2-DP-FC2048-DP-VotingC10P10-AP", 0.5).unwrap();
        let mp = LayerSpec::MaxPool2d { window: 2, stride: 2 };
        let dp = LayerSpec::Dropout { p: 0.5 };
        assert_eq!(
            specs,
            vec![
                conv(128, 3),
                LayerSpec::BatchNorm,
                mp,
                conv(128, 3),
                LayerSpec::BatchNorm,
                mp,
                dp,
                LayerSpec::Dense { out_features: 2048 },
                dp,
                LayerSpec::Voting {
                    classes: 10,
                    population: 10
                },
            ]
        );
        assert_eq!(specs.iter().filter(|s| s.is_spiking()).count(), 4);
    }

    #[test]
    fn repetition_counts() {
        for n in 1..=3 {
            let specs = parse_network(&format!("{{8C3-MP2}}*{n}-VotingC2P1"), 0.5).unwrap();
            assert_eq!(specs.len(), 2 * n + 1);
        }
        let nested = parse_network("{{4C3}*2-MP}*2-FC3", 0.5).unwrap();
        assert_eq!(nested.len(), 7);
    }

    #[test]
    fn token_variants() {
        assert_eq!(
            parse_network("16C5s2p0-MP3s2-DP0.25-EN", 0.5).unwrap(),
            vec![
                LayerSpec::Conv2d {
                    out_channels: 16,
                    kernel: 5,
                    stride: 2,
                    padding: 0
                },
                LayerSpec::MaxPool2d { window: 3, stride: 2 },
                LayerSpec::Dropout { p: 0.25 },
                LayerSpec::Encoding,
            ]
        );
    }

    #[test]
    fn round_trips_through_display() {
        let s = "EN-{32C3-BN-MP}*2-16C5s2p0-MP3s2-DP-FC100-VotingC10P10";
        let specs = parse_network(s, 0.5).unwrap();
        assert_eq!(parse_network(&format_network(&specs), 0.9).unwrap(), specs);
    }

    #[test]
    fn rejects_bad_tokens() {
        for bad in [
            "",
            "FC",
            "FC0",
            "XYZ",
            "{FC3",
            "FC3}",
            "{FC3}",
            "{FC3}*0",
            "DP1.5",
            "FC3--FC2",
            "VotingC10",
        ] {
            assert!(parse_network(bad, 0.5).is_err(), "{bad}");
        }
    }
}
