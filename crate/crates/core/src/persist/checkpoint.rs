use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{format_network, parse_network};
use crate::net::{InitSpec, Network, ParamKind, ParamSlot, Stage, Synapse};
use crate::neuron::LifConstants;
use crate::tensor::Shape;
use crate::train::{MetricsRecord, OptimizerState};

use super::{atomic_write, frame, read_file, unframe, ExperimentConfig};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "stlsnn-checkpoint";

/// A resumable snapshot after `epoch` completed epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub epoch: usize,
    pub network: Network,
    pub optimizer: OptimizerState,
    pub metrics: Vec<MetricsRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetHeader {
    layers: String,
    input_shape: Shape,
    lif: LifConstants,
}

/// All randomness is keyed by `(seed, epoch, ...)`, so this is the whole
/// generator state.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RngState {
    seed: u64,
    next_epoch: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ExperimentConfig,
    epoch: usize,
    network: NetHeader,
    rng: RngState,
    optimizer_step: u64,
    tensors: Vec<TensorEntry>,
    metrics: Vec<MetricsRecord>,
}

#[derive(Clone, Copy)]
enum Target {
    Param(ParamSlot),
    RunningMean(usize),
    RunningVar(usize),
    AdamM(ParamSlot),
    AdamV(ParamSlot),
}

fn param_shape(net: &Network, slot: ParamSlot) -> Vec<usize> {
    let n = net.param(slot).len();
    match (&net.stages[slot.stage], slot.kind) {
        (Stage::Spiking(l), ParamKind::Weights) => match &l.synapse {
            Synapse::Dense(d) => vec![d.out_features, d.in_features],
            Synapse::Conv(c) => vec![c.out_channels, c.in_shape.channels, c.kernel, c.kernel],
            Synapse::Identity => vec![n],
        },
        _ => vec![n],
    }
}

/// Names, shapes and locations of every persisted tensor, in payload order.
fn layout(net: &Network) -> Vec<(String, Vec<usize>, Target)> {
    let slots = net.param_slots();
    let mut out = Vec::new();
    for &s in &slots {
        out.push((
            format!("s{}.{}", s.stage, s.kind.name()),
            param_shape(net, s),
            Target::Param(s),
        ));
        if s.kind == ParamKind::BnBeta {
            let c = net.param(s).len();
            out.push((
                format!("s{}.bn_running_mean", s.stage),
                vec![c],
                Target::RunningMean(s.stage),
            ));
            out.push((
                format!("s{}.bn_running_var", s.stage),
                vec![c],
                Target::RunningVar(s.stage),
            ));
        }
    }
    for &s in &slots {
        let shape = param_shape(net, s);
        out.push((
            format!("adam.m.s{}.{}", s.stage, s.kind.name()),
            shape.clone(),
            Target::AdamM(s),
        ));
        out.push((
            format!("adam.v.s{}.{}", s.stage, s.kind.name()),
            shape,
            Target::AdamV(s),
        ));
    }
    out
}

fn running(net: &Network, stage: usize, var: bool) -> &[f64] {
    match &net.stages[stage] {
        Stage::Spiking(l) => {
            let bn = l.bn.as_ref().expect("layout lists running stats only for BN stages");
            if var {
                &bn.running_var
            } else {
                &bn.running_mean
            }
        }
        _ => unreachable!("layout lists running stats only for spiking stages"),
    }
}

fn running_mut(net: &mut Network, stage: usize, var: bool) -> &mut [f64] {
    match &mut net.stages[stage] {
        Stage::Spiking(l) => {
            let bn = l.bn.as_mut().expect("layout lists running stats only for BN stages");
            if var {
                &mut bn.running_var
            } else {
                &mut bn.running_mean
            }
        }
        _ => unreachable!("layout lists running stats only for spiking stages"),
    }
}

pub fn write_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let (net, opt) = (&ckpt.network, &ckpt.optimizer);
    let lay = layout(net);
    let mut payload = Vec::new();
    for (_, _, t) in &lay {
        payload.extend_from_slice(match *t {
            Target::Param(s) => net.param(s),
            Target::RunningMean(k) => running(net, k, false),
            Target::RunningVar(k) => running(net, k, true),
            Target::AdamM(s) => opt.m.get(s),
            Target::AdamV(s) => opt.v.get(s),
        });
    }
    let mut config = ckpt.config.clone();
    // the output location is not part of the model; dropping it keeps
    // checkpoints from identical runs byte-identical wherever they are written
    config.out_dir = None;
    let header = Header {
        config,
        epoch: ckpt.epoch,
        network: NetHeader {
            layers: format_network(&net.specs),
            input_shape: net.input_shape,
            lif: net.lif,
        },
        rng: RngState {
            seed: ckpt.config.train.seed,
            next_epoch: ckpt.epoch,
        },
        optimizer_step: opt.step,
        tensors: lay
            .into_iter()
            .map(|(name, shape, _)| TensorEntry { name, shape })
            .collect(),
        metrics: ckpt.metrics.clone(),
    };
    frame(MAGIC, CHECKPOINT_VERSION, &header, &payload)
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let (h, payload): (Header, Vec<f64>) = unframe(MAGIC, CHECKPOINT_VERSION, bytes)?;
    let declared: usize = h.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    if declared != payload.len() {
        return Err(Error::Length(format!(
            "header declares {declared} values, payload holds {}",
            payload.len()
        )));
    }
    let specs = parse_network(&h.network.layers, h.config.train.dropout_p)?;
    let lif = LifConstants::new(h.network.lif.tau, h.network.lif.dt)?;
    let mut net = Network::build(&specs, h.network.input_shape, lif, &InitSpec::default())?;
    let mut opt = OptimizerState::new(&net);
    let lay = layout(&net);
    if lay.len() != h.tensors.len() {
        return Err(Error::Shape(format!(
            "network has {} tensors, checkpoint lists {}",
            lay.len(),
            h.tensors.len()
        )));
    }
    let mut at = 0;
    for ((name, shape, target), entry) in lay.iter().zip(&h.tensors) {
        if *name != entry.name || *shape != entry.shape {
            return Err(Error::Shape(format!(
                "tensor {} {:?} does not match the network's {name} {shape:?}",
                entry.name, entry.shape
            )));
        }
        let n: usize = shape.iter().product();
        let src = &payload[at..at + n];
        at += n;
        match *target {
            Target::Param(s) => net.param_mut(s).copy_from_slice(src),
            Target::RunningMean(k) => running_mut(&mut net, k, false).copy_from_slice(src),
            Target::RunningVar(k) => running_mut(&mut net, k, true).copy_from_slice(src),
            Target::AdamM(s) => opt.m.get_mut(s).copy_from_slice(src),
            Target::AdamV(s) => opt.v.get_mut(s).copy_from_slice(src),
        }
    }
    opt.step = h.optimizer_step;
    if h.rng.seed != h.config.train.seed || h.rng.next_epoch != h.epoch {
        return Err(Error::Consistency("generator state disagrees with the config".into()));
    }
    Ok(Checkpoint {
        config: h.config,
        epoch: h.epoch,
        network: net,
        optimizer: opt,
        metrics: h.metrics,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    atomic_write(path, &write_checkpoint(ckpt)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(&read_file(path.as_ref())?)
}
