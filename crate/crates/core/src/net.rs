//! Time-unrolled spiking network.
//!
//! A network is a chain of stages. Spiking stages apply a synaptic map
//! (identity for encoding layers, dense or convolutional otherwise), an
//! optional batch norm, then LIF neurons with one learnable threshold per
//! output channel (per neuron for dense and voting layers). Pooling and
//! dropout stages act on spikes.
//!
//! The forward pass runs stage by stage over the whole `[T][batch]` block.
//! For a feedforward chain this visits the same states as iterating time in
//! the outer loop, and lets batch norm pool statistics over time.

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::{check_rate, dropout_mask, BatchNorm, BnCache, Conv2d, Dense, LayerSpec, MaxPool2d};
use crate::neuron::{fire, LifConstants, SurrogateSpec};
use crate::par;
use crate::rng::{derive, stream_rng, Stream};
use crate::tensor::{Activations, Shape};

/// Output spikes of a layer, `[T][batch][units]`.
pub type SpikeRecord = Activations;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

/// How spikes are produced in the forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dynamics {
    /// Binary spikes with reset; the training and inference path.
    Hard,
    /// Spikes replaced by the smooth surrogate and a constant leak. Only used
    /// to check gradients against finite differences.
    Soft(SurrogateSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Synapse {
    Identity,
    Dense(Dense),
    Conv(Conv2d),
}

impl Synapse {
    pub fn weights(&self) -> &[f64] {
        match self {
            Synapse::Identity => &[],
            Synapse::Dense(d) => &d.weights,
            Synapse::Conv(c) => &c.weights,
        }
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        match self {
            Synapse::Identity => &mut [],
            Synapse::Dense(d) => &mut d.weights,
            Synapse::Conv(c) => &mut c.weights,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Voting {
    pub classes: usize,
    pub population: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikingLayer {
    pub synapse: Synapse,
    pub bn: Option<BatchNorm>,
    /// One threshold (mV) per output channel.
    pub thresholds: Vec<f64>,
    pub out_shape: Shape,
    pub voting: Option<Voting>,
}

impl SpikingLayer {
    #[inline]
    fn threshold_of(&self, unit: usize) -> f64 {
        self.thresholds[unit / self.out_shape.spatial()]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Stage {
    Spiking(SpikingLayer),
    MaxPool(MaxPool2d),
    Dropout { p: f64, width: usize },
}

impl Stage {
    pub fn out_width(&self) -> usize {
        match self {
            Stage::Spiking(l) => l.out_shape.numel(),
            Stage::MaxPool(m) => m.out_shape().numel(),
            Stage::Dropout { width, .. } => *width,
        }
    }
}

/// Initialization settings for a freshly built network.
#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec {
    pub seed: u64,
    pub initial_threshold: f64,
    /// Optional per-spiking-layer override of `initial_threshold`.
    pub layer_thresholds: Option<Vec<f64>>,
    /// Weights are drawn from `U(-b, b)` with `b = gain * sqrt(3 / fan_in)`.
    pub weight_gain: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            initial_threshold: 2.0,
            layer_thresholds: None,
            weight_gain: std::f64::consts::SQRT_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weights,
    Thresholds,
    BnGamma,
    BnBeta,
}

impl ParamKind {
    pub fn name(&self) -> &'static str {
        match self {
            ParamKind::Weights => "weights",
            ParamKind::Thresholds => "thresholds",
            ParamKind::BnGamma => "bn_gamma",
            ParamKind::BnBeta => "bn_beta",
        }
    }
}

/// Names one learnable tensor of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSlot {
    pub stage: usize,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input_shape: Shape,
    pub lif: LifConstants,
    pub specs: Vec<LayerSpec>,
    pub stages: Vec<Stage>,
}

/// Validates a layer chain against an input shape; errors name the failing
/// boundary.
pub fn check_chain(specs: &[LayerSpec], input_shape: Shape) -> Result<()> {
    Network::build(specs, input_shape, LifConstants::default(), &InitSpec::default()).map(|_| ())
}

impl Network {
    pub fn build(specs: &[LayerSpec], input_shape: Shape, lif: LifConstants, init: &InitSpec) -> Result<Self> {
        if input_shape.numel() == 0 {
            return Err(Error::Shape(format!("input shape {input_shape} is empty")));
        }
        let mut stages: Vec<Stage> = Vec::new();
        let mut shape = input_shape;
        let mut spiking_index = 0;
        let layer_threshold = |i: usize| -> Result<f64> {
            match &init.layer_thresholds {
                None => Ok(init.initial_threshold),
                Some(v) => v
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("no initial threshold given for spiking layer {i}"))),
            }
        };
        for (i, spec) in specs.iter().enumerate() {
            let boundary = |msg: String| Error::Shape(format!("layer {i} ({spec}) after {shape}: {msg}"));
            let mut rng = stream_rng(init.seed, Stream::Weights, &[i as u64]);
            let mut uniform = |n: usize, fan_in: usize| -> Vec<f64> {
                let b = init.weight_gain * (3.0 / fan_in as f64).sqrt();
                (0..n).map(|_| rng.random_range(-b..=b)).collect()
            };
            if matches!(stages.last(), Some(Stage::Spiking(l)) if l.voting.is_some()) {
                return Err(boundary("nothing may follow the voting layer".into()));
            }
            let stage = match *spec {
                LayerSpec::Encoding => {
                    let th = layer_threshold(spiking_index)?;
                    Stage::Spiking(SpikingLayer {
                        synapse: Synapse::Identity,
                        bn: None,
                        thresholds: vec![th; shape.channels],
                        out_shape: shape,
                        voting: None,
                    })
                }
                LayerSpec::Dense { out_features } => {
                    let nin = shape.numel();
                    let d = Dense::new(nin, out_features, uniform(nin * out_features, nin))?;
                    Stage::Spiking(SpikingLayer {
                        synapse: Synapse::Dense(d),
                        bn: None,
                        thresholds: vec![layer_threshold(spiking_index)?; out_features],
                        out_shape: Shape::flat(out_features),
                        voting: None,
                    })
                }
                LayerSpec::Voting { classes, population } => {
                    let nin = shape.numel();
                    let nout = classes * population;
                    let d = Dense::new(nin, nout, uniform(nin * nout, nin))?;
                    Stage::Spiking(SpikingLayer {
                        synapse: Synapse::Dense(d),
                        bn: None,
                        thresholds: vec![layer_threshold(spiking_index)?; nout],
                        out_shape: Shape::flat(nout),
                        voting: Some(Voting { classes, population }),
                    })
                }
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                } => {
                    let fan_in = shape.channels * kernel * kernel;
                    let c = Conv2d::new(
                        shape,
                        out_channels,
                        kernel,
                        stride,
                        padding,
                        uniform(out_channels * fan_in, fan_in),
                    )
                    .map_err(|e| boundary(e.to_string()))?;
                    let out_shape = c.out_shape();
                    Stage::Spiking(SpikingLayer {
                        synapse: Synapse::Conv(c),
                        bn: None,
                        thresholds: vec![layer_threshold(spiking_index)?; out_channels],
                        out_shape,
                        voting: None,
                    })
                }
                LayerSpec::BatchNorm => {
                    match stages.last_mut() {
                        Some(Stage::Spiking(l)) if l.bn.is_none() && !matches!(l.synapse, Synapse::Identity) => {
                            l.bn = Some(BatchNorm::new(l.out_shape.channels));
                        }
                        _ => return Err(boundary("BN must directly follow a conv or FC layer".into())),
                    }
                    continue;
                }
                LayerSpec::MaxPool2d { window, stride } => {
                    Stage::MaxPool(MaxPool2d::new(shape, window, stride).map_err(|e| boundary(e.to_string()))?)
                }
                LayerSpec::Dropout { p } => {
                    check_rate(p)?;
                    Stage::Dropout {
                        p,
                        width: shape.numel(),
                    }
                }
            };
            if let Stage::Spiking(_) = stage {
                spiking_index += 1;
            }
            shape = match &stage {
                Stage::Spiking(l) => l.out_shape,
                Stage::MaxPool(m) => m.out_shape(),
                Stage::Dropout { .. } => shape,
            };
            stages.push(stage);
        }
        match stages.last() {
            Some(Stage::Spiking(l)) if l.voting.is_some() => {}
            _ => return Err(Error::Shape("the network must end with a voting layer".into())),
        }
        if let Some(v) = &init.layer_thresholds {
            if v.len() != spiking_index {
                return Err(Error::Config(format!(
                    "{} initial thresholds given for {spiking_index} spiking layers",
                    v.len()
                )));
            }
        }
        Ok(Self {
            input_shape,
            lif,
            specs: specs.to_vec(),
            stages,
        })
    }

    pub fn voting(&self) -> Voting {
        match self.stages.last() {
            Some(Stage::Spiking(SpikingLayer { voting: Some(v), .. })) => *v,
            _ => unreachable!("built networks end with a voting layer"),
        }
    }

    pub fn output_width(&self) -> usize {
        let v = self.voting();
        v.classes * v.population
    }

    /// Spiking layers with their stage indices.
    pub fn spiking_layers(&self) -> impl Iterator<Item = (usize, &SpikingLayer)> {
        self.stages.iter().enumerate().filter_map(|(i, s)| match s {
            Stage::Spiking(l) => Some((i, l)),
            _ => None,
        })
    }

    pub fn spiking_layers_mut(&mut self) -> impl Iterator<Item = &mut SpikingLayer> {
        self.stages.iter_mut().filter_map(|s| match s {
            Stage::Spiking(l) => Some(l),
            _ => None,
        })
    }

    /// Total spiking units per sample (output positions of every spiking layer).
    pub fn spiking_units(&self) -> usize {
        self.spiking_layers().map(|(_, l)| l.out_shape.numel()).sum()
    }

    /// Learnable tensors in a fixed order: per spiking stage, weights (if
    /// any), thresholds, then batch-norm scale and shift.
    pub fn param_slots(&self) -> Vec<ParamSlot> {
        let mut slots = Vec::new();
        for (stage, l) in self.spiking_layers() {
            if !matches!(l.synapse, Synapse::Identity) {
                slots.push(ParamSlot {
                    stage,
                    kind: ParamKind::Weights,
                });
            }
            slots.push(ParamSlot {
                stage,
                kind: ParamKind::Thresholds,
            });
            if l.bn.is_some() {
                slots.push(ParamSlot {
                    stage,
                    kind: ParamKind::BnGamma,
                });
                slots.push(ParamSlot {
                    stage,
                    kind: ParamKind::BnBeta,
                });
            }
        }
        slots
    }

    pub fn param(&self, slot: ParamSlot) -> &[f64] {
        let Stage::Spiking(l) = &self.stages[slot.stage] else {
            panic!("stage {} has no parameters", slot.stage)
        };
        match slot.kind {
            ParamKind::Weights => l.synapse.weights(),
            ParamKind::Thresholds => &l.thresholds,
            ParamKind::BnGamma => &l.bn.as_ref().expect("batch norm").gamma,
            ParamKind::BnBeta => &l.bn.as_ref().expect("batch norm").beta,
        }
    }

    pub fn param_mut(&mut self, slot: ParamSlot) -> &mut [f64] {
        let Stage::Spiking(l) = &mut self.stages[slot.stage] else {
            panic!("stage {} has no parameters", slot.stage)
        };
        match slot.kind {
            ParamKind::Weights => l.synapse.weights_mut(),
            ParamKind::Thresholds => &mut l.thresholds,
            ParamKind::BnGamma => &mut l.bn.as_mut().expect("batch norm").gamma,
            ParamKind::BnBeta => &mut l.bn.as_mut().expect("batch norm").beta,
        }
    }

    /// Folds the batch statistics of a train-mode forward pass into the
    /// running estimates.
    pub fn commit_batch_stats(&mut self, cache: &ForwardCache) {
        for (stage, sc) in self.stages.iter_mut().zip(&cache.stages) {
            if let (Stage::Spiking(l), StageCache::Spiking { bn: Some(bc), .. }) = (stage, sc) {
                if let Some(bn) = l.bn.as_mut() {
                    bn.update_running(bc);
                }
            }
        }
    }

    /// Runs the whole window. `input` is `[T][batch][input_shape]`: spikes
    /// for rate-coded data or raw analog values for directly encoded data.
    pub fn forward(
        &self,
        input: Activations,
        phase: Phase,
        dynamics: Dynamics,
        dropout_seed: u64,
    ) -> Result<ForwardCache> {
        if input.shape != self.input_shape {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.input_shape, input.shape
            )));
        }
        if input.time_steps == 0 || input.batch == 0 {
            return Err(Error::EmptyInput(
                "forward pass needs T >= 1 and a nonempty batch".into(),
            ));
        }
        if let Dynamics::Soft(s) = &dynamics {
            s.validate()?;
            s.value(0.0, 0.0)?;
        }
        let (t_steps, batch) = (input.time_steps, input.batch);
        let mut acts = Vec::with_capacity(self.stages.len() + 1);
        let mut caches = Vec::with_capacity(self.stages.len());
        acts.push(input);
        for (k, stage) in self.stages.iter().enumerate() {
            let cur = acts.last().expect("input pushed");
            let (out, cache) = match stage {
                Stage::Spiking(layer) => self.spiking_forward(k, layer, cur, phase, dynamics)?,
                Stage::MaxPool(pool) => {
                    let os = pool.out_shape();
                    let mut out = Activations::zeros(t_steps, batch, os);
                    let mut arg = vec![0.0; out.data.len()];
                    pool.forward_rows(&cur.data, &mut out.data, &mut arg);
                    (out, StageCache::MaxPool { argmax: arg })
                }
                Stage::Dropout { p, width } => {
                    let mut out = cur.clone();
                    if phase == Phase::Train && *p > 0.0 {
                        let masks: Vec<Vec<f64>> = (0..batch)
                            .map(|b| {
                                dropout_mask(
                                    *width,
                                    *p,
                                    derive(dropout_seed, Stream::Dropout, &[k as u64, b as u64]),
                                    true,
                                )
                            })
                            .collect::<Result<_>>()?;
                        par::for_each_row(&mut out.data, *width, |r, row| {
                            for (v, m) in row.iter_mut().zip(&masks[r % batch]) {
                                *v *= m;
                            }
                        });
                        (out, StageCache::Dropout { masks: Some(masks) })
                    } else {
                        (out, StageCache::Dropout { masks: None })
                    }
                }
            };
            acts.push(out);
            caches.push(cache);
        }
        Ok(ForwardCache {
            time_steps: t_steps,
            batch,
            phase,
            dynamics,
            acts,
            stages: caches,
        })
    }

    fn spiking_forward(
        &self,
        k: usize,
        layer: &SpikingLayer,
        input: &Activations,
        phase: Phase,
        dynamics: Dynamics,
    ) -> Result<(Activations, StageCache)> {
        let (t_steps, batch) = (input.time_steps, input.batch);
        let nout = layer.out_shape.numel();
        let mut x = vec![0.0; t_steps * batch * nout];
        match &layer.synapse {
            Synapse::Identity => x.copy_from_slice(&input.data),
            Synapse::Dense(d) => d.forward_rows(&input.data, &mut x),
            Synapse::Conv(c) => c.forward_rows(&input.data, &mut x),
        }
        let bn_cache = match &layer.bn {
            Some(bn) => {
                let (y, c) = bn.forward(&x, layer.out_shape, phase == Phase::Train)?;
                x = y;
                Some(c)
            }
            None => None,
        };
        let leak = self.lif.leak();
        let block = batch * nout;
        let mut u = vec![0.0; x.len()];
        let mut o = vec![0.0; x.len()];
        for t in 0..t_steps {
            let (u_done, u_rest) = u.split_at_mut(t * block);
            let (o_done, o_rest) = o.split_at_mut(t * block);
            let u_prev = (t > 0).then(|| &u_done[(t - 1) * block..]);
            let o_prev = (t > 0).then(|| &o_done[(t - 1) * block..]);
            let x_t = &x[t * block..(t + 1) * block];
            par::for_each_row_pair(&mut u_rest[..block], nout, &mut o_rest[..block], nout, |b, ur, or| {
                for j in 0..nout {
                    let e = b * nout + j;
                    let carried = match (u_prev, o_prev, dynamics) {
                        (Some(up), _, Dynamics::Soft(_)) => leak * up[e],
                        (Some(up), Some(op), Dynamics::Hard) => {
                            if op[e] != 0.0 {
                                0.0
                            } else {
                                leak * up[e]
                            }
                        }
                        _ => 0.0,
                    };
                    let un = carried + x_t[e];
                    ur[j] = un;
                    let th = layer.threshold_of(j);
                    or[j] = match dynamics {
                        Dynamics::Hard => {
                            if fire(un, th) {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        Dynamics::Soft(s) => s.value(un, th).unwrap_or(f64::NAN),
                    };
                }
            });
            if u_rest[..block].iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric {
                    what: "membrane potential",
                    stage: k,
                    timestep: t + 1,
                });
            }
        }
        let out = Activations::from_vec(t_steps, batch, layer.out_shape, o)?;
        Ok((out, StageCache::Spiking { x, u, bn: bn_cache }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageCache {
    Spiking {
        /// Synaptic input to the membrane after any batch norm, `[T][B][units]`.
        x: Vec<f64>,
        /// Membrane potentials, `[T][B][units]`.
        u: Vec<f64>,
        bn: Option<BnCache>,
    },
    MaxPool {
        argmax: Vec<f64>,
    },
    Dropout {
        /// One mask per sample, shared by all timesteps; `None` in eval mode.
        masks: Option<Vec<Vec<f64>>>,
    },
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub time_steps: usize,
    pub batch: usize,
    pub phase: Phase,
    pub dynamics: Dynamics,
    /// `acts[0]` is the input, `acts[k + 1]` the output of stage `k`.
    pub acts: Vec<Activations>,
    pub stages: Vec<StageCache>,
}

impl ForwardCache {
    pub fn output(&self) -> &SpikeRecord {
        self.acts.last().expect("at least the input")
    }

    /// Output spikes of every spiking stage.
    pub fn spike_records<'a>(&'a self, net: &'a Network) -> impl Iterator<Item = &'a SpikeRecord> + 'a {
        net.stages
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, Stage::Spiking(_)))
            .map(move |(k, _)| &self.acts[k + 1])
    }

    /// Spikes emitted by all spiking layers, per sample.
    pub fn spike_counts_per_sample(&self, net: &Network) -> Vec<f64> {
        (0..self.batch)
            .map(|b| self.spike_records(net).map(|r| r.sample_sum(b)).sum())
            .collect()
    }
}

/// Per-class firing rates `[batch][classes]` of the voting layer:
/// `p_c = (spikes of population c over the window) / (T * P)`.
pub fn voting_readout(out: &SpikeRecord, voting: Voting) -> Result<Vec<Vec<f64>>> {
    let (c_n, p_n) = (voting.classes, voting.population);
    if out.width() != c_n * p_n {
        return Err(Error::Shape(format!(
            "voting output has {} units, expected {c_n}x{p_n}",
            out.width()
        )));
    }
    Ok(class_counts(out, voting)?
        .into_iter()
        .map(|row| row.into_iter().map(|n| n / (out.time_steps * p_n) as f64).collect())
        .collect())
}

/// Raw spike counts per class `[batch][classes]`, summed over the window.
pub fn class_counts(out: &SpikeRecord, voting: Voting) -> Result<Vec<Vec<f64>>> {
    let (c_n, p_n) = (voting.classes, voting.population);
    if out.width() != c_n * p_n {
        return Err(Error::Shape(format!(
            "voting output has {} units, expected {c_n}x{p_n}",
            out.width()
        )));
    }
    Ok((0..out.batch)
        .map(|b| {
            (0..c_n)
                .map(|c| {
                    (0..out.time_steps)
                        .map(|t| out.row(t, b)[c * p_n..(c + 1) * p_n].iter().sum::<f64>())
                        .sum()
                })
                .collect()
        })
        .collect())
}

/// Index of the largest rate; ties go to the lowest index.
pub fn predict_class(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_neuron(v_th: f64) -> Network {
        let mut net = Network::build(
            &[LayerSpec::Voting {
                classes: 1,
                population: 1,
            }],
            Shape::flat(1),
            LifConstants::new(2.0, 1.0).unwrap(),
            &InitSpec {
                initial_threshold: v_th,
                ..InitSpec::default()
            },
        )
        .unwrap();
        net.stages[0] = match net.stages[0].clone() {
            Stage::Spiking(mut l) => {
                l.synapse.weights_mut()[0] = 1.0;
                Stage::Spiking(l)
            }
            s => s,
        };
        net
    }

    fn ones(t: usize) -> Activations {
        Activations::from_vec(t, 1, Shape::flat(1), vec![1.0; t]).unwrap()
    }

    #[test]
    fn hand_unrolled_neuron() {
        let cache = single_neuron(1.0)
            .forward(ones(3), Phase::Eval, Dynamics::Hard, 0)
            .unwrap();
        assert_eq!(cache.output().data, vec![1.0, 1.0, 1.0]);
        let cache = single_neuron(1.5)
            .forward(ones(3), Phase::Eval, Dynamics::Hard, 0)
            .unwrap();
        assert_eq!(cache.output().data, vec![0.0, 1.0, 0.0]);
        let StageCache::Spiking { u, .. } = &cache.stages[0] else {
            panic!()
        };
        assert_eq!(u, &vec![1.0, 1.5, 1.0]);
    }

    #[test]
    fn silent_input_silent_output() {
        let specs = crate::layers::parse_network("8C3-BN-MP2-DP-FC16-VotingC3P2", 0.5).unwrap();
        let net = Network::build(
            &specs,
            Shape::new(1, 6, 6),
            LifConstants::default(),
            &InitSpec::default(),
        )
        .unwrap();
        let input = Activations::zeros(4, 2, Shape::new(1, 6, 6));
        let cache = net.forward(input, Phase::Eval, Dynamics::Hard, 0).unwrap();
        assert!(cache.output().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn readout_examples() {
        let v = Voting {
            classes: 2,
            population: 2,
        };
        let silent = Activations::zeros(2, 1, Shape::flat(4));
        assert_eq!(voting_readout(&silent, v).unwrap(), vec![vec![0.0, 0.0]]);
        let full = Activations::from_vec(2, 1, Shape::flat(4), vec![1.0; 8]).unwrap();
        assert_eq!(voting_readout(&full, v).unwrap(), vec![vec![1.0, 1.0]]);
        // class 0 units: (t0: 1, 1), (t1: 0, 1)
        let rec = Activations::from_vec(2, 1, Shape::flat(4), vec![1., 1., 0., 0., 0., 1., 0., 0.]).unwrap();
        assert_eq!(voting_readout(&rec, v).unwrap(), vec![vec![0.75, 0.0]]);
        assert!(voting_readout(
            &rec,
            Voting {
                classes: 3,
                population: 2
            }
        )
        .is_err());
    }

    #[test]
    fn predict_examples() {
        assert_eq!(predict_class(&[0.2, 0.9, 0.1]), 1);
        assert_eq!(predict_class(&[0.5, 0.5]), 0);
        assert_eq!(predict_class(&[0.0; 10]), 0);
    }

    #[test]
    fn chain_errors_name_the_boundary() {
        let specs = crate::layers::parse_network("8C3-MP2-MP2-VotingC2P1", 0.5).unwrap();
        let err = Network::build(
            &specs,
            Shape::new(1, 6, 6),
            LifConstants::default(),
            &InitSpec::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("layer 2 (MP2)"), "{err}");
        let specs = crate::layers::parse_network("FC3-BN-BN-VotingC2P1", 0.5).unwrap();
        assert!(Network::build(&specs, Shape::flat(4), LifConstants::default(), &InitSpec::default()).is_err());
        let specs = crate::layers::parse_network("FC3", 0.5).unwrap();
        assert!(Network::build(&specs, Shape::flat(4), LifConstants::default(), &InitSpec::default()).is_err());
        let specs = crate::layers::parse_network("VotingC2P1-FC3", 0.5).unwrap();
        assert!(Network::build(&specs, Shape::flat(4), LifConstants::default(), &InitSpec::default()).is_err());
    }

    #[test]
    fn nan_input_is_located() {
        let net = single_neuron(1.0);
        let input = Activations::from_vec(3, 1, Shape::flat(1), vec![0.0, f64::NAN, 0.0]).unwrap();
        match net.forward(input, Phase::Eval, Dynamics::Hard, 0) {
            Err(Error::Numeric {
                stage: 0, timestep: 2, ..
            }) => {}
            other => panic!("{other:?}"),
        }
    }
}
