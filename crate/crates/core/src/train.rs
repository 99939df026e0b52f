//! Training loop, evaluation, threshold tracking, threshold shuffling and
//! multi-network joint decisions.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grad::{
    apply_mode_mask, backward, loss_grad_output, mse_loss, one_hot, GradientSet, LearningMode, LossSpec,
};
use crate::net::{class_counts, predict_class, voting_readout, Dynamics, InitSpec, Network, Phase, Stage, Voting};
use crate::neuron::{LifConstants, SurrogateSpec};
use crate::rng::{derive, stream_rng, Stream};

fn d_threshold() -> f64 {
    2.0
}
fn d_tau() -> f64 {
    2.0
}
fn d_dt() -> f64 {
    1.0
}
fn d_window() -> usize {
    4
}
fn d_batch() -> usize {
    50
}
fn d_epochs() -> usize {
    100
}
fn d_eta0() -> f64 {
    1e-3
}
fn d_gamma() -> f64 {
    0.93
}
fn d_dropout() -> f64 {
    0.5
}
fn d_mode() -> LearningMode {
    LearningMode::Stl
}
fn d_beta1() -> f64 {
    0.9
}
fn d_beta2() -> f64 {
    0.999
}
fn d_eps() -> f64 {
    1e-8
}
fn d_gain() -> f64 {
    std::f64::consts::SQRT_2
}

/// Hyperparameters of one training run. Missing keys take the defaults
/// below (the MNIST column of the usual STBP setup).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Initial spike threshold of every neuron, mV.
    #[serde(default = "d_threshold")]
    pub initial_threshold: f64,
    /// Optional initial threshold per spiking layer, overriding the above.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_thresholds: Option<Vec<f64>>,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_window", alias = "T")]
    pub time_window: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_eta0")]
    pub eta0: f64,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    /// Rate used by bare `DP` tokens in network strings.
    #[serde(default = "d_dropout")]
    pub dropout_p: f64,
    #[serde(default = "d_mode")]
    pub mode: LearningMode,
    #[serde(default)]
    pub surrogate: SurrogateSpec,
    #[serde(default)]
    pub seed: u64,
    /// Keys the input encoding at evaluation time. Shared by ensemble
    /// members so they all see the same spike trains.
    #[serde(default)]
    pub eval_seed: u64,
    #[serde(default = "d_beta1")]
    pub beta1: f64,
    #[serde(default = "d_beta2")]
    pub beta2: f64,
    #[serde(default = "d_eps")]
    pub adam_eps: f64,
    #[serde(default = "d_gain")]
    pub weight_init_gain: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial_threshold", self.initial_threshold),
            ("tau", self.tau),
            ("dt", self.dt),
            ("eta0", self.eta0),
            ("gamma", self.gamma),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("adam_eps", self.adam_eps),
            ("weight_init_gain", self.weight_init_gain),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.gamma > 1.0 {
            return Err(Error::Config(format!("gamma must be at most 1, got {}", self.gamma)));
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(Error::Config("Adam betas must be below 1".into()));
        }
        if self.time_window == 0 || self.batch_size == 0 {
            return Err(Error::Config("time_window and batch_size must be at least 1".into()));
        }
        crate::layers::check_rate(self.dropout_p)?;
        self.surrogate.validate()?;
        LifConstants::new(self.tau, self.dt)?;
        Ok(())
    }

    pub fn lif(&self) -> Result<LifConstants> {
        LifConstants::new(self.tau, self.dt)
    }

    pub fn init_spec(&self) -> InitSpec {
        InitSpec {
            seed: self.seed,
            initial_threshold: self.initial_threshold,
            layer_thresholds: self.layer_thresholds.clone(),
            weight_gain: self.weight_init_gain,
        }
    }
}

/// `eta0 * gamma^epoch`.
pub fn lr_schedule(eta0: f64, gamma: f64, epoch: usize) -> f64 {
    eta0 * gamma.powi(epoch as i32)
}

/// Adam moments for every learnable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: GradientSet,
    pub v: GradientSet,
}

impl OptimizerState {
    pub fn new(net: &Network) -> Self {
        Self {
            step: 0,
            m: GradientSet::zeros_like(net),
            v: GradientSet::zeros_like(net),
        }
    }

    /// One bias-corrected Adam step. Tensors the mode freezes are left alone,
    /// moments included, so they stay bit-identical.
    pub fn apply(
        &mut self,
        net: &mut Network,
        g: &GradientSet,
        lr: f64,
        mode: LearningMode,
        cfg: &TrainConfig,
    ) -> Result<()> {
        let slots = net.param_slots();
        if g.layers.len() != net.stages.len() || self.m.layers.len() != net.stages.len() {
            return Err(Error::Shape("gradients do not match the network".into()));
        }
        for &slot in &slots {
            let n = net.param(slot).len();
            if g.get(slot).len() != n || self.m.get(slot).len() != n || self.v.get(slot).len() != n {
                return Err(Error::Shape(format!(
                    "{} of stage {} has mismatched size",
                    slot.kind.name(),
                    slot.stage
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
        for slot in slots {
            if !mode.learns(slot.kind) {
                continue;
            }
            let grad = g.get(slot);
            let m = self.m.get_mut(slot);
            let v = self.v.get_mut(slot);
            let p = net.param_mut(slot);
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.adam_eps);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub top1: f64,
    pub afr: f64,
    pub lr: f64,
    pub seed: u64,
    pub mode: LearningMode,
}

/// Checks that `data` fits `net`: same sample shape, labels inside the voting classes.
pub fn check_dataset(net: &Network, data: &Dataset) -> Result<Voting> {
    let v = net.voting();
    if data.is_empty() {
        return Err(Error::EmptyInput("dataset has no samples".into()));
    }
    if data.shape != net.input_shape {
        return Err(Error::Shape(format!(
            "dataset samples are {}, network expects {}",
            data.shape, net.input_shape
        )));
    }
    if let Some(&l) = data.labels.iter().find(|&&l| l >= v.classes) {
        return Err(Error::Range(format!(
            "label {l} outside the {} voting classes",
            v.classes
        )));
    }
    Ok(v)
}

/// Sample order for one epoch.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Order, &[epoch as u64]));
    order
}

/// One pass over `data` in minibatches. `epoch` is zero-based and keys the
/// sample order, encoder and dropout draws.
pub fn train_epoch(
    net: &mut Network,
    data: &Dataset,
    cfg: &TrainConfig,
    opt: &mut OptimizerState,
    epoch: usize,
) -> Result<MetricsRecord> {
    let v = check_dataset(net, data)?;
    let lr = lr_schedule(cfg.eta0, cfg.gamma, epoch);
    let t_steps = cfg.time_window;
    let e = epoch as u64;
    let (mut loss_sum, mut correct, mut spikes) = (0.0, 0usize, 0.0);
    for (bi, idx) in epoch_order(data.len(), cfg.seed, epoch)
        .chunks(cfg.batch_size)
        .enumerate()
    {
        let mut step = || -> Result<(f64, usize, f64)> {
            let input = data.batch(idx, t_steps, |i| derive(cfg.seed, Stream::Encoder, &[e, i as u64]))?;
            let dropout_seed = derive(cfg.seed, Stream::Dropout, &[e, bi as u64]);
            let cache = net.forward(input, Phase::Train, Dynamics::Hard, dropout_seed)?;
            let rates = voting_readout(cache.output(), v)?;
            let labels: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
            let y = one_hot(&labels, v.classes);
            let loss = mse_loss(&rates, &y)?;
            let spec = LossSpec {
                batch: idx.len(),
                classes: v.classes,
                population: v.population,
                time_steps: t_steps,
            };
            let seed = loss_grad_output(&rates, &y, spec)?;
            let grads = apply_mode_mask(backward(net, &cache, &seed, &cfg.surrogate)?, cfg.mode);
            opt.apply(net, &grads, lr, cfg.mode, cfg)?;
            net.commit_batch_stats(&cache);
            let correct = rates
                .iter()
                .zip(&labels)
                .filter(|(r, &l)| predict_class(r) == l)
                .count();
            Ok((loss, correct, cache.spike_counts_per_sample(net).iter().sum()))
        };
        let (l, c, s) = step().map_err(|err| Error::InBatch {
            batch: bi,
            source: Box::new(err),
        })?;
        loss_sum += l * idx.len() as f64;
        correct += c;
        spikes += s;
    }
    let n = data.len() as f64;
    Ok(MetricsRecord {
        epoch: epoch + 1,
        split: Split::Train,
        loss: loss_sum / n,
        top1: correct as f64 / n,
        afr: spikes / (net.spiking_units() * t_steps) as f64 / n,
        lr,
        seed: cfg.seed,
        mode: cfg.mode,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub top1: f64,
    /// Spikes of all spiking layers over `units * T`, averaged over samples.
    pub afr: f64,
    pub loss: f64,
    /// Raw voting-layer spike counts `[sample][class]`.
    pub class_counts: Vec<Vec<f64>>,
    /// Total spikes per sample across every spiking layer.
    pub spikes: Vec<f64>,
}

/// Eval-mode pass over `data` (no dropout, running batch-norm statistics).
/// Input encoding is keyed by `cfg.eval_seed` and the sample index only.
pub fn evaluate(net: &Network, data: &Dataset, cfg: &TrainConfig) -> Result<Evaluation> {
    let v = check_dataset(net, data)?;
    let t_steps = cfg.time_window;
    let mut counts = Vec::with_capacity(data.len());
    let mut spikes = Vec::with_capacity(data.len());
    let all: Vec<usize> = (0..data.len()).collect();
    for idx in all.chunks(cfg.batch_size.max(1)) {
        let input = data.batch(idx, t_steps, |i| {
            derive(cfg.eval_seed, Stream::EvalEncoder, &[i as u64])
        })?;
        let cache = net.forward(input, Phase::Eval, Dynamics::Hard, 0)?;
        counts.extend(class_counts(cache.output(), v)?);
        spikes.extend(cache.spike_counts_per_sample(net));
    }
    let n = data.len() as f64;
    let norm = (t_steps * v.population) as f64;
    let rates: Vec<Vec<f64>> = counts.iter().map(|r| r.iter().map(|c| c / norm).collect()).collect();
    let loss = mse_loss(&rates, &one_hot(&data.labels, v.classes))?;
    let correct = counts
        .iter()
        .zip(&data.labels)
        .filter(|(c, &l)| predict_class(c) == l)
        .count();
    Ok(Evaluation {
        top1: correct as f64 / n,
        afr: spikes.iter().sum::<f64>() / (net.spiking_units() * t_steps) as f64 / n,
        loss,
        class_counts: counts,
        spikes,
    })
}

pub fn test_record(eval: &Evaluation, epoch: usize, lr: f64, cfg: &TrainConfig) -> MetricsRecord {
    MetricsRecord {
        epoch,
        split: Split::Test,
        loss: eval.loss,
        top1: eval.top1,
        afr: eval.afr,
        lr,
        seed: cfg.seed,
        mode: cfg.mode,
    }
}

/// Trains epochs `start_epoch..cfg.epochs`, evaluating on `test` after each.
/// `on_epoch` sees the state after every epoch (for checkpointing).
pub fn fit(
    net: &mut Network,
    opt: &mut OptimizerState,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
    start_epoch: usize,
    mut on_epoch: impl FnMut(usize, &Network, &OptimizerState, &[MetricsRecord]) -> Result<()>,
) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    let mut records = Vec::new();
    for epoch in start_epoch..cfg.epochs {
        let tr = train_epoch(net, train, cfg, opt, epoch)?;
        let ev = evaluate(net, test, cfg)?;
        let te = test_record(&ev, tr.epoch, tr.lr, cfg);
        records.push(tr);
        records.push(te);
        on_epoch(epoch + 1, net, opt, &records[records.len() - 2..])?;
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

pub const HISTOGRAM_BINS: usize = 50;

impl Histogram {
    /// Equal-width bins over `[min, max]`; the top edge is closed.
    pub fn of(values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0; bins];
        for &x in values {
            let b = if hi > lo {
                (((x - lo) / (hi - lo)) * bins as f64).floor() as usize
            } else {
                0
            };
            counts[b.min(bins - 1)] += 1;
        }
        Self { lo, hi, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSnapshot {
    pub stage: usize,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub histogram: Histogram,
}

/// Up to `count` distinct threshold indices per spiking layer, drawn once so
/// the same units can be followed across epochs.
pub fn sample_threshold_units(net: &Network, count: usize, seed: u64) -> Vec<Vec<usize>> {
    net.spiking_layers()
        .map(|(stage, l)| {
            let n = l.thresholds.len();
            let mut rng = stream_rng(seed, Stream::Sampling, &[stage as u64]);
            let mut idx: Vec<usize> = rand::seq::index::sample(&mut rng, n, count.min(n)).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect()
}

/// Current thresholds of the sampled units plus whole-layer statistics.
pub fn track_thresholds(net: &Network, samples: &[Vec<usize>]) -> Result<Vec<ThresholdSnapshot>> {
    let layers: Vec<_> = net.spiking_layers().collect();
    if samples.len() != layers.len() {
        return Err(Error::Range(format!(
            "{} index lists for {} spiking layers",
            samples.len(),
            layers.len()
        )));
    }
    layers
        .into_iter()
        .zip(samples)
        .map(|((stage, l), idx)| {
            let th = &l.thresholds;
            let values = idx
                .iter()
                .map(|&i| {
                    th.get(i).copied().ok_or_else(|| {
                        Error::Range(format!("unit {i} outside stage {stage} with {} thresholds", th.len()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let n = th.len() as f64;
            let mean = th.iter().sum::<f64>() / n;
            let std = (th.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
            Ok(ThresholdSnapshot {
                stage,
                indices: idx.clone(),
                values,
                mean,
                std,
                histogram: Histogram::of(th, HISTOGRAM_BINS),
            })
        })
        .collect()
}

/// Permutes each layer's thresholds with a seeded uniform permutation.
pub fn shuffle_thresholds(net: &Network, seed: u64) -> Network {
    let mut out = net.clone();
    for (k, stage) in out.stages.iter_mut().enumerate() {
        if let Stage::Spiking(l) = stage {
            l.thresholds
                .shuffle(&mut stream_rng(seed, Stream::Shuffle, &[k as u64]));
        }
    }
    out
}

/// A freshly initialized network (weights from `init`) carrying the shuffled
/// thresholds of `trained`: the starting point of a Hete-SNN run.
pub fn hete_init(trained: &Network, init: &InitSpec, shuffle_seed: u64) -> Result<Network> {
    let mut fresh = Network::build(&trained.specs, trained.input_shape, trained.lif, init)?;
    let shuffled = shuffle_thresholds(trained, shuffle_seed);
    for (dst, src) in fresh.stages.iter_mut().zip(&shuffled.stages) {
        if let (Stage::Spiking(d), Stage::Spiking(s)) = (dst, src) {
            d.thresholds.clone_from(&s.thresholds);
        }
    }
    Ok(fresh)
}

fn check_ensemble(nets: &[Network]) -> Result<Voting> {
    let first = nets
        .first()
        .ok_or_else(|| Error::EmptyInput("ensemble has no networks".into()))?;
    let v = first.voting();
    if nets.iter().any(|n| n.voting() != v) {
        return Err(Error::Consistency(
            "ensemble members disagree on classes or population".into(),
        ));
    }
    Ok(v)
}

/// Sums raw per-class spike counts of all members on one input window
/// `[T][1][features]` and returns the winning class.
pub fn jdf_predict(nets: &[Network], input: &crate::tensor::Activations) -> Result<usize> {
    let v = check_ensemble(nets)?;
    let mut total = vec![0.0; v.classes];
    for net in nets {
        let cache = net.forward(input.clone(), Phase::Eval, Dynamics::Hard, 0)?;
        for (acc, c) in total.iter_mut().zip(&class_counts(cache.output(), v)?[0]) {
            *acc += c;
        }
    }
    Ok(predict_class(&total))
}

/// Decides from already-collected per-member counts `[member][sample][class]`.
pub fn jdf_combine(member_counts: &[Vec<Vec<f64>>]) -> Result<Vec<usize>> {
    let first = member_counts
        .first()
        .ok_or_else(|| Error::EmptyInput("ensemble has no members".into()))?;
    if member_counts
        .iter()
        .any(|m| m.len() != first.len() || m.iter().zip(first).any(|(a, b)| a.len() != b.len()))
    {
        return Err(Error::Consistency("member count tables differ in shape".into()));
    }
    Ok((0..first.len())
        .map(|s| {
            let summed: Vec<f64> = (0..first[s].len())
                .map(|c| member_counts.iter().map(|m| m[s][c]).sum())
                .collect();
            predict_class(&summed)
        })
        .collect())
}

/// Ensemble accuracy on `data`; every member sees the same evaluation encoding.
pub fn jdf_evaluate(nets: &[Network], data: &Dataset, cfg: &TrainConfig) -> Result<f64> {
    check_ensemble(nets)?;
    let counts = nets
        .iter()
        .map(|n| evaluate(n, data, cfg).map(|e| e.class_counts))
        .collect::<Result<Vec<_>>>()?;
    let pred = jdf_combine(&counts)?;
    let correct = pred.iter().zip(&data.labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_images, Encoding};
    use crate::layers::parse_network;
    use crate::net::ParamKind;
    use crate::tensor::Shape;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!(
            (
                c.initial_threshold,
                c.tau,
                c.dt,
                c.eta0,
                c.gamma,
                c.dropout_p,
                c.batch_size
            ),
            (2.0, 2.0, 1.0, 0.001, 0.93, 0.5, 50)
        );
        assert_eq!(c.mode, LearningMode::Stl);
        c.validate().unwrap();
        let t: TrainConfig = toml::from_str("T = 8").unwrap();
        assert_eq!(t.time_window, 8);
        assert!(toml::from_str::<TrainConfig>("bogus = 1").is_err());
    }

    #[test]
    fn schedule() {
        assert_eq!(lr_schedule(0.001, 0.93, 0), 0.001);
        assert!((lr_schedule(0.001, 0.93, 2) - 0.000_864_9).abs() < 1e-10);
        assert!((0..20).all(|e| lr_schedule(0.01, 1.0, e) == 0.01));
        assert!((0..20).all(|e| lr_schedule(0.01, 0.9, e + 1) < lr_schedule(0.01, 0.9, e)));
    }

    fn tiny() -> Network {
        let specs = parse_network("FC1-VotingC1P1", 0.5).unwrap();
        Network::build(&specs, Shape::flat(1), LifConstants::default(), &InitSpec::default()).unwrap()
    }

    #[test]
    fn adam_first_step_and_zero_gradients() {
        let cfg = TrainConfig::default();
        let mut net = tiny();
        let before = net.clone();
        let mut opt = OptimizerState::new(&net);
        let zero = GradientSet::zeros_like(&net);
        opt.apply(&mut net, &zero, 0.1, LearningMode::Stl, &cfg).unwrap();
        opt.apply(&mut net, &zero, 0.1, LearningMode::Stl, &cfg).unwrap();
        assert_eq!(opt.step, 2);
        assert_eq!(net, before);

        let mut opt = OptimizerState::new(&net);
        let mut g = GradientSet::zeros_like(&net);
        let slot = net.param_slots()[0];
        g.get_mut(slot)[0] = 1.0;
        opt.apply(&mut net, &g, 0.1, LearningMode::Stl, &cfg).unwrap();
        let delta = before.param(slot)[0] - net.param(slot)[0];
        assert!((delta - 0.1 / (1.0 + 1e-8)).abs() < 1e-12, "{delta}");
    }

    #[test]
    fn adam_skips_frozen_tensors() {
        let cfg = TrainConfig::default();
        let mut net = tiny();
        let before = net.clone();
        let mut opt = OptimizerState::new(&net);
        let mut g = GradientSet::zeros_like(&net);
        for s in net.param_slots() {
            g.get_mut(s).iter_mut().for_each(|v| *v = 0.5);
        }
        opt.apply(&mut net, &g, 0.1, LearningMode::Sl, &cfg).unwrap();
        for s in net.param_slots() {
            let same = net.param(s) == before.param(s);
            assert_eq!(same, s.kind == ParamKind::Thresholds, "{:?}", s);
        }
    }

    fn toy(n: usize, seed: u64) -> Dataset {
        Dataset::from_images(
            synthetic_images(n, 2, Shape::new(1, 4, 4), seed).unwrap(),
            Encoding::Bernoulli,
        )
    }

    fn toy_net(seed: u64) -> Network {
        let specs = parse_network("FC16-DP-VotingC2P4", 0.5).unwrap();
        let init = InitSpec {
            seed,
            ..InitSpec::default()
        };
        Network::build(&specs, Shape::new(1, 4, 4), LifConstants::default(), &init).unwrap()
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let cfg = TrainConfig {
            eta0: 1e-300,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let data = toy(32, 1);
        let mut net = toy_net(1);
        let before = net.clone();
        let mut opt = OptimizerState::new(&net);
        train_epoch(&mut net, &data, &cfg, &mut opt, 0).unwrap();
        for s in net.param_slots() {
            assert_eq!(net.param(s), before.param(s));
        }
    }

    #[test]
    fn silent_network_evaluation() {
        let mut net = toy_net(2);
        for l in net.spiking_layers_mut() {
            l.thresholds.iter_mut().for_each(|t| *t = 1e9);
        }
        let data = toy(10, 3);
        let ev = evaluate(&net, &data, &TrainConfig::default()).unwrap();
        assert_eq!(ev.afr, 0.0);
        assert_eq!(ev.top1, 0.5);
    }

    #[test]
    fn thresholds_tracking_and_shuffle() {
        let net = toy_net(4);
        let samples = sample_threshold_units(&net, 100, 1);
        let snaps = track_thresholds(&net, &samples).unwrap();
        for (s, (_, l)) in snaps.iter().zip(net.spiking_layers()) {
            assert!(s.values.iter().all(|&v| v == 2.0));
            assert_eq!(s.std, 0.0);
            assert_eq!(s.histogram.counts.iter().sum::<usize>(), l.thresholds.len());
        }
        assert!(track_thresholds(&net, &[vec![999], vec![]]).is_err());
        assert_eq!(shuffle_thresholds(&net, 3), net);

        let mut varied = net.clone();
        for l in varied.spiking_layers_mut() {
            for (i, t) in l.thresholds.iter_mut().enumerate() {
                *t = i as f64;
            }
        }
        let a = shuffle_thresholds(&varied, 9);
        assert_eq!(a, shuffle_thresholds(&varied, 9));
        assert_ne!(a, varied);
        for ((_, x), (_, y)) in a.spiking_layers().zip(varied.spiking_layers()) {
            let mut s = x.thresholds.clone();
            s.sort_by(f64::total_cmp);
            assert_eq!(s, y.thresholds);
            assert_eq!(x.synapse, y.synapse);
        }
    }

    #[test]
    fn jdf_tie_goes_low() {
        let counts = vec![vec![vec![5.0, 3.0]], vec![vec![2.0, 4.0]]];
        assert_eq!(jdf_combine(&counts).unwrap(), vec![0]);
        assert!(jdf_combine(&[]).is_err());
    }
}
