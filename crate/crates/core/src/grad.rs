//! Spatio-temporal backpropagation for weights and thresholds.
//!
//! For each spiking layer, walking time backwards:
//!
//! ```text
//! dL/du[t]   = dL/do[t] * s'(u[t] - v_th) + dL/du[t+1] * alpha[t+1]
//! dL/dW     += sum_t dL/du[t] * o_in[t]^T          (du/dx = 1)
//! dL/dv_th  += sum_t dL/do[t] * (-s'(u[t] - v_th))
//! ```
//!
//! `dL/do[t]` arrives from the layer above (the spatial path). `alpha[t+1]`
//! is read from the cached spikes and treated as a constant: no gradient flows
//! through the reset itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{
    voting_readout, Dynamics, ForwardCache, Network, ParamKind, ParamSlot, Phase, Stage, StageCache, Synapse,
};
use crate::neuron::SurrogateSpec;
use crate::par;
use crate::tensor::Activations;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearningMode {
    /// Synaptic learning only; thresholds frozen.
    Sl,
    /// Threshold learning only; weights (and batch-norm affine) frozen.
    Tl,
    /// Weights and thresholds learned together.
    Stl,
}

impl LearningMode {
    pub fn learns(&self, kind: ParamKind) -> bool {
        match (self, kind) {
            (LearningMode::Stl, _) => true,
            (LearningMode::Sl, k) => k != ParamKind::Thresholds,
            (LearningMode::Tl, k) => k == ParamKind::Thresholds,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LearningMode::Sl => "sl",
            LearningMode::Tl => "tl",
            LearningMode::Stl => "stl",
        }
    }
}

impl std::str::FromStr for LearningMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sl" => Ok(LearningMode::Sl),
            "tl" => Ok(LearningMode::Tl),
            "stl" => Ok(LearningMode::Stl),
            _ => Err(Error::Config(format!(
                "unknown learning mode `{s}` (expected sl, tl or stl)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub bn_gamma: Vec<f64>,
    pub bn_beta: Vec<f64>,
}

impl LayerGrads {
    fn get(&self, kind: ParamKind) -> &[f64] {
        match kind {
            ParamKind::Weights => &self.weights,
            ParamKind::Thresholds => &self.thresholds,
            ParamKind::BnGamma => &self.bn_gamma,
            ParamKind::BnBeta => &self.bn_beta,
        }
    }

    fn get_mut(&mut self, kind: ParamKind) -> &mut Vec<f64> {
        match kind {
            ParamKind::Weights => &mut self.weights,
            ParamKind::Thresholds => &mut self.thresholds,
            ParamKind::BnGamma => &mut self.bn_gamma,
            ParamKind::BnBeta => &mut self.bn_beta,
        }
    }
}

/// Gradients aligned with a network's stages; `None` for parameter-free stages.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<Option<LayerGrads>>,
}

impl GradientSet {
    pub fn zeros_like(net: &Network) -> Self {
        let layers = net
            .stages
            .iter()
            .map(|s| match s {
                Stage::Spiking(l) => Some(LayerGrads {
                    weights: vec![0.0; l.synapse.weights().len()],
                    thresholds: vec![0.0; l.thresholds.len()],
                    bn_gamma: vec![0.0; l.bn.as_ref().map_or(0, |b| b.channels())],
                    bn_beta: vec![0.0; l.bn.as_ref().map_or(0, |b| b.channels())],
                }),
                _ => None,
            })
            .collect();
        Self { layers }
    }

    pub fn get(&self, slot: ParamSlot) -> &[f64] {
        self.layers[slot.stage]
            .as_ref()
            .map(|g| g.get(slot.kind))
            .unwrap_or(&[])
    }

    pub fn get_mut(&mut self, slot: ParamSlot) -> &mut Vec<f64> {
        self.layers[slot.stage]
            .as_mut()
            .expect("slot refers to a spiking stage")
            .get_mut(slot.kind)
    }

    fn tensors_mut(&mut self) -> impl Iterator<Item = (ParamKind, &mut Vec<f64>)> {
        self.layers.iter_mut().flatten().flat_map(|g| {
            [
                (ParamKind::Weights, &mut g.weights),
                (ParamKind::Thresholds, &mut g.thresholds),
                (ParamKind::BnGamma, &mut g.bn_gamma),
                (ParamKind::BnBeta, &mut g.bn_beta),
            ]
        })
    }

    pub fn scale(mut self, a: f64) -> Self {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= a);
        }
        self
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flatten()
            .flat_map(|g| {
                g.weights
                    .iter()
                    .chain(&g.thresholds)
                    .chain(&g.bn_gamma)
                    .chain(&g.bn_beta)
            })
            .copied()
    }

    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Loss normalization: batch size `S`, classes `C`, population `P`, window `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossSpec {
    pub batch: usize,
    pub classes: usize,
    pub population: usize,
    pub time_steps: usize,
}

pub fn one_hot(labels: &[usize], classes: usize) -> Vec<Vec<f64>> {
    labels
        .iter()
        .map(|&l| (0..classes).map(|c| if c == l { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn check_rates(p: &[Vec<f64>], y: &[Vec<f64>]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::EmptyInput("no rate vectors".into()));
    }
    if p.len() != y.len() || p.iter().zip(y).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::Shape(format!(
            "rates ({} x {}) and labels ({} x {}) disagree",
            p.len(),
            p[0].len(),
            y.len(),
            y.first().map_or(0, |r| r.len())
        )));
    }
    Ok(())
}

/// `L = 1/(2S) * sum_s sum_c (y_cs - p_cs)^2`.
pub fn mse_loss(p: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    check_rates(p, y)?;
    let s = p.len() as f64;
    let sum: f64 = p
        .iter()
        .zip(y)
        .flat_map(|(pr, yr)| pr.iter().zip(yr).map(|(a, b)| (b - a) * (b - a)))
        .sum();
    Ok(sum / (2.0 * s))
}

/// Gradient of the loss with respect to every output spike: for unit `i` of
/// class `c` in sample `s`, `-(y_cs - p_cs) / (S * T * P)` at every step.
pub fn loss_grad_output(p: &[Vec<f64>], y: &[Vec<f64>], spec: LossSpec) -> Result<Activations> {
    check_rates(p, y)?;
    let LossSpec {
        batch,
        classes,
        population,
        time_steps,
    } = spec;
    if p.len() != batch || p[0].len() != classes {
        return Err(Error::Shape("rates do not match the loss spec".into()));
    }
    let norm = (batch * time_steps * population) as f64;
    let width = classes * population;
    let mut g = Activations::zeros(time_steps, batch, crate::tensor::Shape::flat(width));
    for t in 0..time_steps {
        for b in 0..batch {
            let row = g.row_mut(t, b);
            for c in 0..classes {
                let v = -(y[b][c] - p[b][c]) / norm;
                row[c * population..(c + 1) * population].fill(v);
            }
        }
    }
    Ok(g)
}

fn ensure_finite(v: &[f64], stage: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric {
            what: "gradient",
            stage,
            timestep: 0,
        })
    }
}

/// Backpropagates `seed` (the gradient at the output spikes) through a cached
/// forward pass.
///
/// In hard mode `surrogate` supplies the spike derivative. In soft mode the
/// surrogate recorded in the cache is used, which makes the result the exact
/// gradient of the soft forward pass.
pub fn backward(
    net: &Network,
    cache: &ForwardCache,
    seed: &Activations,
    surrogate: &SurrogateSpec,
) -> Result<GradientSet> {
    if cache.stages.len() != net.stages.len() || cache.acts.len() != net.stages.len() + 1 {
        return Err(Error::Consistency(
            "forward cache was produced by a different network".into(),
        ));
    }
    let out = cache.output();
    if seed.time_steps != out.time_steps || seed.batch != out.batch || seed.shape != out.shape {
        return Err(Error::Consistency(format!(
            "seed gradient is {}x{}x{}, output is {}x{}x{}",
            seed.time_steps, seed.batch, seed.shape, out.time_steps, out.batch, out.shape
        )));
    }
    let sur = match cache.dynamics {
        Dynamics::Soft(s) => s,
        Dynamics::Hard => *surrogate,
    };
    let soft = matches!(cache.dynamics, Dynamics::Soft(_));
    let leak = net.lif.leak();
    let (t_steps, batch) = (cache.time_steps, cache.batch);
    let mut grads = GradientSet::zeros_like(net);
    let mut grad = seed.data.clone();

    for k in (0..net.stages.len()).rev() {
        let input = &cache.acts[k];
        let need_input_grad = k > 0;
        let mismatch = || Error::Consistency(format!("stage {k} does not match its cached state"));
        grad = match (&net.stages[k], &cache.stages[k]) {
            (Stage::Spiking(layer), StageCache::Spiking { u, bn, .. }) => {
                let spikes = &cache.acts[k + 1].data;
                let nout = layer.out_shape.numel();
                let sp = layer.out_shape.spatial();
                if u.len() != grad.len() || spikes.len() != grad.len() {
                    return Err(mismatch());
                }
                // dL/do * s'(u - v_th); its channel sums give -dL/dv_th
                let mut du = grad;
                par::for_each_row(&mut du, nout, |r, row| {
                    for (j, g) in row.iter_mut().enumerate() {
                        *g *= sur.grad(u[r * nout + j], layer.thresholds[j / sp]);
                    }
                });
                let lg = grads.layers[k].as_mut().expect("spiking stage grads");
                let per_channel = par::map_indices(layer.thresholds.len(), |c| {
                    let mut acc = 0.0;
                    for r in 0..t_steps * batch {
                        let off = r * nout + c * sp;
                        acc += du[off..off + sp].iter().sum::<f64>();
                    }
                    acc
                });
                for (d, v) in lg.thresholds.iter_mut().zip(per_channel) {
                    *d -= v;
                }
                // temporal path: du[t] += alpha[t+1] * du[t+1]
                let block = batch * nout;
                for t in (0..t_steps.saturating_sub(1)).rev() {
                    let (head, tail) = du.split_at_mut((t + 1) * block);
                    let next = &tail[..block];
                    let cur = &mut head[t * block..];
                    let o_t = &spikes[t * block..(t + 1) * block];
                    par::for_each_row(cur, nout, |b, row| {
                        for (j, g) in row.iter_mut().enumerate() {
                            let e = b * nout + j;
                            let alpha = if soft || o_t[e] == 0.0 { leak } else { 0.0 };
                            *g += alpha * next[e];
                        }
                    });
                }
                let dx = match (&layer.bn, bn) {
                    (Some(norm), Some(bc)) => {
                        let (dg, db) = (&mut lg.bn_gamma, &mut lg.bn_beta);
                        norm.backward(bc, &du, layer.out_shape, dg, db)
                    }
                    (None, None) => du,
                    _ => return Err(mismatch()),
                };
                let mut grad_in = if need_input_grad {
                    vec![0.0; input.data.len()]
                } else {
                    Vec::new()
                };
                match &layer.synapse {
                    Synapse::Identity => {
                        if need_input_grad {
                            grad_in = dx;
                        }
                    }
                    Synapse::Dense(d) => d.backward_rows(
                        &input.data,
                        &dx,
                        &mut lg.weights,
                        need_input_grad.then_some(&mut grad_in[..]),
                    ),
                    Synapse::Conv(c) => c.backward_rows(
                        &input.data,
                        &dx,
                        &mut lg.weights,
                        need_input_grad.then_some(&mut grad_in[..]),
                    ),
                }
                ensure_finite(&lg.weights, k)?;
                ensure_finite(&lg.thresholds, k)?;
                grad_in
            }
            (Stage::MaxPool(pool), StageCache::MaxPool { argmax }) => {
                if !need_input_grad {
                    break;
                }
                let mut grad_in = vec![0.0; input.data.len()];
                pool.backward_rows(argmax, &grad, &mut grad_in);
                grad_in
            }
            (Stage::Dropout { width, .. }, StageCache::Dropout { masks }) => {
                if let Some(masks) = masks {
                    par::for_each_row(&mut grad, *width, |r, row| {
                        for (g, m) in row.iter_mut().zip(&masks[r % batch]) {
                            *g *= m;
                        }
                    });
                }
                grad
            }
            _ => return Err(mismatch()),
        };
        ensure_finite(&grad, k)?;
    }
    Ok(grads)
}

/// Zeroes the gradients a learning mode freezes.
pub fn apply_mode_mask(mut g: GradientSet, mode: LearningMode) -> GradientSet {
    for (kind, t) in g.tensors_mut() {
        if !mode.learns(kind) {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    g
}

/// Runs the smooth oracle network: every spike becomes the surrogate value
/// and the membrane leaks at a constant rate. Batch norm uses running
/// statistics and dropout is off.
pub fn soft_forward(net: &Network, input: Activations, s: &SurrogateSpec) -> Result<(Vec<Vec<f64>>, ForwardCache)> {
    let cache = net.forward(input, Phase::Eval, Dynamics::Soft(*s), 0)?;
    let rates = voting_readout(cache.output(), net.voting())?;
    Ok((rates, cache))
}

fn soft_loss(net: &Network, input: &Activations, y: &[Vec<f64>], s: &SurrogateSpec) -> Result<f64> {
    let (rates, _) = soft_forward(net, input.clone(), s)?;
    let l = mse_loss(&rates, y)?;
    if l.is_finite() {
        Ok(l)
    } else {
        Err(Error::NonFinite("soft loss".into()))
    }
}

/// Analytic soft-mode gradient of the loss for one labelled batch.
pub fn soft_gradients(net: &Network, input: &Activations, labels: &[usize], s: &SurrogateSpec) -> Result<GradientSet> {
    let v = net.voting();
    let y = one_hot(labels, v.classes);
    let (rates, cache) = soft_forward(net, input.clone(), s)?;
    let spec = LossSpec {
        batch: input.batch,
        classes: v.classes,
        population: v.population,
        time_steps: input.time_steps,
    };
    let seed = loss_grad_output(&rates, &y, spec)?;
    backward(net, &cache, &seed, s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

/// Finite-difference stencil used by [`grad_check_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// `(L(p+h) - L(p-h)) / 2h`, error `O(h^2)`.
    ThreePoint,
    /// `(8(L(p+h) - L(p-h)) - (L(p+2h) - L(p-2h))) / 12h`, error `O(h^4)`.
    FivePoint,
    /// Ridders' extrapolation of three-point differences over steps
    /// shrinking from `h`, keeping the estimate with the smallest error.
    Ridders,
}

/// Starting step for [`grad_check`].
pub const DEFAULT_FD_STEP: f64 = 1e-2;

const RIDDERS_SHRINK: f64 = 1.4;
const RIDDERS_TABLE: usize = 10;
const RIDDERS_SAFE: f64 = 2.0;

/// Ridders' method on the three-point difference `d(h)`.
fn ridders(h0: f64, mut d: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let c2 = RIDDERS_SHRINK * RIDDERS_SHRINK;
    let mut h = h0;
    let mut prev = vec![d(h)?];
    let mut best = prev[0];
    let mut err = f64::INFINITY;
    for _ in 1..RIDDERS_TABLE {
        h /= RIDDERS_SHRINK;
        let mut row = vec![d(h)?];
        let mut fac = c2;
        for j in 1..=prev.len() {
            let next = (row[j - 1] * fac - prev[j - 1]) / (fac - 1.0);
            fac *= c2;
            let e = (next - row[j - 1]).abs().max((next - prev[j - 1]).abs());
            if e <= err {
                err = e;
                best = next;
            }
            row.push(next);
        }
        let diverging = (row[row.len() - 1] - prev[prev.len() - 1]).abs() >= RIDDERS_SAFE * err;
        prev = row;
        if diverging {
            break;
        }
    }
    Ok(best)
}

/// Compares soft-mode analytic gradients with central finite differences
/// for every weight, threshold and batch-norm affine entry, using Ridders'
/// extrapolation from a starting step `epsilon`. The error per entry is
/// `|g - g_fd| / max(|g_fd|, 1e-8)`.
pub fn grad_check(
    net: &Network,
    input: &Activations,
    labels: &[usize],
    s: &SurrogateSpec,
    epsilon: f64,
) -> Result<GradCheckReport> {
    grad_check_with(net, input, labels, s, epsilon, Stencil::Ridders)
}

pub fn grad_check_with(
    net: &Network,
    input: &Activations,
    labels: &[usize],
    s: &SurrogateSpec,
    epsilon: f64,
    stencil: Stencil,
) -> Result<GradCheckReport> {
    if !(1e-6..=0.1).contains(&epsilon) {
        return Err(Error::Config(format!(
            "finite-difference step {epsilon} outside [1e-6, 0.1]"
        )));
    }
    if input.batch != labels.len() {
        return Err(Error::Shape(format!(
            "{} labels for a batch of {}",
            labels.len(),
            input.batch
        )));
    }
    let y = one_hot(labels, net.voting().classes);
    let analytic = soft_gradients(net, input, labels, s)?;
    soft_loss(net, input, &y, s)?;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
    };
    for slot in net.param_slots() {
        let an = analytic.get(slot);
        // Entries are independent, so each gets its own perturbed copy.
        let errors = par::map_indices(an.len(), |i| -> Result<(f64, f64)> {
            let mut probe = net.clone();
            let orig = probe.param(slot)[i];
            let mut at = |k: f64| -> Result<f64> {
                probe.param_mut(slot)[i] = orig + k * epsilon;
                soft_loss(&probe, input, &y, s)
            };
            let fd = match stencil {
                Stencil::ThreePoint => (at(1.0)? - at(-1.0)?) / (2.0 * epsilon),
                Stencil::FivePoint => (8.0 * (at(1.0)? - at(-1.0)?) - (at(2.0)? - at(-2.0)?)) / (12.0 * epsilon),
                Stencil::Ridders => ridders(1.0, |k| Ok((at(k)? - at(-k)?) / (2.0 * k * epsilon)))?,
            };
            let abs = (an[i] - fd).abs();
            Ok((abs, abs / fd.abs().max(1e-8)))
        });
        for e in errors {
            let (abs, rel) = e?;
            report.max_abs_error = report.max_abs_error.max(abs);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.checked += 1;
        }
    }
    Ok(report)
}

/// Limits for [`random_check_case`].
pub const CHECK_MAX_LAYERS: usize = 3;
pub const CHECK_MAX_UNITS: usize = 64;
pub const CHECK_MAX_STEPS: usize = 8;

/// One seeded random soft-mode problem: a dense network of at most three
/// spiking layers (the last one voting), at most 64 units per layer and at
/// most 8 timesteps, with heterogeneous thresholds, random analog input and
/// random labels.
pub fn random_check_case(seed: u64) -> Result<(Network, Activations, Vec<usize>)> {
    use crate::layers::LayerSpec;
    use crate::net::InitSpec;
    use crate::neuron::LifConstants;
    use crate::rng::{stream_rng, Stream};
    use crate::tensor::Shape;
    use rand::Rng;

    let mut rng = stream_rng(seed, Stream::Synthetic, &[7]);
    let layers = rng.random_range(1..=CHECK_MAX_LAYERS);
    let classes = rng.random_range(2..=4);
    let population = rng.random_range(1..=CHECK_MAX_UNITS / classes).min(4);
    let mut specs: Vec<LayerSpec> = (1..layers)
        .map(|_| LayerSpec::Dense {
            out_features: rng.random_range(2..=CHECK_MAX_UNITS),
        })
        .collect();
    specs.push(LayerSpec::Voting { classes, population });
    let inputs = rng.random_range(2..=16);
    let t = rng.random_range(1..=CHECK_MAX_STEPS);
    let batch = rng.random_range(1..=3);
    let tau = rng.random_range(1.5..4.0);
    let init = InitSpec {
        seed,
        initial_threshold: 1.0,
        ..InitSpec::default()
    };
    let mut net = Network::build(&specs, Shape::flat(inputs), LifConstants::new(tau, 1.0)?, &init)?;
    for l in net.spiking_layers_mut() {
        l.thresholds.iter_mut().for_each(|v| *v = rng.random_range(0.5..1.5));
    }
    let data = (0..t * batch * inputs).map(|_| rng.random_range(0.0..1.0)).collect();
    let labels = (0..batch).map(|_| rng.random_range(0..classes)).collect();
    Ok((net, Activations::from_vec(t, batch, Shape::flat(inputs), data)?, labels))
}



#[cfg(test)]
mod random_case_tests {
    use super::*;

    #[test]
    fn random_cases_pass() {
        let mut worst: f64 = 0.0;
        for seed in 0..5 {
            let (net, x, y) = random_check_case(seed).unwrap();
            let r = grad_check(&net, &x, &y, &SurrogateSpec::arctan(), DEFAULT_FD_STEP).unwrap();
            worst = worst.max(r.max_rel_error);
        }
        assert!(worst < 1e-5, "{worst}");
    }
}
