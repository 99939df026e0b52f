use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use stlsnn::data::{encode_images, encode_labels, Dataset, NoiseKind, NoiseSpec};
use stlsnn::grad::{grad_check, random_check_case, GradCheckReport, LearningMode};
use stlsnn::net::Network;
use stlsnn::persist::{
    atomic_write, emit_config, load_checkpoint, parse_config, save_checkpoint, write_metrics, Checkpoint,
    ExperimentConfig, TensorFile,
};
use stlsnn::rng::{derive, stream_rng, Stream};
use stlsnn::tensor::Activations;
use stlsnn::train::{
    check_dataset, evaluate, fit, hete_init, jdf_combine, lr_schedule, sample_threshold_units, shuffle_thresholds,
    test_record, track_thresholds, MetricsRecord, OptimizerState,
};

use crate::{Command, Common};

pub fn run(cmd: Command, common: &Common) -> Result<ExitCode> {
    match cmd {
        Command::Train { resume, keep_every } => train(common, resume, keep_every),
        Command::Eval {
            checkpoint,
            noise_kind,
            noise_level,
        } => eval(common, &checkpoint, noise_kind.zip(noise_level)),
        Command::Gradcheck {
            trials,
            epsilon,
            tolerance,
        } => gradcheck(common, trials, epsilon, tolerance),
        Command::Encode { split } => encode(common, &split),
        Command::Noise { kind, level, split } => noise(common, kind, level, &split),
        Command::ShuffleThresholds {
            checkpoint,
            reinit_weights,
        } => shuffle(common, &checkpoint, reinit_weights),
        Command::JdfEval { checkpoints } => jdf_eval(common, &checkpoints),
        Command::TrackThresholds { checkpoints, samples } => track(common, &checkpoints, samples),
    }
    .map(|()| ExitCode::SUCCESS)
    .or_else(|e| match e.downcast::<GradcheckFailed>() {
        Ok(_) => Ok(ExitCode::FAILURE),
        Err(e) => Err(e),
    })
}

#[derive(Debug)]
struct GradcheckFailed;

impl std::fmt::Display for GradcheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("gradient check above tolerance")
    }
}

impl std::error::Error for GradcheckFailed {}

fn apply_overrides(cfg: &mut ExperimentConfig, common: &Common) {
    if let Some(s) = common.seed {
        cfg.train.seed = s;
    }
    if let Some(m) = common.mode {
        cfg.train.mode = m;
    }
}

/// Reads `--config` (with overrides), returning paths made absolute.
fn config(common: &Common) -> Result<ExperimentConfig> {
    let path = common.config.as_ref().ok_or_else(|| anyhow!("--config is required"))?;
    let mut cfg = parse_config(path).with_context(|| format!("reading {}", path.display()))?;
    apply_overrides(&mut cfg, common);
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.validate(base).context("invalid config after overrides")?;
    Ok(cfg.with_absolute_paths(base)?)
}

/// `--config` if given, otherwise the config stored in the checkpoint.
fn config_or(common: &Common, ckpt: &Checkpoint) -> Result<ExperimentConfig> {
    match &common.config {
        Some(_) => config(common),
        None => {
            let mut cfg = ckpt.config.clone();
            apply_overrides(&mut cfg, common);
            Ok(cfg)
        }
    }
}

fn out_dir(common: &Common) -> Result<&Path> {
    common
        .out
        .as_deref()
        .ok_or_else(|| anyhow!("--out is required for this command"))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load(path: &Path) -> Result<Checkpoint> {
    load_checkpoint(path).with_context(|| format!("loading {}", path.display()))
}

fn split_of<'a>(split: &str, train: &'a Dataset, test: &'a Dataset) -> Result<&'a Dataset> {
    match split {
        "train" => Ok(train),
        "test" => Ok(test),
        _ => bail!("unknown split `{split}` (expected train or test)"),
    }
}

fn train(common: &Common, resume: Option<PathBuf>, keep_every: usize) -> Result<()> {
    let out = out_dir(common)?.to_path_buf();
    let (cfg, mut net, mut opt, start, mut history) = match resume {
        Some(p) => {
            let c = load(&p)?;
            let mut cfg = c.config.clone();
            if common.config.is_some() {
                bail!("--config cannot be combined with --resume; the checkpoint carries its config");
            }
            apply_overrides(&mut cfg, common);
            if c.epoch > 0 && (cfg.train.seed != c.config.train.seed || cfg.train.mode != c.config.train.mode) {
                bail!("seed and mode cannot change in the middle of a run");
            }
            (cfg, c.network, c.optimizer, c.epoch, c.metrics)
        }
        None => {
            let cfg = config(common)?;
            let shape = match cfg.input_shape(Path::new(".")) {
                Some(s) => s,
                None => cfg.load_datasets(Path::new("."))?.0.shape,
            };
            let net = cfg.build_network(shape)?;
            let opt = OptimizerState::new(&net);
            (cfg, net, opt, 0, Vec::new())
        }
    };
    let (train_set, test_set) = cfg.load_datasets(Path::new("."))?;
    check_dataset(&net, &train_set).context("train split")?;
    check_dataset(&net, &test_set).context("test split")?;

    create_dir(&out)?;
    let snapshot = |epoch: usize, net: &Network, opt: &OptimizerState, metrics: &[MetricsRecord]| Checkpoint {
        config: cfg.clone(),
        epoch,
        network: net.clone(),
        optimizer: opt.clone(),
        metrics: metrics.to_vec(),
    };
    atomic_write(out.join("config.toml"), emit_config(&cfg)?.as_bytes())?;
    if start == 0 {
        save_checkpoint(out.join("init.ckpt"), &snapshot(0, &net, &opt, &history))?;
    }
    write_metrics(out.join("metrics.csv"), &history)?;
    let best_of = |h: &[MetricsRecord]| {
        h.iter()
            .filter(|r| r.split == stlsnn::train::Split::Test)
            .map(|r| r.top1)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut best = best_of(&history);
    fit(
        &mut net,
        &mut opt,
        &train_set,
        &test_set,
        &cfg.train,
        start,
        |epoch, net, opt, recs| {
            history.extend_from_slice(recs);
            let ckpt = snapshot(epoch, net, opt, &history);
            save_checkpoint(out.join("last.ckpt"), &ckpt)?;
            if keep_every > 0 && epoch % keep_every == 0 {
                save_checkpoint(out.join(format!("epoch-{epoch:03}.ckpt")), &ckpt)?;
            }
            let top1 = recs[1].top1;
            if top1 > best {
                best = top1;
                save_checkpoint(out.join("best.ckpt"), &ckpt)?;
            }
            write_metrics(out.join("metrics.csv"), &history)?;
            eprintln!(
                "epoch {epoch}: train loss {:.4} top1 {:.4} | test top1 {:.4} afr {:.4}",
                recs[0].loss, recs[0].top1, recs[1].top1, recs[1].afr
            );
            Ok(())
        },
    )?;
    save_checkpoint(
        out.join("final.ckpt"),
        &snapshot(cfg.train.epochs.max(start), &net, &opt, &history),
    )?;
    Ok(())
}

fn eval(common: &Common, checkpoint: &Path, noise: Option<(NoiseKind, f64)>) -> Result<()> {
    let ckpt = load(checkpoint)?;
    let mut cfg = config_or(common, &ckpt)?;
    if let Some((kind, level)) = noise {
        cfg.noise = Some(NoiseSpec::new(kind, level, cfg.train.seed)?);
    }
    let (_, test) = cfg.load_datasets(Path::new("."))?;
    let ev = evaluate(&ckpt.network, &test, &cfg.train)?;
    let lr = lr_schedule(cfg.train.eta0, cfg.train.gamma, ckpt.epoch.saturating_sub(1));
    let rec = test_record(&ev, ckpt.epoch, lr, &cfg.train);
    println!("top1 {} afr {} loss {}", ev.top1, ev.afr, ev.loss);
    if let Some(out) = &common.out {
        create_dir(out)?;
        write_metrics(out.join("eval.csv"), &[rec])?;
    }
    Ok(())
}

fn gradcheck(common: &Common, trials: usize, epsilon: f64, tolerance: f64) -> Result<()> {
    let seed = common.seed.unwrap_or(0);
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let (net, input, labels) = match &common.config {
            None => random_check_case(seed.wrapping_add(trial as u64))?,
            Some(_) => configured_case(common, seed, trial)?,
        };
        let s = common
            .config
            .as_ref()
            .map(|_| config(common).map(|c| c.train.surrogate))
            .transpose()?
            .unwrap_or_default();
        let GradCheckReport {
            max_rel_error, checked, ..
        } = grad_check(&net, &input, &labels, &s, epsilon)?;
        println!("trial {trial}: {checked} parameters, max relative error {max_rel_error:e}");
        worst = worst.max(max_rel_error);
    }
    println!("max relative error {worst:e}");
    if let Some(out) = &common.out {
        create_dir(out)?;
        atomic_write(out.join("gradcheck.txt"), format!("{worst:e}\n").as_bytes())?;
    }
    if worst < tolerance {
        Ok(())
    } else {
        eprintln!("gradient check failed: {worst:e} >= {tolerance:e}");
        Err(GradcheckFailed.into())
    }
}

/// The configured network with random weights, input and labels.
fn configured_case(common: &Common, seed: u64, trial: usize) -> Result<(Network, Activations, Vec<usize>)> {
    use rand::Rng;
    let mut cfg = config(common)?;
    cfg.train.seed = derive(seed, Stream::Weights, &[trial as u64]);
    let shape = cfg
        .input_shape(Path::new("."))
        .ok_or_else(|| anyhow!("cannot infer the input shape from this config"))?;
    let net = cfg.build_network(shape)?;
    let mut rng = stream_rng(seed, Stream::Synthetic, &[trial as u64]);
    let (t, b) = (cfg.train.time_window, 2);
    let data = (0..t * b * shape.numel()).map(|_| rng.random_range(0.0..1.0)).collect();
    let classes = net.voting().classes;
    let labels = (0..b).map(|_| rng.random_range(0..classes)).collect();
    Ok((net, Activations::from_vec(t, b, shape, data)?, labels))
}

fn encode(common: &Common, split: &str) -> Result<()> {
    let cfg = config(common)?;
    let out = out_dir(common)?;
    let (train, test) = cfg.load_datasets(Path::new("."))?;
    let ds = split_of(split, &train, &test)?;
    let t = cfg.train.time_window;
    let mut data = Vec::new();
    for i in 0..ds.len() {
        data.extend(ds.encode_sample(i, t, derive(cfg.train.eval_seed, Stream::EvalEncoder, &[i as u64]))?);
    }
    let s = ds.shape;
    let file = TensorFile {
        shape: vec![t, s.channels, s.height, s.width],
        labels: ds.labels.clone(),
        data,
    };
    let bytes = file.to_bytes()?;
    create_dir(out)?;
    atomic_write(out.join(format!("{split}.tensor")), &bytes)?;
    println!("{} samples of {:?}", ds.len(), file.shape);
    Ok(())
}

fn noise(common: &Common, kind: NoiseKind, level: f64, split: &str) -> Result<()> {
    let mut cfg = config(common)?;
    cfg.noise = None;
    let out = out_dir(common)?;
    let spec = NoiseSpec::new(kind, level, cfg.train.seed)?;
    let (train, test) = cfg.load_datasets(Path::new("."))?;
    let noisy = split_of(split, &train, &test)?.with_noise(&spec)?;
    let per: Vec<usize> = match noisy.is_event_data() {
        true => vec![
            noisy.raw(0).len() / noisy.shape.numel(),
            noisy.shape.channels,
            noisy.shape.height,
            noisy.shape.width,
        ],
        false => vec![noisy.shape.channels, noisy.shape.height, noisy.shape.width],
    };
    let file = TensorFile {
        shape: per,
        labels: noisy.labels.clone(),
        data: (0..noisy.len()).flat_map(|i| noisy.raw(i).to_vec()).collect(),
    };
    let tensor = file.to_bytes()?;
    let idx = match noisy.images() {
        Some(set) if set.shape.channels == 1 => Some((encode_images(&set)?, encode_labels(&set.labels)?)),
        _ => None,
    };
    create_dir(out)?;
    atomic_write(out.join(format!("{split}-noisy.tensor")), &tensor)?;
    if let Some((images, labels)) = idx {
        atomic_write(out.join(format!("{split}-images-idx3-ubyte")), &images)?;
        atomic_write(out.join(format!("{split}-labels-idx1-ubyte")), &labels)?;
    }
    Ok(())
}

fn shuffle(common: &Common, checkpoint: &Path, reinit: bool) -> Result<()> {
    let ckpt = load(checkpoint)?;
    let out = out_dir(common)?;
    let mut cfg = ckpt.config.clone();
    if common.config.is_some() {
        bail!("shuffle-thresholds takes its config from the checkpoint");
    }
    if let Some(s) = common.seed {
        cfg.train.seed = s;
    }
    cfg.train.mode = common.mode.unwrap_or(LearningMode::Sl);
    let seed = cfg.train.seed;
    let net = if reinit {
        hete_init(&ckpt.network, &cfg.train.init_spec(), seed)?
    } else {
        shuffle_thresholds(&ckpt.network, seed)
    };
    let opt = OptimizerState::new(&net);
    let hete = Checkpoint {
        config: cfg,
        epoch: 0,
        network: net,
        optimizer: opt,
        metrics: Vec::new(),
    };
    let bytes = stlsnn::persist::write_checkpoint(&hete)?;
    create_dir(out)?;
    atomic_write(out.join("hete-init.ckpt"), &bytes)?;
    Ok(())
}

fn jdf_eval(common: &Common, paths: &[PathBuf]) -> Result<()> {
    let ckpts = paths.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
    let cfg = config_or(common, &ckpts[0])?;
    let (_, test) = cfg.load_datasets(Path::new("."))?;
    let mut counts = Vec::new();
    let mut csv = String::from("member,checkpoint,top1\n");
    for (i, (c, p)) in ckpts.iter().zip(paths).enumerate() {
        let ev = evaluate(&c.network, &test, &cfg.train)?;
        println!("member {i} ({}): top1 {}", p.display(), ev.top1);
        writeln!(csv, "{i},{},{}", p.display(), ev.top1)?;
        counts.push(ev.class_counts);
    }
    let pred = jdf_combine(&counts)?;
    let top1 = pred.iter().zip(&test.labels).filter(|(a, b)| a == b).count() as f64 / test.len() as f64;
    println!("ensemble top1 {top1}");
    writeln!(csv, "ensemble,,{top1}")?;
    if let Some(out) = &common.out {
        create_dir(out)?;
        atomic_write(out.join("jdf.csv"), csv.as_bytes())?;
    }
    Ok(())
}

fn track(common: &Common, paths: &[PathBuf], samples: Option<usize>) -> Result<()> {
    let out = out_dir(common)?;
    let ckpts = paths.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
    let first = &ckpts[0];
    let n = samples.unwrap_or(first.config.track_samples);
    let units = sample_threshold_units(&first.network, n, common.seed.unwrap_or(first.config.train.seed));
    let mut values = String::from("epoch,stage,unit,threshold\n");
    let mut stats = String::from("epoch,stage,mean,std,hist_lo,hist_hi,hist_counts\n");
    for c in &ckpts {
        for s in track_thresholds(&c.network, &units)? {
            for (u, v) in s.indices.iter().zip(&s.values) {
                writeln!(values, "{},{},{u},{v}", c.epoch, s.stage)?;
            }
            let h = &s.histogram;
            let counts: Vec<String> = h.counts.iter().map(|c| c.to_string()).collect();
            writeln!(
                stats,
                "{},{},{},{},{},{},{}",
                c.epoch,
                s.stage,
                s.mean,
                s.std,
                h.lo,
                h.hi,
                counts.join(";")
            )?;
        }
    }
    create_dir(out)?;
    atomic_write(out.join("thresholds.csv"), values.as_bytes())?;
    atomic_write(out.join("threshold_stats.csv"), stats.as_bytes())?;
    Ok(())
}
