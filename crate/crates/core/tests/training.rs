mod common;

use common::*;
use stlsnn::grad::LearningMode;
use stlsnn::net::ParamKind;
use stlsnn::persist::{
    read_checkpoint, write_checkpoint, Checkpoint, DatasetConfig, ExperimentConfig, SyntheticSource,
};
use stlsnn::train::{evaluate, fit, train_epoch, OptimizerState};

const ARCH: &str = "4C3-BN-MP2-DP-FC12-BN-VotingC3P2";

#[test]
fn sl_freezes_thresholds_and_tl_freezes_weights() {
    let data = toy_data(48, 1);
    for mode in [LearningMode::Sl, LearningMode::Tl] {
        let cfg = stlsnn::train::TrainConfig { mode, ..toy_config(3) };
        let mut net = toy_net(ARCH, &cfg);
        let before = net.clone();
        let mut opt = OptimizerState::new(&net);
        for e in 0..2 {
            train_epoch(&mut net, &data, &cfg, &mut opt, e).unwrap();
        }
        let mut changed = false;
        for s in net.param_slots() {
            let frozen = match mode {
                LearningMode::Sl => s.kind == ParamKind::Thresholds,
                _ => s.kind != ParamKind::Thresholds,
            };
            if frozen {
                let same = net
                    .param(s)
                    .iter()
                    .zip(before.param(s))
                    .all(|(a, b)| a.to_bits() == b.to_bits());
                assert!(same, "{mode:?} changed {:?}", s);
            } else {
                changed |= net.param(s) != before.param(s);
            }
        }
        assert!(changed, "{mode:?} learned nothing");
    }
}

#[test]
fn training_is_bit_reproducible() {
    let data = toy_data(40, 2);
    let test = toy_data(20, 9);
    let cfg = stlsnn::train::TrainConfig {
        epochs: 2,
        ..toy_config(5)
    };
    let run = || {
        let mut net = toy_net(ARCH, &cfg);
        let mut opt = OptimizerState::new(&net);
        let recs = fit(&mut net, &mut opt, &data, &test, &cfg, 0, |_, _, _, _| Ok(())).unwrap();
        (recs, net, opt)
    };
    let (r1, n1, o1) = run();
    let (r2, n2, o2) = run();
    assert_eq!(r1, r2);
    assert_eq!(n1, n2);
    assert_eq!(o1, o2);
}

#[test]
fn resume_matches_uninterrupted_run() {
    let data = toy_data(40, 2);
    let test = toy_data(20, 9);
    let cfg = stlsnn::train::TrainConfig {
        epochs: 3,
        ..toy_config(6)
    };
    let mut exp = ExperimentConfig::with_dataset(DatasetConfig::Synthetic {
        source: SyntheticSource::Images,
        train_samples: 40,
        test_samples: 20,
        classes: 3,
        channels: 1,
        height: 6,
        width: 6,
        seed: 0,
        encoding: stlsnn::data::Encoding::Bernoulli,
        duration_ms: None,
        slicing: None,
        slice_ms: None,
    });
    exp.network = ARCH.into();
    exp.train = cfg.clone();

    let mut net = toy_net(ARCH, &cfg);
    let mut opt = OptimizerState::new(&net);
    let full = fit(&mut net, &mut opt, &data, &test, &cfg, 0, |_, _, _, _| Ok(())).unwrap();

    let mut saved = None;
    let mut n2 = toy_net(ARCH, &cfg);
    let mut o2 = OptimizerState::new(&n2);
    let first = stlsnn::train::TrainConfig {
        epochs: 1,
        ..cfg.clone()
    };
    let head = fit(&mut n2, &mut o2, &data, &test, &first, 0, |e, n, o, r| {
        let c = Checkpoint {
            config: exp.clone(),
            epoch: e,
            network: n.clone(),
            optimizer: o.clone(),
            metrics: r.to_vec(),
        };
        saved = Some(write_checkpoint(&c).unwrap());
        Ok(())
    })
    .unwrap();
    let c = read_checkpoint(&saved.unwrap()).unwrap();
    let (mut n3, mut o3) = (c.network, c.optimizer);
    let tail = fit(&mut n3, &mut o3, &data, &test, &cfg, c.epoch, |_, _, _, _| Ok(())).unwrap();
    assert_eq!([head, tail].concat(), full);
    assert_eq!(n3, net);
}

#[test]
fn loss_falls_over_two_epochs_for_most_seeds() {
    let data = toy_data(32, 4);
    let mut falling = 0;
    for seed in 0..5 {
        let cfg = toy_config(seed);
        let mut net = toy_net("FC24-VotingC3P4", &cfg);
        let mut opt = OptimizerState::new(&net);
        let a = train_epoch(&mut net, &data, &cfg, &mut opt, 0).unwrap();
        let b = train_epoch(&mut net, &data, &cfg, &mut opt, 1).unwrap();
        if b.loss <= a.loss {
            falling += 1;
        }
    }
    assert!(falling >= 4, "{falling} of 5");
}

#[test]
fn evaluation_rejects_empty_data() {
    let cfg = toy_config(0);
    let net = toy_net("FC4-VotingC3P1", &cfg);
    let empty = toy_data(4, 0).subset(&[]);
    assert!(matches!(
        evaluate(&net, &empty, &cfg),
        Err(stlsnn::Error::EmptyInput(_))
    ));
}

#[cfg(feature = "parallel")]
#[test]
fn thread_count_does_not_change_results() {
    let data = toy_data(40, 2);
    let cfg = toy_config(7);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut net = toy_net(ARCH, &cfg);
            let mut opt = OptimizerState::new(&net);
            let rec = train_epoch(&mut net, &data, &cfg, &mut opt, 0).unwrap();
            let ev = evaluate(&net, &data, &cfg).unwrap();
            (rec, net, ev.class_counts)
        })
    };
    assert_eq!(run(1), run(4));
}
