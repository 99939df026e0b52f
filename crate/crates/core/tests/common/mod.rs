#![allow(dead_code)]

use stlsnn::data::{synthetic_images, Dataset, Encoding};
use stlsnn::layers::parse_network;
use stlsnn::net::{InitSpec, Network};
use stlsnn::neuron::LifConstants;
use stlsnn::tensor::Shape;
use stlsnn::train::TrainConfig;

pub const TOY_SHAPE: Shape = Shape::new(1, 6, 6);

pub fn toy_data(n: usize, seed: u64) -> Dataset {
    Dataset::from_images(synthetic_images(n, 3, TOY_SHAPE, seed).unwrap(), Encoding::Bernoulli)
}

pub fn toy_config(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        batch_size: 16,
        time_window: 4,
        eta0: 0.01,
        initial_threshold: 1.0,
        ..TrainConfig::default()
    }
}

pub fn toy_net(arch: &str, cfg: &TrainConfig) -> Network {
    let specs = parse_network(arch, cfg.dropout_p).unwrap();
    Network::build(
        &specs,
        TOY_SHAPE,
        LifConstants::new(cfg.tau, cfg.dt).unwrap(),
        &cfg.init_spec(),
    )
    .unwrap()
}

pub fn lif() -> LifConstants {
    LifConstants::default()
}

pub fn init(seed: u64) -> InitSpec {
    InitSpec {
        seed,
        ..InitSpec::default()
    }
}
