//! Forward + backward on one minibatch, on the default rayon pool and on a
//! single-thread pool. Results are identical either way; only time differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use stlsnn::data::{synthetic_images, Dataset, Encoding};
use stlsnn::grad::{backward, loss_grad_output, one_hot, LossSpec};
use stlsnn::layers::parse_network;
use stlsnn::net::{voting_readout, Dynamics, InitSpec, Network, Phase};
use stlsnn::neuron::{LifConstants, SurrogateSpec};
use stlsnn::tensor::Shape;

fn step(net: &Network, data: &Dataset, idx: &[usize], t: usize) {
    let input = data.batch(idx, t, |i| i as u64).unwrap();
    let cache = net.forward(input, Phase::Train, Dynamics::Hard, 1).unwrap();
    let v = net.voting();
    let rates = voting_readout(cache.output(), v).unwrap();
    let labels: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
    let y = one_hot(&labels, v.classes);
    let spec = LossSpec {
        batch: idx.len(),
        classes: v.classes,
        population: v.population,
        time_steps: t,
    };
    let seed = loss_grad_output(&rates, &y, spec).unwrap();
    black_box(backward(net, &cache, &seed, &SurrogateSpec::arctan()).unwrap());
}

fn bench(c: &mut Criterion) {
    let cases = [
        ("dense", "FC256-VotingC10P10", Shape::new(1, 14, 14)),
        (
            "conv",
            "16C3-BN-MP2-32C3-BN-MP2-DP-FC128-VotingC10P10",
            Shape::new(1, 16, 16),
        ),
    ];
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut group = c.benchmark_group("train_step");
    group.sample_size(10);
    for (name, arch, shape) in cases {
        let specs = parse_network(arch, 0.5).unwrap();
        let net = Network::build(&specs, shape, LifConstants::default(), &InitSpec::default()).unwrap();
        let data = Dataset::from_images(synthetic_images(50, 10, shape, 3).unwrap(), Encoding::Bernoulli);
        let idx: Vec<usize> = (0..50).collect();
        group.bench_with_input(BenchmarkId::new("parallel", name), &(), |b, _| {
            b.iter(|| step(&net, &data, &idx, 4))
        });
        group.bench_with_input(BenchmarkId::new("sequential", name), &(), |b, _| {
            b.iter(|| single.install(|| step(&net, &data, &idx, 4)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
