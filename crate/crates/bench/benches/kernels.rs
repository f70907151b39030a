use criterion::{criterion_group, criterion_main, Criterion};
use mamaf_core::model::{bind, forward_batch};
use mamaf_core::nn::{attention, one_hot};
use mamaf_core::tensor::{conv2d, conv3d, Padding};
use mamaf_core::{Eager, Graph, ModelConfig, ModelWeights, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn uniform(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape, -1.0, 1.0, rng).unwrap()
}

fn kernels(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    // First layer of a 2D block on one desk-scale view.
    let x = uniform(&[25, 32, 32, 3], &mut rng);
    let k = uniform(&[3, 3, 3, 64], &mut rng);
    let b = uniform(&[64], &mut rng);
    c.bench_function("conv2d 25x32x32x3 -> 64, stride 2", |bench| {
        bench.iter(|| conv2d(&x, &k, &b, (2, 2), Padding::Same).unwrap())
    });

    let x = uniform(&[75, 14, 14, 8], &mut rng);
    let k = uniform(&[3, 3, 3, 8, 3], &mut rng);
    let b = uniform(&[3], &mut rng);
    c.bench_function("conv3d 75x14x14x8 -> 3, stride (5,2,2)", |bench| {
        bench.iter(|| conv3d(&x, &k, &b, (5, 2, 2), Padding::Same).unwrap())
    });

    let x = uniform(&[75, 14, 14, 8], &mut rng);
    c.bench_function("attention 75 frames x 196 tokens x 8", |bench| {
        bench.iter(|| {
            let mut g = Eager::new();
            attention(&mut g, &x).unwrap()
        })
    });
}

fn network(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let config = ModelConfig::default();
    let weights = ModelWeights::init(&config).unwrap();
    let shape = [config.seq_len, config.input_hw, config.input_hw, config.channels];
    let subjects: Vec<Vec<Tensor>> = (0..2)
        .map(|_| (0..4).map(|_| Tensor::uniform(&shape, 0.0, 1.0, &mut rng).unwrap()).collect())
        .collect();
    let target: Tensor = one_hot(&[1, 0], 2).unwrap();

    let mut group = c.benchmark_group("desk model, batch of 2");
    group.sample_size(20);
    group.bench_function("forward", |bench| bench.iter(|| weights.predict_batch(&subjects).unwrap()));
    group.bench_function("forward + backward", |bench| {
        bench.iter(|| {
            let mut tape = Tape::new();
            let p = bind(&mut tape, &weights.params);
            let pred = forward_batch(&mut tape, &config, &p, &subjects).unwrap();
            let loss = tape.cross_entropy(&pred, &target).unwrap();
            tape.backward(loss).unwrap().param_grads()
        })
    });
    group.finish();
}

criterion_group!(benches, kernels, network);
criterion_main!(benches);
