use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use lwe_attack::{gen_samples, gen_secret, LweParams, Modulus, ModelConfig, Predictor, SecretDist, TrainedModel, Vocab};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_model(n: usize, rng: &mut ChaCha8Rng) -> TrainedModel {
    let cfg = ModelConfig {
        enc_layers: 1,
        dec_layers: 1,
        enc_dim: 64,
        dec_dim: 64,
        enc_loops: 1,
        dec_loops: 1,
        ..Default::default()
    };
    TrainedModel::new(cfg, Vocab::new(81, 81).unwrap(), n, Modulus::new(251).unwrap(), rng).unwrap()
}

fn model(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 16;
    let p = LweParams::new(n, 251, 3.0, SecretDist::Binary { hamming: 2 }).unwrap();
    let s = gen_secret(&p, &mut rng).unwrap();
    let set = gen_samples(&p, &s, 256, &mut rng).unwrap();
    let mut m = small_model(n, &mut rng);
    let rows: Vec<&[u64]> = set.rows().map(|(a, _)| a).collect();

    let mut g = c.benchmark_group("model_n16_dim64");
    g.throughput(Throughput::Elements(256));
    g.sample_size(10);
    g.bench_function("greedy_decode_256", |b| b.iter(|| m.predict_batch(black_box(&rows))));
    g.bench_function("train_256", |b| b.iter(|| m.train_epoch(&set, &mut rng).unwrap()));
    g.finish();
}

criterion_group!(benches, model);
criterion_main!(benches);
