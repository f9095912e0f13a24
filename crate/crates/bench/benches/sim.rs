use std::hint::black_box;

use bgwscale_core::model::fixtures::{m1, m4};
use bgwscale_core::sim::{estimate_lt_passage, sample_sibuya};
use bgwscale_core::SimConfig;
use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sampling(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    c.bench_function("sibuya alpha=0.5", |b| b.iter(|| sample_sibuya(black_box(0.5), &mut rng)));
    c.bench_function("sibuya alpha=0.9", |b| b.iter(|| sample_sibuya(black_box(0.9), &mut rng)));
}

fn paths(c: &mut Criterion) {
    let mut g = c.benchmark_group("paths");
    g.sample_size(10);
    let cfg = SimConfig { seed: 1, n_paths: 1000, ..SimConfig::default() };
    let (s1, s4) = (m1(), m4());
    g.bench_function("M1 lt q=0.5 x=2, 1e3 paths", |b| {
        b.iter(|| estimate_lt_passage(&s1, 0.5, black_box(2), 0, &cfg).unwrap())
    });
    g.bench_function("M4 lt q=1 x=1, 1e3 paths", |b| {
        b.iter(|| estimate_lt_passage(&s4, 1.0, black_box(1), 0, &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, sampling, paths);
criterion_main!(benches);
