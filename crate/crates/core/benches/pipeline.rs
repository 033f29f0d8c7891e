//! Sequential vs parallel execution of the per-image and per-query stages.
//!
//! Without the `parallel` feature both variants run on one thread.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use objpool::descriptors::{describe_regions, DescriptorSource};
use objpool::index::{Metric, Payload, RetrievalIndex};
use objpool::pipeline::{propose, represent_all, PipelineConfig};
use objpool::synthetic::retrieval_corpus;
use objpool::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn bench_represent(c: &mut Criterion) {
    let images: Vec<_> = retrieval_corpus()
        .into_iter()
        .map(|i| (i.image_id, i.image))
        .collect();
    let cfg = PipelineConfig::default();
    let mut group = c.benchmark_group("represent_all");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| represent_all(black_box(&images), &cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_describe(c: &mut Criterion) {
    let corpus = retrieval_corpus();
    let img = &corpus[0].image;
    let set = propose(img, &corpus[0].image_id, &PipelineConfig::default()).unwrap();
    let mut group = c.benchmark_group("describe_regions");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                describe_regions(img, black_box(&set), &DescriptorSource::Builtin, exec).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_search(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dim = 128;
    let mut index = RetrievalIndex::new(Metric::L2, dim).unwrap();
    for i in 0..5000 {
        let v: Vec<f32> = (0..dim).map(|_| rng.random()).collect();
        index.insert(format!("e{i}"), Payload::Float(v)).unwrap();
    }
    let queries: Vec<(String, Payload)> = (0..64)
        .map(|i| {
            let v: Vec<f32> = (0..dim).map(|_| rng.random()).collect();
            (format!("q{i}"), Payload::Float(v))
        })
        .collect();
    let mut group = c.benchmark_group("search_batch");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| index.search_batch(black_box(&queries), 10, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_represent, bench_describe, bench_search);
criterion_main!(benches);
