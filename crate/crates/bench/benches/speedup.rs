//! Incremental streaming versus recomputing every prefix from scratch.

use criterion::{criterion_group, criterion_main, Criterion};
use i2mufs::reference::recompute_from_scratch;
use i2mufs::SolverState;
use i2mufs_bench::{chunked_workload, fixed_iteration_hyperparams};
use std::hint::black_box;

fn bench_stream_strategies(c: &mut Criterion) {
    let hp = fixed_iteration_hyperparams(20);
    let (views, chunks) = chunked_workload(160, 4, 1);

    let mut group = c.benchmark_group("four_chunk_stream");
    group.sample_size(10);
    group.bench_function("incremental", |b| {
        b.iter(|| {
            let mut state = SolverState::init(views.clone(), &hp, 1).unwrap();
            for chunk in &chunks {
                black_box(state.process_chunk(chunk, &hp).unwrap());
            }
            state
        });
    });
    group.bench_function("from_scratch_prefixes", |b| {
        b.iter(|| black_box(recompute_from_scratch(&views, &chunks, &hp, 1).unwrap()));
    });
    group.finish();
}

criterion_group!(benches, bench_stream_strategies);
criterion_main!(benches);
