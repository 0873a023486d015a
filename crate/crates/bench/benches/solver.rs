//! Per-chunk solver cost across chunk sizes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use i2mufs::SolverState;
use i2mufs_bench::{chunked_workload, fixed_iteration_hyperparams};
use std::hint::black_box;

fn bench_process_chunk(c: &mut Criterion) {
    let hp = fixed_iteration_hyperparams(20);
    let mut group = c.benchmark_group("process_chunk");
    group.sample_size(10);
    for n in [50usize, 100, 200] {
        let (views, chunks) = chunked_workload(n, 1, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                let mut state = SolverState::init(views.clone(), &hp, 1).unwrap();
                black_box(state.process_chunk(&chunks[0], &hp).unwrap())
            });
        });
    }
    group.finish();
}

criterion_group!(benches, bench_process_chunk);
criterion_main!(benches);
