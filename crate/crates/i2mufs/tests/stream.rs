//! End-to-end streaming scenarios exercising the public API: generate data,
//! hide entries, split into chunks, run the solver, and check that feature
//! ranking, checkpointing and reporting behave coherently.

use i2mufs::solver::{load_checkpoint, save_checkpoint, state_to_bytes};
use i2mufs::synth::{generate, SynthSpec};
use i2mufs::{chunkify, mask_incomplete, rank_features, select_features, Hyperparams, SolverState};

fn planted_workload(seed: u64) -> i2mufs::synth::SynthOutput {
    generate(&SynthSpec {
        n: 200,
        informative: vec![12, 10],
        noise: vec![18, 20],
        k: 3,
        seed,
    })
    .unwrap()
}

#[test]
fn streamed_chunks_prefer_planted_features() {
    let out = planted_workload(11);
    let masked = mask_incomplete(&out.dataset, 0.3, 7).unwrap();
    let chunks = chunkify(&masked, 4, 7).unwrap();

    let hp = Hyperparams::new(3, 2);
    let mut state = SolverState::init(masked.views.clone(), &hp, 42).unwrap();
    for chunk in &chunks {
        let report = state.process_chunk(chunk, &hp).unwrap();
        assert!(report.iterations >= 1 && report.iterations <= hp.max_iters);
        assert!((report.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    let ranking = rank_features(&state);
    let selected = select_features(&ranking, 0.4).unwrap();
    let mut hits = 0usize;
    let mut total = 0usize;
    for (v, sel) in selected.iter().enumerate() {
        total += sel.len();
        hits += sel.iter().filter(|&&f| out.planted[v].contains(&f)).count();
    }
    let precision = hits as f64 / total as f64;
    assert!(
        precision >= 0.6,
        "planted-feature precision {precision} too low"
    );
}

#[test]
fn checkpoint_resume_matches_uninterrupted_run() {
    let out = planted_workload(23);
    let masked = mask_incomplete(&out.dataset, 0.2, 5).unwrap();
    let chunks = chunkify(&masked, 5, 5).unwrap();
    let hp = Hyperparams::new(3, 2);

    let mut straight = SolverState::init(masked.views.clone(), &hp, 9).unwrap();
    for chunk in &chunks {
        straight.process_chunk(chunk, &hp).unwrap();
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.ckpt");
    let mut first_half = SolverState::init(masked.views.clone(), &hp, 9).unwrap();
    for chunk in &chunks[..3] {
        first_half.process_chunk(chunk, &hp).unwrap();
    }
    save_checkpoint(&first_half, &path).unwrap();
    drop(first_half);

    let mut resumed = load_checkpoint(&path).unwrap();
    assert_eq!(resumed.chunks_seen, 3);
    for chunk in &chunks[3..] {
        resumed.process_chunk(chunk, &hp).unwrap();
    }

    assert_eq!(
        state_to_bytes(&straight).unwrap(),
        state_to_bytes(&resumed).unwrap(),
        "resumed stream diverged from the uninterrupted one"
    );
}

#[test]
fn same_seed_streams_are_reproducible_and_different_seeds_diverge() {
    let out = planted_workload(31);
    let chunks = chunkify(&out.dataset, 3, 2).unwrap();
    let hp = Hyperparams::new(3, 2);

    let run = |solver_seed: u64| {
        let mut state = SolverState::init(out.dataset.views.clone(), &hp, solver_seed).unwrap();
        for chunk in &chunks {
            state.process_chunk(chunk, &hp).unwrap();
        }
        state_to_bytes(&state).unwrap()
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
}

#[test]
fn variant_without_adaptive_weights_keeps_alpha_uniform_through_stream() {
    let out = planted_workload(47);
    let masked = mask_incomplete(&out.dataset, 0.4, 3).unwrap();
    let chunks = chunkify(&masked, 3, 3).unwrap();
    let hp = Hyperparams::new(3, 2).with_variant(i2mufs::Variant::CI2mufs);
    let mut state = SolverState::init(masked.views.clone(), &hp, 1).unwrap();
    for chunk in &chunks {
        let report = state.process_chunk(chunk, &hp).unwrap();
        assert_eq!(report.alpha, vec![0.5, 0.5]);
    }
}
