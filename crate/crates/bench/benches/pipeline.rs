use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use surfnoise_bench::{reference_levels, reference_well};
use surfnoise_core::{
    build_rate_matrix, decompose, enumerate_basis, evaluate_spectrum, exact_spectrum, gillespie_spectrum,
    solve_bound_states, MaterialParams, ThermalParams, TrajectoryConfig, TransitionSet,
};

fn bound_states(c: &mut Criterion) {
    let well = reference_well();
    let mat = MaterialParams::gold(0.0);
    let mut g = c.benchmark_group("solve_bound_states");
    g.sample_size(10);
    g.bench_function("M=10", |b| b.iter(|| solve_bound_states(black_box(&well), &mat, 10).unwrap()));
    g.finish();
}

fn decomposition(c: &mut Criterion) {
    let th = ThermalParams::new(0.4).unwrap();
    let mut g = c.benchmark_group("decompose");
    for (n, m) in [(2, 5), (4, 5), (3, 10), (6, 5)] {
        let levels = reference_levels(m);
        let basis = enumerate_basis(n, m).unwrap();
        let rm = build_rate_matrix(&basis, &levels, &th, &TransitionSet::AllPairs).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(format!("N={n},M={m},dim={}", basis.len())), &rm, |b, rm| {
            b.iter(|| decompose(black_box(rm)).unwrap())
        });
    }
    g.finish();
}

fn spectrum(c: &mut Criterion) {
    let th = ThermalParams::new(0.4).unwrap();
    let levels = reference_levels(5);
    let sd = exact_spectrum(4, &levels, &th, &TransitionSet::AllPairs).unwrap();
    let gamma = levels.rate(0, 1);
    let omega: Vec<f64> = (0..1000).map(|i| gamma * 10f64.powf(-2.0 + 4.0 * i as f64 / 999.0)).collect();
    c.bench_function("exact_spectrum/N=4,M=5", |b| {
        b.iter(|| exact_spectrum(4, black_box(&levels), &th, &TransitionSet::AllPairs).unwrap())
    });
    c.bench_function("evaluate_spectrum/1000pts", |b| b.iter(|| evaluate_spectrum(black_box(&sd), &omega)));
}

fn gillespie(c: &mut Criterion) {
    let th = ThermalParams::new(0.5).unwrap();
    let levels = reference_levels(3);
    let basis = enumerate_basis(2, 3).unwrap();
    let rm = build_rate_matrix(&basis, &levels, &th, &TransitionSet::AllPairs).unwrap();
    let gamma = levels.rate(0, 1);
    let cfg = TrajectoryConfig {
        duration: 220.0 / gamma,
        burn_in: 20.0 / gamma,
        seed: 1,
        trajectories: 16,
        sampling_dt: 0.05 / gamma,
        segment_duration: Some(100.0 / gamma),
    };
    let mut g = c.benchmark_group("gillespie");
    g.sample_size(10);
    g.bench_function("N=2,M=3,16x200", |b| {
        b.iter(|| gillespie_spectrum(&rm, &basis, &levels, black_box(&cfg)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, bound_states, decomposition, spectrum, gillespie);
criterion_main!(benches);
