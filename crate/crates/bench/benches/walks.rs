use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qwalkdec_core::coined::noise::evolve_density;
use qwalkdec_core::coined::trajectory::ensemble_position_distribution;
use qwalkdec_core::ctqw::{evolve_master, CtqwNoise, CtqwNoiseSpec, StepControl};
use qwalkdec_core::graphs::{build_cycle, build_hypercube, build_line};
use qwalkdec_core::linalg::outer;
use qwalkdec_core::{
    CoinSpec, CoinedWalk, HamiltonianSpec, NoiseChannel, NoiseSpec, WalkStateDensity, WalkStatePure, C64,
};
use std::hint::black_box;

fn symmetric() -> [C64; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [C64::new(h, 0.0), C64::new(0.0, h)]
}

fn pure_line(c: &mut Criterion) {
    let mut group = c.benchmark_group("pure_line");
    for steps in [100u64, 1000] {
        let g = build_line(steps as usize).unwrap();
        let w = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
        let init = WalkStatePure::localized(&g, g.line_index(0).unwrap(), &symmetric()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(steps), &steps, |b, &s| {
            b.iter(|| w.evolve_pure(black_box(&init), s).unwrap())
        });
    }
    group.finish();
}

fn density_line(c: &mut Criterion) {
    let g = build_line(50).unwrap();
    let w = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
    let init = WalkStateDensity::from_pure(&WalkStatePure::localized(&g, g.line_index(0).unwrap(), &symmetric()).unwrap());
    let noise = NoiseSpec::per_step(NoiseChannel::MeasureBoth, 0.05).unwrap();
    c.bench_function("density_line_50", |b| {
        b.iter(|| evolve_density(&w, black_box(&init), &noise, 50, |_| Ok(())).unwrap())
    });
}

fn trajectories_cycle(c: &mut Criterion) {
    let g = build_cycle(64).unwrap();
    let w = CoinedWalk::new(&g, &CoinSpec::Hadamard).unwrap();
    let init = WalkStatePure::localized(&g, 0, &symmetric()).unwrap();
    let noise = NoiseSpec::per_step(NoiseChannel::ImperfectCoin { p_spread: 0.1 }, 1.0).unwrap();
    c.bench_function("trajectories_cycle_64x100", |b| {
        b.iter(|| ensemble_position_distribution(&w, &init, &noise, 100, 100, black_box(7)).unwrap())
    });
}

fn master_hypercube(c: &mut Criterion) {
    let g = build_hypercube(5).unwrap();
    let h = HamiltonianSpec::hypercube(5, 1.0).unwrap();
    let noise = CtqwNoiseSpec::new(CtqwNoise::PerQubitDephase, 0.5).unwrap();
    let mut psi = vec![C64::new(0.0, 0.0); 32];
    psi[0] = C64::new(1.0, 0.0);
    let rho0 = outer(&psi);
    let times = [1.0, 2.0];
    c.bench_function("master_hypercube_5", |b| {
        b.iter(|| evolve_master(&g, &h, Some(&noise), black_box(&rho0), &times, &StepControl::default()).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = pure_line, density_line, trajectories_cycle, master_hypercube
}
criterion_main!(benches);
