use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use selfcal::numerics::{fwht, RandomStream, C64};
use selfcal::sensing::{SensingKind, SensingSpec};
use selfcal::system::{default_w, synthesize_problem, ModelKind, ProblemConfig, WeightHint};
use selfcal::{solve_lls, solve_spectral, LlsConfig, SpectralConfig, StackedSystem};

fn bench_fwht(c: &mut Criterion) {
    let mut group = c.benchmark_group("fwht");
    for len in [256usize, 4096, 65536] {
        let mut s = RandomStream::new(1);
        let v: Vec<C64> = (0..len).map(|_| s.complex_gaussian()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(len), &v, |b, v| b.iter(|| fwht(black_box(v)).unwrap()));
    }
    group.finish();
}

fn problem(kind: SensingKind, snr_db: f64) -> selfcal::ProblemInstance {
    let cfg = ProblemConfig::new(ModelKind::DiverseInputs, SensingSpec::new(kind, 256, 64), 8).with_snr_db(snr_db);
    synthesize_problem(&cfg, &mut RandomStream::new(7)).unwrap()
}

fn bench_apply_s(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_s");
    for kind in [SensingKind::Gaussian, SensingKind::SubsampledHadamard, SensingKind::TallDft] {
        let pr = problem(kind, f64::INFINITY);
        let sys = StackedSystem::unconstrained(&pr);
        let z = pr.z0();
        group.bench_function(format!("{kind:?}"), |b| b.iter(|| sys.apply_s(black_box(&z)).unwrap()));
        let r = sys.apply_s(&z).unwrap();
        group.bench_function(format!("{kind:?}-adjoint"), |b| b.iter(|| sys.apply_s_adjoint(black_box(&r)).unwrap()));
    }
    group.finish();
}

fn bench_solvers(c: &mut Criterion) {
    let pr = problem(SensingKind::SubsampledHadamard, 30.0);
    let w = default_w(pr.model, pr.m, pr.n, pr.p, &WeightHint::OnesOnGains).unwrap();
    let mut group = c.benchmark_group("solve");
    group.sample_size(20);
    group.bench_function("lls", |b| {
        b.iter(|| {
            let sys = StackedSystem::new(&pr, w.clone(), C64::from(1.0)).unwrap();
            solve_lls(&sys, &LlsConfig::default()).unwrap()
        })
    });
    group.bench_function("spectral", |b| {
        b.iter(|| solve_spectral(&StackedSystem::unconstrained(&pr), &SpectralConfig::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_fwht, bench_apply_s, bench_solvers);
criterion_main!(benches);
