use capa_core::baselines::fourier::run_fourier;
use capa_core::baselines::conventional;
use capa_core::baselines::spda::{run_spda, SpdaMode};
use capa_core::solver::{evaluate_se, init_beamformers, received_fields, Wmmse};
use capa_core::{build_channel_set, Scenario, SolverConfig};
use criterion::{criterion_group, criterion_main, Criterion};

fn scenario() -> Scenario {
    let mut s = Scenario::desk(1);
    s.budget = 1e-3;
    s
}

fn channels(c: &mut Criterion) {
    let s = scenario();
    c.bench_function("channel_set/desk", |b| b.iter(|| build_channel_set(&s).unwrap()));
}

fn steps(c: &mut Criterion) {
    let s = scenario();
    let set = build_channel_set(&s).unwrap();
    let mut group = c.benchmark_group("step");
    for (name, config) in [("woodbury", SolverConfig::default()), ("direct", conventional(&SolverConfig::default()))] {
        let init = init_beamformers(&s, &set, &config);
        let solver = Wmmse::new(&set.link, s.noise_variance, s.budget, init.v, config).unwrap();
        group.bench_function(name, |b| b.iter(|| solver.clone().step().unwrap()));
    }
    group.finish();

    let config = SolverConfig::default();
    let state = init_beamformers(&s, &set, &config);
    c.bench_function("evaluate_se", |b| {
        b.iter(|| evaluate_se(&set.link, &state.v, s.noise_variance).unwrap())
    });
    c.bench_function("received_fields", |b| b.iter(|| received_fields(&set.link, &state.v)));
}

fn methods(c: &mut Criterion) {
    let s = scenario();
    let config = SolverConfig {
        max_iters: 20,
        ..SolverConfig::default()
    };
    let mut group = c.benchmark_group("method");
    group.sample_size(10);
    group.bench_function("proposed", |b| b.iter(|| capa_core::run(&s, &config).unwrap()));
    group.bench_function("fourier", |b| b.iter(|| run_fourier(&s, 4, &config).unwrap()));
    let spacing = s.wavelength / 2.0;
    group.bench_function("spda", |b| {
        b.iter(|| run_spda(&s, spacing, SpdaMode::SvdWaterfill, &config).unwrap())
    });
    group.finish();
}

criterion_group!(benches, channels, steps, methods);
criterion_main!(benches);
