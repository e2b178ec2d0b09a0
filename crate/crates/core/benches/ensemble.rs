use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use grade2::config::parse_config;
use grade2::experiments::run_ensemble;
use grade2::par::Execution;
use grade2::runner::study_from_config;

const CONFIG: &str = r#"{
    "geometry": {"n_radial": 16, "n_angular_modes": 8},
    "basis": {"n_modes": 8},
    "noise": {"channels": [{"sigma": 0.5, "rho": 0.2, "shape_mode_index": 0}]},
    "time": {"t_final": 0.25, "dt": 0.00048828125}
}"#;

fn ensemble_execution(c: &mut Criterion) {
    let cfg = parse_config(CONFIG).unwrap();
    let mut study = study_from_config(&cfg, cfg.basis.n_modes).unwrap();
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    for paths in [16usize, 64] {
        for exec in [Execution::Sequential, Execution::Parallel] {
            study.exec = exec;
            let id = BenchmarkId::new(format!("{exec:?}").to_lowercase(), paths);
            group.bench_with_input(id, &paths, |b, &p| {
                b.iter(|| run_ensemble(&study, p, 7, 4.0).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, ensemble_execution);
criterion_main!(benches);
