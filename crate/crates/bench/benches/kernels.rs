use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use wtbridge_core::analysis::welch_psd;
use wtbridge_core::bridge::synthetic::greatbelt_like;
use wtbridge_core::campaign::{run_realisation, Job};
use wtbridge_core::config::SimulationConfig;
use wtbridge_core::fields::{TurbulenceSpec, WindField};
use wtbridge_core::newmark::ModalIntegrator;
use wtbridge_core::Scenario;

fn newmark(c: &mut Criterion) {
    let bridge = greatbelt_like();
    let sys = ModalIntegrator::new(&bridge.modal_matrices(), 0.02);
    let n = sys.dofs();
    let (mut q, mut v, mut a) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let f = vec![1.0e3; n];
    c.bench_function("newmark 30-mode step", |b| {
        b.iter(|| sys.step(&mut q, &mut v, &mut a, black_box(&f)))
    });
}

fn wind(c: &mut Criterion) {
    let bridge = greatbelt_like();
    let spec = TurbulenceSpec {
        mean_speed: 22.5,
        ..Default::default()
    };
    let mut g = c.benchmark_group("wind field");
    g.sample_size(10);
    g.bench_function("201 stations, 120 s", |b| {
        b.iter(|| WindField::generate(&spec, bridge.nodes(), 0.1, 120.0, black_box(1)).unwrap())
    });
    g.finish();
}

fn welch(c: &mut Criterion) {
    let x: Vec<f64> = (0..6000).map(|i| (i as f64 * 0.063).sin() + (i as f64 * 0.17).cos()).collect();
    c.bench_function("welch 6000 samples", |b| b.iter(|| welch_psd(black_box(&x), 0.1, 750).unwrap()));
}

fn coupled(c: &mut Criterion) {
    let mut cfg = SimulationConfig::default();
    cfg.simulation.run_up = 0.0;
    cfg.simulation.duration = 10.0;
    let res = cfg.resolve().unwrap();
    let mut g = c.benchmark_group("coupled run");
    g.sample_size(10);
    for s in Scenario::ALL {
        g.bench_function(format!("{} 10 s", s.label()), |b| {
            b.iter(|| {
                run_realisation(
                    &res,
                    Job {
                        scenario: s,
                        realisation: 0,
                    },
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, newmark, wind, welch, coupled);
criterion_main!(benches);
