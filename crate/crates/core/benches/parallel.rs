use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use intflow::fields::check_invariant_measure_with;
use intflow::maps::{builtin, Params};
use intflow::par::Exec;
use intflow::rotation::{sweep, RotationConfig};

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn lyness2() -> intflow::MapSpec {
    let p: Params = [("a".to_string(), 2.0)].into_iter().collect();
    builtin("lyness", &p).unwrap()
}

fn bench_sweep(c: &mut Criterion) {
    let m = lyness2();
    let mu = m.multiplier("xy").unwrap().field.clone();
    let ray = m.default_ray().unwrap().clone();
    let mut g = c.benchmark_group("sweep_lyness_20");
    g.sample_size(10);
    for (name, exec) in MODES {
        let rc = RotationConfig {
            exec,
            ..Default::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(name), &rc, |b, rc| {
            b.iter(|| black_box(sweep(&m, &mu, &ray, 20, rc).unwrap()))
        });
    }
    g.finish();
}

fn bench_measure(c: &mut Criterion) {
    let m = lyness2();
    let mu = m.multiplier("xy").unwrap().field.clone();
    let mut g = c.benchmark_group("measure_lyness_1e6");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| {
                black_box(
                    check_invariant_measure_with(
                        &m,
                        &mu,
                        (&[1.0, 1.0], &[2.0, 2.0]),
                        1_000_000,
                        7,
                        exec,
                    )
                    .unwrap(),
                )
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_sweep, bench_measure);
criterion_main!(benches);
