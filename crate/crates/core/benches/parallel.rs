use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spectral_plane::config::{BranchConfig, DEFAULT_GAP_MARGIN};
use spectral_plane::exec::Execution;
use spectral_plane::oracle::fd_jacobian;
use spectral_plane::quadrature::QuadOptions;
use spectral_plane::search::{default_box, hunt, scan, Model, SearchOptions};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn bench_scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("scan");
    group.sample_size(10);
    let bounds = default_box(3, DEFAULT_GAP_MARGIN);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "g3-grid16"), &exec, |b, &exec| {
            b.iter(|| scan(&bounds, 16, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_fd_jacobian(c: &mut Criterion) {
    let mut group = c.benchmark_group("fd_jacobian");
    group.sample_size(10);
    let cfg = BranchConfig::at_nodal_locus(&[0.4, 0.9, 1.5]).unwrap();
    let quad = QuadOptions::default();
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "g3"), &exec, |b, &exec| {
            b.iter(|| fd_jacobian(&cfg, 1e-3, &quad, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_hunt(c: &mut Criterion) {
    let mut group = c.benchmark_group("hunt");
    group.sample_size(10);
    let cfg = BranchConfig::at_nodal_locus(&[1.0]).unwrap();
    for (name, exec) in MODES {
        let opts = SearchOptions {
            exec,
            ..SearchOptions::default()
        };
        group.bench_with_input(
            BenchmarkId::new(name, "g1-exact-budget100"),
            &opts,
            |b, opts| {
                b.iter(|| {
                    hunt(&cfg, cfg.theta(), 64, 1e-2, 100, Model::ExactElliptic, opts).unwrap()
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_scan, bench_fd_jacobian, bench_hunt);
criterion_main!(benches);
