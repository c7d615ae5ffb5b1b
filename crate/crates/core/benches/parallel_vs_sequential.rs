use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use wiplab_core::dynamics::{DynSystem, Observable, Sampler};
use wiplab_core::paths::{estimate_sigma, PathEnsemble};
use wiplab_core::transport::cost_matrix;
use wiplab_core::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn sampler(exec: Exec) -> Sampler {
    let obs = Observable::parse(&["cos(x)"]).unwrap();
    Sampler::new(DynSystem::lsv(0.25).unwrap(), obs).unwrap().burn_in(100).exec(exec)
}

fn ensembles(c: &mut Criterion) {
    let mut g = c.benchmark_group("lsv_ensemble");
    for (name, exec) in MODES {
        let s = sampler(exec);
        g.bench_function(BenchmarkId::new(name, "m=256,n=1024"), |b| b.iter(|| black_box(s.ensemble(1024, 256, 1).unwrap())));
    }
    g.finish();
}

fn costs(c: &mut Criterion) {
    let s = sampler(Exec::Parallel);
    let a = PathEnsemble::from_sampler(&s, 256, 128, 1).unwrap();
    let b = PathEnsemble::from_sampler(&s, 256, 128, 2).unwrap();
    let mut g = c.benchmark_group("cost_matrix");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, "m=128,n=256"), |bch| bch.iter(|| black_box(cost_matrix(&a, &b, 1.0, exec).unwrap())));
    }
    g.finish();
}

fn sigma(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimate_sigma");
    g.sample_size(10);
    for (name, exec) in MODES {
        let s = sampler(exec);
        g.bench_function(BenchmarkId::new(name, "m=512,n=512"), |b| b.iter(|| black_box(estimate_sigma(&s, 512, 512, 3).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, ensembles, costs, sigma);
criterion_main!(benches);
