use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use fracrep_core::fractional_calculus::{gls_integral, lambda_alpha, weighted_norm};
use fracrep_core::path_simulation::{JointSampler, PathSampler};
use fracrep_core::process_models::fbm_kernel;
use fracrep_core::replication::{
    build_replicating_strategy, case2_gadget, level_grid, replication_grid,
};
use fracrep_core::{
    CovarianceModel, FracOrder, PathFn, PiecewiseLinear, ReplicationConfig, SampleGrid,
    SamplingMethod,
};

fn sampler(h: f64, grid: Arc<SampleGrid>, method: SamplingMethod) -> PathSampler {
    PathSampler::new(&CovarianceModel::fbm(h, 1.0).unwrap(), grid, method).unwrap()
}

fn kernels(c: &mut Criterion) {
    c.bench_function("fbm_kernel H=0.7", |b| {
        b.iter(|| fbm_kernel(0.7, black_box(0.9), black_box(0.3)).unwrap())
    });
}

fn sampling(c: &mut Criterion) {
    let uniform = Arc::new(SampleGrid::uniform(1.0, 4096).unwrap());
    let circulant = sampler(0.7, uniform, SamplingMethod::Circulant);
    c.bench_function("circulant fBm path, 4096 cells", |b| {
        b.iter(|| circulant.sample(1, black_box(0)))
    });
    let small = Arc::new(SampleGrid::uniform(1.0, 256).unwrap());
    let cholesky = sampler(0.7, small.clone(), SamplingMethod::Cholesky);
    c.bench_function("Cholesky fBm path, 256 cells", |b| {
        b.iter(|| cholesky.sample(1, black_box(0)))
    });
    let joint = JointSampler::new(0.7, small).unwrap();
    c.bench_function("joint (W, G) path, 256 cells", |b| {
        b.iter(|| joint.sample(1, black_box(0)))
    });
}

fn integrals(c: &mut Criterion) {
    let grid = Arc::new(SampleGrid::uniform(1.0, 64).unwrap());
    let path = sampler(0.7, grid, SamplingMethod::Circulant).sample(3, 0);
    let pl = PiecewiseLinear::from_path(&path);
    let g = PathFn::Linear(pl.clone());
    let f = PathFn::Polynomial(vec![0.3, 1.0, -0.8]);
    let order = FracOrder::new(0.4).unwrap();
    c.bench_function("GLS integral, polynomial against 64-cell path", |b| {
        b.iter(|| gls_integral(&f, &g, order, 0.0, 1.0).unwrap())
    });
    c.bench_function("GLS integral, path against itself", |b| {
        b.iter(|| gls_integral(&g, &g, order, 0.0, 1.0).unwrap())
    });
    c.bench_function("weighted norm of a quadratic", |b| {
        b.iter(|| weighted_norm(&f, order, 0.0, 1.0).unwrap())
    });
    c.bench_function("Lambda_alpha of a 64-cell path", |b| {
        b.iter(|| lambda_alpha(&pl, order))
    });
}

fn replication(c: &mut Criterion) {
    let config = ReplicationConfig::default();
    let grid = Arc::new(replication_grid(&config, 1.0).unwrap());
    let path = sampler(config.h, grid, SamplingMethod::Cholesky).sample(5, 0);
    let t = level_grid(config.theta, 1.0, config.n_levels + 1).unwrap();
    c.bench_function("Case II gadget, level 5", |b| {
        b.iter(|| case2_gadget(&path, 5, t[4], t[5], &config, black_box(1e-3)).unwrap())
    });
    let mut group = c.benchmark_group("replication");
    group.sample_size(10);
    group.bench_function("strategy for B^H(T), 10 levels", |b| {
        b.iter(|| build_replicating_strategy(&path, &path.values, &config).unwrap())
    });
    group.finish();
}

criterion_group!(benches, kernels, sampling, integrals, replication);
criterion_main!(benches);
