//! Micro-benchmarks for the hot paths: kernel assembly, the Stein
//! Jacobian-diagonal estimator, the order search, and pruning.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use score_dag_bench::gp_dataset;
use score_dag_core::{
    gram, median_bandwidth, prune, score_order, stein_hessian_diag, PruneConfig, DEFAULT_ETA,
};

fn bench_kernel(c: &mut Criterion) {
    let x = gp_dataset(8, 300, 1);
    c.bench_function("median_bandwidth n=300 d=8", |b| {
        b.iter(|| median_bandwidth(&x).unwrap())
    });
    let s = median_bandwidth(&x).unwrap();
    c.bench_function("gram n=300 d=8", |b| b.iter(|| gram(&x, s).unwrap()));
}

fn bench_stein(c: &mut Criterion) {
    let mut group = c.benchmark_group("stein_hessian_diag d=8");
    for n in [200usize, 400] {
        let x = gp_dataset(8, n, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| stein_hessian_diag(x, DEFAULT_ETA).unwrap())
        });
    }
    group.finish();
}

fn bench_order_search(c: &mut Criterion) {
    let x = gp_dataset(6, 300, 3);
    c.bench_function("score_order d=6 n=300", |b| {
        b.iter(|| score_order(&x, DEFAULT_ETA).unwrap())
    });
}

fn bench_prune(c: &mut Criterion) {
    let x = gp_dataset(6, 500, 4);
    let order = score_order(&x, DEFAULT_ETA).unwrap().order;
    c.bench_function("prune d=6 n=500", |b| {
        b.iter(|| prune(&x, &order, &PruneConfig::default()).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_kernel, bench_stein, bench_order_search, bench_prune
}
criterion_main!(benches);
