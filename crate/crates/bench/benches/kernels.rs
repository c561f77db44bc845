//! Microbenchmarks for the numeric kernels: Wright series, incomplete beta,
//! one-dimensional and reduced convolution nodes.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use expconv_core::density::{DensitySpec, Variant};
use expconv_core::oracle::Oracle;
use expconv_core::special::inc_beta;
use expconv_core::wright::wright_series_log;

fn bench_wright(c: &mut Criterion) {
    c.bench_function("wright_series_t1e3", |b| {
        b.iter(|| wright_series_log(black_box(1.5), 0.0, black_box(1e3)).unwrap())
    });
}

fn bench_inc_beta(c: &mut Criterion) {
    c.bench_function("inc_beta", |b| {
        b.iter(|| inc_beta(black_box(0.013), black_box(2.5), black_box(1.5)).unwrap())
    });
}

fn bench_conv_nodes(c: &mut Criterion) {
    let d1 = Oracle::new(DensitySpec::new(1, 1.0, 0.5, Variant::PurePower).unwrap()).unwrap();
    c.bench_function("conv_node_d1_n2", |b| {
        b.iter(|| d1.conv_at(black_box(2), black_box(7.0)).unwrap())
    });
    let d3 = Oracle::new(DensitySpec::new(3, 1.0, 1.0, Variant::PurePower).unwrap()).unwrap();
    c.bench_function("conv_node_d3_n2", |b| {
        b.iter(|| d3.conv_at(black_box(2), black_box(7.0)).unwrap())
    });
}

criterion_group!(benches, bench_wright, bench_inc_beta, bench_conv_nodes);
criterion_main!(benches);
