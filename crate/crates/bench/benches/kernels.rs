use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hlmax_bench::{input, shear, vertical_shear, SIZES};
use hlmax_core::averages::{average_exact_grid, average_quadrature, maximal_brute};
use hlmax_core::grid::littlewood_paley;
use hlmax_core::rects::{cover, overlap};
use hlmax_core::tiles::{analyze, Scales};
use hlmax_core::QuadratureOptions;

fn spectral(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectral");
    for n in SIZES {
        let f = input(n);
        g.bench_with_input(BenchmarkId::new("fft2", 1 << n), &f, |b, f| {
            b.iter(|| f.compute_spectrum())
        });
        g.bench_with_input(BenchmarkId::new("littlewood_paley", 1 << n), &f, |b, f| {
            b.iter(|| littlewood_paley(f, n as i32 - 3).unwrap())
        });
    }
    g.finish();
}

fn averages(c: &mut Criterion) {
    let mut g = c.benchmark_group("averages");
    g.sample_size(10);
    let opts = QuadratureOptions::default();
    for n in SIZES {
        let f = input(n);
        g.bench_with_input(BenchmarkId::new("exact", 1 << n), &f, |b, f| {
            b.iter(|| average_exact_grid(f, &shear(), 4).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("quadrature_columns", 1 << n), &f, |b, f| {
            b.iter(|| average_quadrature(f, &shear(), 4, &opts).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("quadrature_rows", 1 << n), &f, |b, f| {
            b.iter(|| average_quadrature(f, &vertical_shear(), 4, &opts).unwrap())
        });
    }
    let f = input(8);
    g.bench_function("maximal_256", |b| {
        b.iter(|| maximal_brute(&f, &shear(), &opts).unwrap())
    });
    g.finish();
}

fn geometry(c: &mut Criterion) {
    let mut g = c.benchmark_group("geometry");
    g.sample_size(10);
    let grid = input(9).grid();
    g.bench_function("cover_512", |b| b.iter(|| cover(&shear(), grid, 3, 7).unwrap()));
    let cov = cover(&shear(), grid, 3, 7).unwrap();
    g.bench_function("overlap_512", |b| b.iter(|| overlap(&cov, 2, 2)));
    g.finish();
}

fn tiles(c: &mut Criterion) {
    let mut g = c.benchmark_group("tiles");
    g.sample_size(10);
    let f = input(9);
    let scales = Scales { j: 4, k: 5, l: 2 };
    g.bench_function("analyze_512", |b| b.iter(|| analyze(&f, scales, false).unwrap()));
    g.finish();
}

criterion_group!(benches, spectral, averages, geometry, tiles);
criterion_main!(benches);
