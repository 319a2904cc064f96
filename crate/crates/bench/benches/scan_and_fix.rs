use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use abutfix_bench::fixture;
use abutfix_core::{fix_loop, scan_boundaries, scan_full, FixConfig, VerifyMode};

fn bench_scan_full(c: &mut Criterion) {
    let (placement, library) = fixture(2_000, 10, 42);
    c.bench_function("scan_full_2k_cells", |b| {
        b.iter(|| scan_full(black_box(&placement), black_box(&library)))
    });
}

fn bench_scan_boundaries(c: &mut Criterion) {
    let (placement, library) = fixture(2_000, 10, 42);
    c.bench_function("scan_boundaries_2k_cells", |b| {
        b.iter(|| scan_boundaries(black_box(&placement), black_box(&library)))
    });
}

fn bench_fix_loop(c: &mut Criterion) {
    let (placement, library) = fixture(2_000, 10, 42);
    let config = FixConfig { seed: 7, max_iterations: 10, verify_mode: VerifyMode::Full };
    c.bench_function("fix_loop_2k_cells", |b| {
        b.iter(|| {
            let mut working = placement.clone();
            fix_loop(black_box(&mut working), black_box(&library), black_box(&config))
                .expect("benchmark fix run")
        })
    });
}

criterion_group!(benches, bench_scan_full, bench_scan_boundaries, bench_fix_loop);
criterion_main!(benches);
