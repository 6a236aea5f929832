use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use kisin_core::{integral_descent, run_family_descent, DiscRing, FamilyInstance, LambdaFamily, RetryPolicy};

fn series(c: &mut Criterion) {
    let ring = DiscRing::new(3, 109, 13);
    let fam = LambdaFamily::new(ring);
    c.bench_function("lambda_family p=3 D=109", |b| b.iter(|| LambdaFamily::new(black_box(ring))));
    c.bench_function("series mul p=3 D=109", |b| b.iter(|| black_box(&fam.plus).mul(black_box(&fam.minus))));
    c.bench_function("invert_unit p=3 D=109", |b| b.iter(|| black_box(&fam.plus_plus).invert_unit().unwrap()));
    c.bench_function("frobenius p=3 D=109", |b| b.iter(|| black_box(&fam.lambda).frobenius()));
}

fn pipelines(c: &mut Criterion) {
    let policy = RetryPolicy::default();
    let mut group = c.benchmark_group("pipelines");
    group.sample_size(20);
    for (p, h, s) in [(3u64, 7u32, 3i64), (3, 10, 3), (5, 11, 3)] {
        let inst = FamilyInstance::with_ap_parts(p, h, s, 1);
        group.bench_function(format!("descend ({p}, {h}, p^{s})"), |b| {
            b.iter(|| run_family_descent(black_box(&inst), policy).unwrap())
        });
    }
    let inst = FamilyInstance::with_ap_parts(3, 7, 3, 1);
    group.bench_function("integral-descend (3, 7, 27)", |b| {
        b.iter(|| integral_descent(black_box(&inst), policy).unwrap())
    });
    group.finish();
}

criterion_group!(benches, series, pipelines);
criterion_main!(benches);
