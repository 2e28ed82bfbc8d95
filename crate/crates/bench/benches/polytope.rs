use criterion::{criterion_group, criterion_main, Criterion};
use dp_polytope::optimize::trial_rng;
use dp_polytope::{
    analyze, build_system, canonical_form, enumerate_tight_family, mat_rank, simplex_optimize, vertex_oracle,
    UtilityMatrix,
};
use dp_polytope_bench::{five_by_five, t};
use std::hint::black_box;

fn linear_algebra(c: &mut Criterion) {
    let a = five_by_five();
    c.bench_function("rank 5x5", |b| b.iter(|| mat_rank(black_box(&a))));
    let sys = build_system(5, &t(2));
    c.bench_function("analyze 5x5", |b| b.iter(|| analyze(black_box(&a), &sys).unwrap()));
    c.bench_function("canonical form 5x5", |b| b.iter(|| canonical_form(black_box(&a)).unwrap()));
}

fn enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("enumeration");
    group.sample_size(10);
    group.bench_function("oracle n=3", |b| b.iter(|| vertex_oracle(3, &t(2), None).unwrap()));
    group.bench_function("tight family n=4", |b| b.iter(|| enumerate_tight_family(4, &t(2))));
    group.finish();
}

fn optimization(c: &mut Criterion) {
    let sys = build_system(4, &t(2));
    let utilities: Vec<UtilityMatrix> =
        (0..16).map(|k| UtilityMatrix::random_integer(4, 9, &mut trial_rng(1, k))).collect();
    c.bench_function("simplex n=4 x16", |b| {
        b.iter(|| {
            for u in &utilities {
                black_box(simplex_optimize(u, &sys).unwrap());
            }
        })
    });
}

criterion_group!(benches, linear_algebra, enumeration, optimization);
criterion_main!(benches);
