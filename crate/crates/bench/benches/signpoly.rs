use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use guidelab::signpoly::build_sign_poly;

fn build(c: &mut Criterion) {
    let mut group = c.benchmark_group("sign_poly_build");
    group.sample_size(10);
    for (delta, eps) in [(0.5, 0.1), (0.2, 0.1), (0.1, 0.05)] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{delta}_{eps}")),
            &(delta, eps),
            |b, &(d, e)| b.iter(|| build_sign_poly(black_box(d), black_box(e)).unwrap()),
        );
    }
    group.finish();
}

fn eval(c: &mut Criterion) {
    let poly = build_sign_poly(0.1, 0.05).unwrap();
    c.bench_function("sign_poly_eval_grid_1k", |b| {
        b.iter(|| {
            (0..1000)
                .map(|j| poly.eval(-2.0 + 4.0 * j as f64 / 999.0).unwrap())
                .sum::<f64>()
        })
    });
}

criterion_group!(benches, build, eval);
criterion_main!(benches);
