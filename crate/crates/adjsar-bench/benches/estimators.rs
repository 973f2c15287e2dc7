use adjsar::estimate::{adjusted_qmle, qmle};
use adjsar::infer::{build_qform, lr_cdf_at_zero, saddlepoint_ci};
use adjsar::sar::SpatialContext;
use adjsar::SarData;
use adjsar_bench::{instance, ws_weights};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn spectral(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectral_context");
    g.sample_size(10);
    for n in [100, 200, 400] {
        let w = ws_weights(n, 5, 0.2, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| b.iter(|| SpatialContext::new(w.clone()).unwrap()));
    }
    g.finish();
}

fn design(c: &mut Criterion) {
    let d = instance(200, 2);
    c.bench_function("sar_data_200", |b| {
        b.iter(|| SarData::new(d.ctx().clone(), d.x().clone(), d.y().clone()).unwrap())
    });
}

fn estimators(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimate");
    for n in [100, 200, 400] {
        let d = instance(n, 3);
        g.bench_with_input(BenchmarkId::new("qmle", n), &d, |b, d| b.iter(|| qmle(black_box(d)).unwrap()));
        g.bench_with_input(BenchmarkId::new("aqmle", n), &d, |b, d| b.iter(|| adjusted_qmle(black_box(d)).unwrap()));
    }
    g.finish();
}

fn inference(c: &mut Criterion) {
    let d = instance(200, 4);
    let fit = adjusted_qmle(&d).unwrap();
    let spec = build_qform(&d, 0.45, fit.lambda_hat, &fit.beta_hat, fit.sigma2_hat).unwrap();
    c.bench_function("lugannani_rice_200", |b| b.iter(|| lr_cdf_at_zero(black_box(&spec)).unwrap()));
    c.bench_function("build_qform_200", |b| {
        b.iter(|| build_qform(&d, 0.45, fit.lambda_hat, &fit.beta_hat, fit.sigma2_hat).unwrap())
    });
    let mut g = c.benchmark_group("saddlepoint_ci");
    g.sample_size(10);
    g.bench_function("200", |b| b.iter(|| saddlepoint_ci(&d, fit.lambda_hat, 0.025, 0.025).unwrap()));
    g.finish();
}

criterion_group!(benches, spectral, design, estimators, inference);
criterion_main!(benches);
