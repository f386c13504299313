use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use drlatent::batch::{self, Exec};
use drlatent::forecast::{run_forecast, ForecastConfig, Frame, Method};
use drlatent::regressors::{cross_validate, DesignMatrix, RegressorSpec};
use drlatent::synthetic::{generate, GeneratorConfig};

fn frames(users: usize) -> Vec<Frame> {
    let cfg = GeneratorConfig {
        days: 21,
        ..Default::default()
    };
    (0..users)
        .map(|u| Frame::from_series(&generate(&format!("u{u}"), &cfg, 1).unwrap().series))
        .collect()
}

fn per_user(c: &mut Criterion) {
    let frames = frames(8);
    let config = ForecastConfig {
        max_iter: 30,
        ..Default::default()
    };
    let mut group = c.benchmark_group("per_user_ols_hmm");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| {
                batch::map(exec, &frames, |f| {
                    let (train, test) = f.split_at(24 * 14);
                    run_forecast(
                        "u",
                        Method::Latent(drlatent::forecast::Family::Ols),
                        &train,
                        &test,
                        &config,
                        None,
                    )
                    .unwrap()
                    .mape
                })
            })
        });
    }
    group.finish();
}

fn cv_grid(c: &mut Criterion) {
    let f = &frames(1)[0];
    let rows: Vec<Vec<f64>> = (5..f.len())
        .map(|t| drlatent::forecast::covariates_at(f, t, None).unwrap().to_vec())
        .collect();
    let data = DesignMatrix::new(&rows, f.consumption[5..].to_vec()).unwrap();
    let grid: Vec<RegressorSpec> = [1, 3, 5, 10, 20, 40]
        .iter()
        .map(|&k| RegressorSpec::Knn { k, standardize: true })
        .collect();
    let mut group = c.benchmark_group("knn_cv");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| cross_validate(&data, &grid, 5, exec).unwrap().best)
        });
    }
    group.finish();
}

criterion_group!(benches, per_user, cv_grid);
criterion_main!(benches);
