use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use dbcs_bench::benchmark_scenario;
use dbcs_core::fixtures::table1;
use dbcs_core::*;

fn dag_construction(c: &mut Criterion) {
    let table = table1();
    c.bench_function("build_dag/table1", |b| {
        b.iter(|| {
            ChannelRanking::from_table(black_box(&table))
                .unwrap()
                .build_dag()
                .unwrap()
        })
    });
    let dag = ChannelRanking::from_table(&table)
        .unwrap()
        .build_dag()
        .unwrap();
    c.bench_function("enumerate_model_keys/table1", |b| {
        b.iter(|| enumerate_model_keys(black_box(&dag)))
    });
}

fn selection(c: &mut Criterion) {
    let s = benchmark_scenario(2024).unwrap();
    let row = s.test.row(0);
    for theta in [0.5, 0.9, 1.0] {
        let theta = Threshold::new(theta).unwrap();
        c.bench_function(&format!("dbcs_select/theta_{theta}"), |b| {
            b.iter(|| dbcs_select(&s.dag, &s.registry, black_box(&row), theta).unwrap())
        });
    }
    c.bench_function("general_select/theta_1", |b| {
        let models = LazyRegistry::new(&s.train, &ClassifierConfig::default()).unwrap();
        let channels = s.test.channels.clone();
        b.iter(|| {
            general_select(
                &channels,
                &models,
                black_box(&row),
                Threshold::new(1.0).unwrap(),
            )
            .unwrap()
        })
    });
    let mut group = c.benchmark_group("run_experiment");
    group.sample_size(10);
    group.bench_function("theta_1", |b| {
        b.iter(|| {
            run_experiment(&s.dag, &s.registry, &s.test, Threshold::new(1.0).unwrap()).unwrap()
        })
    });
    group.finish();
}

fn knn(c: &mut Criterion) {
    let s = benchmark_scenario(2024).unwrap();
    let (features, labels) = s.train.project(&s.train.channels).unwrap();
    let width = s.train.channels.len() * s.train.feature_width;
    let model = KnnModel::fit(features, labels, width, s.train.n_tasks(), 4).unwrap();
    let (query, _) = s.test.project(&s.test.channels).unwrap();
    let query = &query[..width];
    c.bench_function("knn/predict_14ch_2100", |b| {
        b.iter(|| model.predict(black_box(query)).unwrap())
    });
    c.bench_function("train_registry/118_keys", |b| {
        let cfg = ClassifierConfig::default();
        b.iter_batched(
            || s.train.clone(),
            |train| train_registry(&train, &s.dag, &cfg).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, dag_construction, selection, knn);
criterion_main!(benches);
