use std::hint::black_box;

use adtomo_bench::{blocking_samples, count_table, world};
use adtomo_core::ecosim::run_simulation;
use adtomo_core::forest::{cross_validate_grid, train_forest, FeatureSubset, ForestParams, HyperGrid};
use adtomo_core::stattest::{chi_square_independence, welch_t_test, StatConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn stats(c: &mut Criterion) {
    let cfg = StatConfig::default();
    let mut g = c.benchmark_group("chi_square");
    for width in [8, 64, 512] {
        let (a, b) = count_table(width);
        g.bench_with_input(BenchmarkId::from_parameter(width), &width, |bench, _| {
            bench.iter(|| chi_square_independence([black_box(&a), black_box(&b)], &cfg).unwrap())
        });
    }
    g.finish();

    let x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
    let y: Vec<f64> = (0..200).map(|i| 0.1 + (i as f64 * 0.53).cos()).collect();
    c.bench_function("welch_t_200", |b| b.iter(|| welch_t_test(black_box(&x), black_box(&y)).unwrap()));
}

fn forest(c: &mut Criterion) {
    let samples = blocking_samples(10, 8);
    let mut g = c.benchmark_group("train_forest_1024x8");
    g.sample_size(10);
    for (trees, features) in [(50, FeatureSubset::Sqrt), (200, FeatureSubset::All)] {
        let p = ForestParams {
            n_trees: trees,
            max_depth: None,
            features_per_split: features,
            min_leaf: 1,
        };
        g.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, p| {
            b.iter(|| train_forest(black_box(&samples), p, 1).unwrap())
        });
    }
    g.finish();

    let small = blocking_samples(6, 8);
    let mut g = c.benchmark_group("grid_search");
    g.sample_size(10);
    g.bench_function("default_grid_64x8_4_folds", |b| {
        b.iter(|| cross_validate_grid(black_box(&small), &HyperGrid::default(), 4, 1).unwrap())
    });
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let (w, personas, _) = world("small");
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    g.bench_function("small_one_run", |b| b.iter(|| run_simulation(&w, black_box(&personas), 1, 3).unwrap()));
    g.finish();
}

criterion_group!(benches, stats, forest, simulation);
criterion_main!(benches);
