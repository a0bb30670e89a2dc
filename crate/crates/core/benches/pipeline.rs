use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oneshot_core::eval::{coverage_ratio, evaluate, EvalOptions};
use oneshot_core::kg::{KnowledgeGraph, Split};
use oneshot_core::parallel::ExecMode;
use oneshot_core::predictor::{Predictor, PredictorConfig};
use oneshot_core::sampler::{Heuristic, SamplerConfig};
use oneshot_core::search::{ForestConfig, RandomForest};
use oneshot_core::synthetic::{rule_kg, RuleKgConfig};
use oneshot_core::training::{train_epoch, Optimizer, TrainConfig};

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn graph() -> KnowledgeGraph {
    rule_kg(&RuleKgConfig::default()).unwrap().kg.augment_inverse().unwrap()
}

fn bench_coverage(c: &mut Criterion) {
    let kg = graph();
    let mut group = c.benchmark_group("coverage");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("ppr", name), &exec, |b, &exec| {
            b.iter(|| {
                coverage_ratio(&kg, Split::Test, &[Heuristic::Ppr], &[0.1, 0.2, 0.5], &SamplerConfig::default(), exec)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_eval(c: &mut Criterion) {
    let kg = graph();
    let sampler = SamplerConfig::default().with_ratios(0.2, 0.2);
    let p = Predictor::new(PredictorConfig::default(), kg.num_relations()).unwrap();
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = EvalOptions { exec, max_queries: None };
        group.bench_function(name, |b| b.iter(|| evaluate(&kg, Split::Valid, &sampler, &p, &opts).unwrap()));
    }
    group.finish();
}

fn bench_train(c: &mut Criterion) {
    let kg = graph();
    let sampler = SamplerConfig::default().with_ratios(0.2, 0.2);
    let mut group = c.benchmark_group("train_epoch");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = TrainConfig { exec, ..Default::default() };
        group.bench_function(name, |b| {
            b.iter(|| {
                let mut p = Predictor::new(PredictorConfig::default(), kg.num_relations()).unwrap();
                let mut opt = Optimizer::new(cfg.optimizer_config(), &p.params().tensors);
                black_box(train_epoch(&kg, &sampler, &mut p, &mut opt, &cfg, 1).unwrap())
            })
        });
    }
    group.finish();
}

fn bench_forest(c: &mut Criterion) {
    let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 29.0, ((i * 7) % 11) as f64 / 10.0]).collect();
    let y: Vec<f64> = x.iter().map(|r| -(r[0] - 0.7).powi(2) + 0.1 * r[1]).collect();
    let cfg = ForestConfig::default();
    let mut group = c.benchmark_group("forest_fit");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| RandomForest::fit(black_box(&x), &y, &cfg, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_coverage, bench_eval, bench_train, bench_forest);
criterion_main!(benches);
