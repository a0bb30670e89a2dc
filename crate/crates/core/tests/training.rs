mod common;

use oneshot_core::error::Error;
use oneshot_core::kg::{KnowledgeGraph, Triple, Vocab};
use oneshot_core::parallel::ExecMode;
use oneshot_core::predictor::{Mode, Predictor, PredictorConfig};
use oneshot_core::sampler::{Sampler, SamplerConfig};
use oneshot_core::synthetic::{rule_kg, RuleKgConfig};
use oneshot_core::training::{
    batch_gradients, epoch_observation_graph, fit, train_epoch, Optimizer, TrainConfig, TrainItem,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_kg(seed: u64) -> KnowledgeGraph {
    let r = rule_kg(&RuleKgConfig { entities: 40, valid: 5, test: 5, seed, ..Default::default() }).unwrap();
    r.kg.augment_inverse().unwrap()
}

fn small_predictor() -> PredictorConfig {
    PredictorConfig { layers: 2, hidden_dim: 8, ..Default::default() }
}

fn fast() -> TrainConfig {
    TrainConfig { epochs: 2, batch_size: 8, learning_rate: 0.01, ..Default::default() }
}

fn random_kg(n: usize, facts: usize, seed: u64) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    while train.len() < facts {
        let t = Triple::new(rng.gen_range(0..n as u32), rng.gen_range(0..2), rng.gen_range(0..n as u32));
        if !train.contains(&t) {
            train.push(t);
        }
    }
    KnowledgeGraph::new(
        Vocab::from_names((0..n).map(|i| format!("e{i}"))).unwrap(),
        Vocab::from_names(["a", "b"]).unwrap(),
        train,
        vec![],
        vec![],
    )
    .unwrap()
}

#[test]
fn split_consumes_expected_query_facts() {
    let kg = random_kg(300, 1000, 1);
    let s = SamplerConfig::default().with_ratios(0.2, 0.5);
    let mut p = Predictor::new(small_predictor(), kg.num_relations()).unwrap();
    let cfg = TrainConfig { batch_size: 64, ..Default::default() };
    let mut opt = Optimizer::new(cfg.optimizer_config(), &p.params().tensors);
    let stats = train_epoch(&kg, &s, &mut p, &mut opt, &cfg, 1).unwrap();
    assert_eq!(stats.query_facts, 50);
    assert_eq!(stats.queries, 50);

    let aug = kg.augment_inverse().unwrap();
    let mut p = Predictor::new(small_predictor(), aug.num_relations()).unwrap();
    let mut opt = Optimizer::new(cfg.optimizer_config(), &p.params().tensors);
    let stats = train_epoch(&aug, &s, &mut p, &mut opt, &cfg, 1).unwrap();
    assert_eq!(stats.query_facts, 50);
    assert_eq!(stats.queries, 100);
    assert!(stats.missed <= stats.queries);
}

#[test]
fn epochs_never_see_their_query_facts() {
    // train_epoch aborts with a logic error if a query fact or its inverse
    // reaches a subgraph; run many epochs over several graphs.
    for seed in 0..4 {
        let kg = small_kg(seed);
        let s = SamplerConfig::default().with_ratios(1.0, 1.0);
        let mut p = Predictor::new(small_predictor(), kg.num_relations()).unwrap();
        let cfg = TrainConfig { split_fraction: 0.7, ..fast() };
        let mut opt = Optimizer::new(cfg.optimizer_config(), &p.params().tensors);
        for epoch in 0..5 {
            train_epoch(&kg, &s, &mut p, &mut opt, &cfg, epoch).unwrap();
        }
    }
}

#[test]
fn duplicate_facts_are_blocked_from_observation() {
    let kg = KnowledgeGraph::new(
        Vocab::from_names(["a", "b", "c"]).unwrap(),
        Vocab::from_names(["r"]).unwrap(),
        vec![Triple::new(0, 0, 1), Triple::new(0, 0, 1), Triple::new(1, 0, 2)],
        vec![],
        vec![],
    )
    .unwrap()
    .augment_inverse()
    .unwrap();
    let query = [Triple::new(0, 0, 1), Triple::new(1, 1, 0)];
    // Observed ids 1 and 4 are the duplicate copy and its mirror.
    let g = epoch_observation_graph(&kg, &[1, 2, 4, 5], &query);
    assert_eq!(g.num_edges(), 2);
    assert!(!g.contains(&Triple::new(0, 0, 1)) && !g.contains(&Triple::new(1, 1, 0)));
}

#[test]
fn frozen_batch_loss_decreases() {
    let kg = random_kg(12, 30, 4).augment_inverse().unwrap();
    let graph = kg.adjacency();
    let sampler = Sampler::new(graph, SamplerConfig::default().with_ratios(1.0, 1.0)).unwrap();
    let items: Vec<TrainItem> = kg.train()[..8]
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let sub = sampler.extract(t.head, t.rel).unwrap();
            TrainItem { answer: sub.local_id(t.tail).unwrap(), sub, relation: t.rel, seed: i as u64 }
        })
        .collect();
    let cfg = PredictorConfig { dropout: 0.0, ..small_predictor() };
    let mut p = Predictor::new(cfg, kg.num_relations()).unwrap();
    let tc = TrainConfig::default();
    let mut opt = Optimizer::new(tc.optimizer_config(), &p.params().tensors);
    let loss = |p: &Predictor| -> f64 {
        batch_gradients(p, &items, false, ExecMode::Sequential, true).unwrap().0.iter().sum()
    };
    let before = loss(&p);
    for _ in 0..50 {
        let (_, mut g) = batch_gradients(&p, &items, true, ExecMode::Sequential, true).unwrap();
        for m in &mut g {
            m.data.iter_mut().for_each(|x| *x /= items.len() as f64);
        }
        opt.step(&mut p.params_mut().tensors, &g);
    }
    let after = loss(&p);
    assert!(after < before, "{before} -> {after}");
}

#[test]
fn identical_seeds_give_identical_trajectories() {
    let kg = small_kg(2);
    let s = SamplerConfig::default().with_ratios(0.5, 0.5);
    let run = |exec| {
        let cfg = TrainConfig { exec, ..fast() };
        fit(&kg, &s, &small_predictor(), &cfg).unwrap()
    };
    let a = run(ExecMode::Parallel);
    let b = run(ExecMode::Parallel);
    let c = run(ExecMode::Sequential);
    assert_eq!(a.checkpoint, b.checkpoint);
    assert_eq!(a.checkpoint, c.checkpoint);
    let strip = |r: &oneshot_core::training::TrainReport| {
        r.epochs.iter().map(|e| (e.stats.mean_loss, e.valid)).collect::<Vec<_>>()
    };
    assert_eq!(strip(&a.report), strip(&c.report));
}

#[test]
fn full_ratios_train_on_the_observed_graph() {
    let kg = small_kg(3);
    let graph = kg.adjacency();
    let sampler = Sampler::new(graph, SamplerConfig::default().with_ratios(1.0, 1.0)).unwrap();
    let p = Predictor::new(PredictorConfig { dropout: 0.0, ..small_predictor() }, kg.num_relations()).unwrap();
    let n = kg.num_entities();
    let edges: Vec<(u32, u32, u32)> = graph.triples().iter().map(|t| (t.head, t.rel, t.tail)).collect();
    for t in kg.train().iter().step_by(17) {
        let sampled = sampler.extract(t.head, t.rel).unwrap();
        assert_eq!(sampled.num_entities(), n);
        assert_eq!(sampled.num_edges(), graph.num_edges());
        let whole = common::subgraph(n, t.head, t.rel, &edges);
        let (la, ga) = p.loss_and_grad(&sampled, t.rel, t.tail, Mode::Eval).unwrap();
        let (lb, gb) = p.loss_and_grad(&whole, t.rel, t.tail, Mode::Eval).unwrap();
        assert_eq!(la, lb);
        assert_eq!(ga, gb);
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_alone() {
    let kg = small_kg(5);
    let s = SamplerConfig::default().with_ratios(0.5, 0.5);
    let mut p = Predictor::new(small_predictor(), kg.num_relations()).unwrap();
    let before = p.params().clone();
    let cfg = TrainConfig { learning_rate: 0.0, ..fast() };
    let mut opt = Optimizer::new(cfg.optimizer_config(), &p.params().tensors);
    train_epoch(&kg, &s, &mut p, &mut opt, &cfg, 0).unwrap();
    assert_eq!(p.params(), &before);
}

#[test]
fn non_finite_loss_aborts_with_location() {
    let kg = small_kg(6);
    let s = SamplerConfig::default().with_ratios(1.0, 1.0);
    let mut p = Predictor::new(small_predictor(), kg.num_relations()).unwrap();
    for t in &mut p.params_mut().tensors {
        t.data.iter_mut().for_each(|x| *x = f64::NAN);
    }
    let cfg = fast();
    let mut opt = Optimizer::new(cfg.optimizer_config(), &p.params().tensors);
    match train_epoch(&kg, &s, &mut p, &mut opt, &cfg, 0) {
        Err(Error::NonFiniteLoss { step, .. }) => assert_eq!(step, 0),
        other => panic!("expected a non-finite loss error, got {other:?}"),
    }
}

#[test]
fn report_bookkeeping() {
    let kg = small_kg(7);
    let s = SamplerConfig::default().with_ratios(0.5, 0.5);
    let one = fit(&kg, &s, &small_predictor(), &TrainConfig { epochs: 1, ..fast() }).unwrap();
    assert_eq!(one.report.epochs.len(), 1);
    assert_eq!(one.report.best_epoch, 1);
    assert_eq!(one.report.to_jsonl().unwrap().lines().count(), 1);
    assert!(matches!(
        fit(&kg, &s, &small_predictor(), &TrainConfig { epochs: 0, ..fast() }),
        Err(Error::Config { .. })
    ));
}
