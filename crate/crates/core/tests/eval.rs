use oneshot_core::eval::{
    coverage_ratio, evaluate, extrapolation_sweep, random_scorer_mrr, rank_filtered, EvalOptions, FilterIndex,
    MetricAccumulator,
};
use oneshot_core::kg::Split;
use oneshot_core::parallel::ExecMode;
use oneshot_core::predictor::{Predictor, PredictorConfig};
use oneshot_core::sampler::{Heuristic, Sampler, SamplerConfig};
use oneshot_core::synthetic::{rule_kg, RuleKgConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_scorer_matches_harmonic_closed_form() {
    let n = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let trials = 200_000;
    let mut acc = MetricAccumulator::default();
    for _ in 0..trials {
        let scores: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        acc.push(rank_filtered(&scores, rng.gen_range(0..n as u32), &[]).unwrap(), false);
    }
    let mc = acc.finish().mrr;
    let exact = random_scorer_mrr(n);
    assert!((exact - 0.292_896_825_396_825_4).abs() < 1e-12);
    // Standard error of the mean reciprocal rank is below 0.0007 here.
    assert!((mc - exact).abs() < 0.003, "{mc} vs {exact}");
}

#[test]
fn rule_oracle_is_perfect_up_to_coverage() {
    let r = rule_kg(&RuleKgConfig { entities: 200, valid: 40, test: 40, ..Default::default() }).unwrap();
    let kg = r.kg.augment_inverse().unwrap();
    let graph = kg.observation_graph(Split::Valid);
    let filters = FilterIndex::from_kg(&kg);
    let n = kg.num_entities();
    for ratio in [0.02, 0.05, 1.0] {
        let sampler = Sampler::new(&graph, SamplerConfig::default().with_ratios(ratio, 1.0)).unwrap();
        let mut acc = MetricAccumulator::default();
        let mut expected = 0.0;
        for t in kg.valid() {
            let sub = sampler.extract(t.head, t.rel).unwrap();
            let oracle = r.oracle_scores(t.head, t.rel).unwrap();
            let mut scores = vec![f64::NEG_INFINITY; n];
            for &e in &sub.entities {
                scores[e as usize] = oracle[e as usize];
            }
            let known = filters.known_true(t.head, t.rel, t.tail);
            assert!(known.is_empty());
            let rank = rank_filtered(&scores, t.tail, &known).unwrap();
            let missed = !sub.contains(t.tail);
            let closed = if missed {
                let others = (n - sub.num_entities() - 1) as f64;
                1.0 + sub.num_entities() as f64 + others / 2.0
            } else {
                1.0
            };
            assert_eq!(rank, closed);
            expected += 1.0 / closed;
            acc.push(rank, missed);
        }
        let report = acc.finish();
        assert!((report.mrr - expected / kg.valid().len() as f64).abs() < 1e-12);
        if ratio == 1.0 {
            assert_eq!(report.mrr, 1.0);
            assert_eq!(report.missed, 0);
        }
    }
}

#[test]
fn full_ratio_covers_every_answer() {
    let r = rule_kg(&RuleKgConfig { entities: 120, valid: 20, test: 20, ..Default::default() }).unwrap();
    let kg = r.kg.augment_inverse().unwrap();
    let t = coverage_ratio(&kg, Split::Test, &Heuristic::ALL, &[1.0], &SamplerConfig::default(), ExecMode::Parallel)
        .unwrap();
    for h in Heuristic::ALL {
        assert_eq!(t.get(h, 1.0), Some(1.0), "{h}");
    }
    assert_eq!(t.n_queries, 40);
}

fn trained_setup() -> (oneshot_core::kg::KnowledgeGraph, Predictor) {
    let r = rule_kg(&RuleKgConfig { entities: 80, valid: 10, test: 10, ..Default::default() }).unwrap();
    let kg = r.kg.augment_inverse().unwrap();
    let p = Predictor::new(PredictorConfig { layers: 3, hidden_dim: 8, ..Default::default() }, kg.num_relations())
        .unwrap();
    (kg, p)
}

#[test]
fn sweep_cell_reproduces_evaluate() {
    let (kg, p) = trained_setup();
    let base = SamplerConfig::default().with_ratios(0.2, 0.3);
    let opts = EvalOptions::default();
    let direct = evaluate(&kg, Split::Valid, &base, &p, &opts).unwrap();
    let m = extrapolation_sweep(&kg, &p, &base, &[0.1, 0.2, 1.0], &[0.3, 1.0], &opts).unwrap();
    assert_eq!(m.mrr.len(), 3);
    assert_eq!(m.mrr[1][0].to_bits(), direct.mrr.to_bits());
    let one = extrapolation_sweep(&kg, &p, &base, &[0.2], &[0.3], &opts).unwrap();
    assert_eq!(one.mrr, vec![vec![direct.mrr]]);
    assert_eq!(m.to_grid().lines().count(), 4);
    assert!(extrapolation_sweep(&kg, &p, &base, &[], &[0.3], &opts).is_err());
}

#[test]
fn evaluation_is_independent_of_exec_mode() {
    let (kg, p) = trained_setup();
    let cfg = SamplerConfig::default().with_ratios(0.3, 0.5);
    let seq = EvalOptions { exec: ExecMode::Sequential, max_queries: None };
    let par = EvalOptions { exec: ExecMode::Parallel, max_queries: None };
    for split in [Split::Valid, Split::Test] {
        let a = evaluate(&kg, split, &cfg, &p, &seq).unwrap();
        let b = evaluate(&kg, split, &cfg, &p, &par).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_queries, 20);
        assert!(a.hits1 <= a.mrr && a.mrr <= 1.0 && a.hits1 <= a.hits10);
    }
}
