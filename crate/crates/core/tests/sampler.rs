mod common;

use common::{ppr_direct, random_graph};
use oneshot_core::kg::{KnowledgeGraph, ObservedGraph, Split, Triple, Vocab};
use oneshot_core::eval::coverage_ratio;
use oneshot_core::parallel::ExecMode;
use oneshot_core::sampler::{
    ppr_scores, select_entities, Heuristic, Orientation, Sampler, SamplerConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;




#[test]
fn ppr_matches_linear_solve_on_random_graphs() {
    for seed in 0..100 {
        let (n, triples) = random_graph(seed, 50);
        let g = ObservedGraph::new(n, triples.clone());
        let u = (seed as usize * 7) % n;
        for orientation in [Orientation::Row, Orientation::Column] {
            let cfg = SamplerConfig { orientation, ..Default::default() };
            let p = ppr_scores(&g, u as u32, &cfg).unwrap();
            let q = ppr_direct(n, &triples, u, cfg.alpha, orientation);
            for i in 0..n {
                assert!((p[i] - q[i]).abs() < 1e-6, "seed {seed} {orientation:?} entity {i}: {} vs {}", p[i], q[i]);
            }
        }
    }
}

#[test]
fn ppr_matches_linear_solve_at_low_damping() {
    for seed in 100..130 {
        let (n, triples) = random_graph(seed, 30);
        let g = ObservedGraph::new(n, triples.clone());
        let cfg = SamplerConfig { alpha: 0.15, tol: 1e-13, max_iters: 2000, ..Default::default() };
        let p = ppr_scores(&g, 0, &cfg).unwrap();
        let q = ppr_direct(n, &triples, 0, 0.15, Orientation::Row);
        for i in 0..n {
            assert!((p[i] - q[i]).abs() < 1e-9);
        }
    }
}

#[test]
fn ppr_mass_and_anchor_dominance() {
    for seed in 200..300 {
        let (n, triples) = random_graph(seed, 50);
        let g = ObservedGraph::new(n, triples);
        let u = (seed as usize) % n;
        for orientation in [Orientation::Row, Orientation::Column] {
            let cfg = SamplerConfig { orientation, ..Default::default() };
            let p = ppr_scores(&g, u as u32, &cfg).unwrap();
            assert!(p.iter().all(|&x| (0.0..=1.0 + 1e-12).contains(&x)));
            if orientation == Orientation::Column {
                let total: f64 = p.iter().sum();
                assert!(total <= 1.0 + cfg.tol * cfg.max_iters as f64);
            }
            if g.degree(u as u32) > 0 && orientation == Orientation::Row {
                assert!(p.iter().enumerate().all(|(i, &x)| i == u || x < p[u]));
            }
        }
    }
}

#[test]
fn path_graph_keeps_nearest_entities() {
    let mut triples = Vec::new();
    for i in 0..4 {
        triples.push(Triple::new(i, 0, i + 1));
        triples.push(Triple::new(i + 1, 1, i));
    }
    let g = ObservedGraph::new(5, triples.clone());
    let cfg = SamplerConfig::default().with_ratios(0.6, 1.0);
    let p = ppr_scores(&g, 0, &cfg).unwrap();
    let exact = ppr_direct(5, &triples, 0, 0.85, Orientation::Row);
    for w in exact.windows(2) {
        assert!(w[0] > w[1]);
    }
    assert_eq!(select_entities(&p, 0, 3), vec![0, 1, 2]);
    let sub = Sampler::new(&g, cfg).unwrap().extract(0, 0).unwrap();
    assert_eq!(sub.entities, vec![0, 1, 2]);
    assert_eq!(sub.num_edges(), 4);
}

#[test]
fn larger_ratios_nest_smaller_ones() {
    let (n, triples) = random_graph(7, 50);
    let g = ObservedGraph::new(n, triples);
    let mut prev: Vec<u32> = Vec::new();
    for r in [0.1, 0.2, 0.5, 1.0] {
        let sub = Sampler::new(&g, SamplerConfig::default().with_ratios(r, 1.0)).unwrap().extract(0, 0).unwrap();
        assert!(prev.iter().all(|e| sub.contains(*e)));
        prev = sub.entities;
    }
}

#[test]
fn extraction_is_deterministic_across_exec_modes() {
    let (n, triples) = random_graph(11, 50);
    let g = ObservedGraph::new(n, triples);
    for h in Heuristic::ALL {
        let cfg = SamplerConfig { seed: 5, ..SamplerConfig::default().with_heuristic(h).with_ratios(0.3, 0.5) };
        let s = Sampler::new(&g, cfg).unwrap();
        let a: Vec<_> = (0..n as u32).map(|u| s.extract(u, 1).unwrap()).collect();
        let b: Vec<_> = oneshot_core::parallel::map(ExecMode::Parallel, &(0..n as u32).collect::<Vec<_>>(), |&u| {
            s.extract(u, 1).unwrap()
        });
        assert_eq!(a, b);
    }
}

#[test]
fn random_coverage_matches_ratio() {
    let n = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut train = Vec::new();
    for i in 0..n as u32 {
        train.push(Triple::new(i, 0, (i + 1) % n as u32));
    }
    let mut test = Vec::new();
    while test.len() < 20_000 {
        let t = Triple::new(rng.gen_range(0..n as u32), rng.gen_range(1..4), rng.gen_range(0..n as u32));
        if t.head != t.tail {
            test.push(t);
        }
    }
    let kg = KnowledgeGraph::new(
        Vocab::from_names((0..n).map(|i| i.to_string())).unwrap(),
        Vocab::from_names(["next", "a", "b", "c"]).unwrap(),
        train,
        vec![],
        test,
    )
    .unwrap();
    let ratios = [0.1, 0.2, 0.5];
    let table = coverage_ratio(&kg, Split::Test, &[Heuristic::Rand], &ratios, &SamplerConfig::default(), ExecMode::Parallel)
        .unwrap();
    for r in ratios {
        let c = table.get(Heuristic::Rand, r).unwrap();
        assert!((c - r).abs() <= 0.01, "ratio {r}: coverage {c}");
    }
}
