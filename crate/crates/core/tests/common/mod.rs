#![allow(dead_code)]

use oneshot_core::autograd::Matrix;
use oneshot_core::kg::Triple;
use oneshot_core::predictor::*;
use oneshot_core::sampler::{Heuristic, LocalEdge, Orientation, Provenance, Subgraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Subgraph over local ids `0..n` with the given `(head, rel, tail)` edges.
pub fn subgraph(n: usize, anchor: u32, q: u32, edges: &[(u32, u32, u32)]) -> Subgraph {
    Subgraph {
        entities: (0..n as u32).collect(),
        edges: edges
            .iter()
            .map(|&(head, rel, tail)| LocalEdge { head, rel, tail })
            .collect(),
        edge_ids: (0..edges.len() as u32).collect(),
        anchor,
        query_relation: q,
        provenance: Provenance {
            heuristic: Heuristic::Ppr,
            entity_ratio: 1.0,
            edge_ratio: 1.0,
            scores: None,
        },
    }
}

/// Random directed multigraph on `n` nodes where every node is reachable
/// from node 0 (a random spanning arborescence plus extra edges).
pub fn random_fixture(n: usize, extra: usize, relations: u32, seed: u64) -> Vec<(u32, u32, u32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for v in 1..n as u32 {
        let parent = rng.gen_range(0..v);
        edges.push((parent, rng.gen_range(0..relations), v));
    }
    for _ in 0..extra {
        edges.push((
            rng.gen_range(0..n as u32),
            rng.gen_range(0..relations),
            rng.gen_range(0..n as u32),
        ));
    }
    edges
}

/// Number of directed walks with exactly `len` edges from `from` to every
/// node, by explicit depth-first enumeration.
pub fn count_walks(n: usize, edges: &[(u32, u32, u32)], from: u32, len: usize) -> Vec<u64> {
    fn go(edges: &[(u32, u32, u32)], at: u32, left: usize, counts: &mut [u64]) {
        if left == 0 {
            counts[at as usize] += 1;
            return;
        }
        for &(h, _, t) in edges {
            if h == at {
                go(edges, t, left - 1, counts);
            }
        }
    }
    let mut counts = vec![0; n];
    go(edges, from, len, &mut counts);
    counts
}

/// Summed BCE loss in evaluation mode.
pub fn eval_loss(p: &Predictor, sub: &Subgraph, q: u32, answer: u32) -> f64 {
    let logits = p.forward(sub, q, Mode::Eval).unwrap().logits().to_vec();
    logits
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let y = if i == answer as usize { 1.0 } else { 0.0 };
            let s = 1.0 / (1.0 + (-z).exp());
            -(y * s.ln() + (1.0 - y) * (1.0 - s).ln())
        })
        .sum()
}

/// Worst relative error between analytic gradients and central finite
/// differences with step `h`. Entries where both values are below
/// `floor` in magnitude are compared absolutely against `floor`.
#[allow(clippy::needless_range_loop)]
pub fn gradient_check(p: &mut Predictor, sub: &Subgraph, q: u32, answer: u32, h: f64, floor: f64) -> f64 {
    let (_, grads) = p.loss_and_grad(sub, q, answer, Mode::Eval).unwrap();
    let mut worst = 0.0f64;
    for t in 0..grads.len() {
        for k in 0..grads[t].len() {
            let orig = p.params().tensors[t].data[k];
            p.params_mut().tensors[t].data[k] = orig + h;
            let up = eval_loss(p, sub, q, answer);
            p.params_mut().tensors[t].data[k] = orig - h;
            let down = eval_loss(p, sub, q, answer);
            p.params_mut().tensors[t].data[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[t].data[k];
            let scale = analytic.abs().max(numeric.abs()).max(floor);
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    worst
}

pub fn set_matrix(p: &mut Predictor, name: &str, m: Matrix) {
    *p.params_mut().get_mut(name).unwrap_or_else(|| panic!("no tensor {name}")) = m;
}

/// Degenerate NBFNet: zero relation embeddings, identity transforms, sum
/// aggregation, identity activation, binary init, dot readout. Its layer-L
/// state counts length-L walks from the anchor.
pub fn path_counting_predictor(layers: usize, dim: usize, relations: usize) -> Predictor {
    let cfg = PredictorConfig {
        layers,
        hidden_dim: dim,
        dropout: 0.0,
        act: Activation::Identity,
        agg: Aggregation::Sum,
        mess: MessageKind::Nbfnet,
        init: InitKind::Binary,
        shortcut: false,
        concat: false,
        readout: Readout::Dot,
        combine: Combine::Sum,
        seed: 1,
    };
    let mut p = Predictor::new(cfg, relations).unwrap();
    for l in 0..layers {
        set_matrix(&mut p, &format!("layer{l}.rel_emb"), Matrix::zeros(relations, dim));
        set_matrix(&mut p, &format!("layer{l}.weight"), Matrix::identity(dim));
    }
    p
}

/// Nodes where the degenerate predictor disagrees with walk enumeration,
/// over 40 random graphs of 2 to 10 nodes and depths 1 to 4.
pub fn path_counting_mismatches() -> Vec<String> {
    let mut bad = Vec::new();
    for seed in 0..40u64 {
        let n = 2 + (seed as usize % 9);
        let edges = random_fixture(n, n, 3, seed);
        for layers in 1..=4 {
            let dim = 3;
            let p = path_counting_predictor(layers, dim, 3);
            let sub = subgraph(n, 0, 1, &edges);
            let fwd = p.forward(&sub, 1, Mode::Eval).unwrap();
            let walks = count_walks(n, &edges, 0, layers);
            for o in 0..n {
                // Logit = <h_o, h_anchor> = dim * walks(o) * walks(anchor).
                let state_ok = fwd.state(layers).row(o) == &vec![walks[o] as f64; dim][..];
                let logit_ok = fwd.logits()[o] == (dim as u64 * walks[o] * walks[0]) as f64;
                if !(state_ok && logit_ok) {
                    bad.push(format!("seed {seed} L {layers} node {o}"));
                }
            }
        }
    }
    bad
}

/// Worst finite-difference gradient error of every
/// message x aggregation x activation x readout combination on a 10-node fixture.
pub fn combination_gradient_errors() -> Vec<(String, f64)> {
    let edges = random_fixture(10, 14, 4, 21);
    let sub = subgraph(10, 0, 2, &edges);
    let mut out = Vec::new();
    for mess in [MessageKind::Drum, MessageKind::Nbfnet, MessageKind::Redgnn] {
        for agg in [Aggregation::Max, Aggregation::Mean, Aggregation::Sum] {
            for act in [Activation::Identity, Activation::Relu, Activation::Tanh] {
                for readout in [Readout::Linear, Readout::Dot] {
                    let cfg = PredictorConfig {
                        layers: 3,
                        hidden_dim: 4,
                        mess,
                        agg,
                        act,
                        readout,
                        init: InitKind::Relational,
                        seed: 4,
                        ..Default::default()
                    };
                    let mut p = Predictor::new(cfg, 4).unwrap();
                    let err = gradient_check(&mut p, &sub, 2, 7, 1e-4, 1e-6);
                    out.push((format!("{mess:?}/{agg:?}/{act:?}/{readout:?}"), err));
                }
            }
        }
    }
    out
}

/// Random directed multigraph with 2 to `max_n` nodes.
pub fn random_graph(seed: u64, max_n: usize) -> (usize, Vec<Triple>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_n);
    let m = rng.gen_range(0..=3 * n);
    let triples = (0..m)
        .map(|_| Triple::new(rng.gen_range(0..n as u32), rng.gen_range(0..3), rng.gen_range(0..n as u32)))
        .collect();
    (n, triples)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Dense solution of `(I - (1 - alpha) T) p = alpha e_u`.
pub fn ppr_direct(n: usize, triples: &[Triple], u: usize, alpha: f64, orientation: Orientation) -> Vec<f64> {
    let mut adj = vec![vec![0.0; n]; n];
    let mut deg = vec![0.0; n];
    for t in triples {
        adj[t.head as usize][t.tail as usize] += 1.0;
        deg[t.head as usize] += 1.0;
    }
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 1.0;
        for j in 0..n {
            let tij = match orientation {
                Orientation::Row if deg[i] > 0.0 => adj[i][j] / deg[i],
                Orientation::Column if deg[j] > 0.0 => adj[j][i] / deg[j],
                _ => 0.0,
            };
            m[i][j] -= (1.0 - alpha) * tij;
        }
    }
    let mut b = vec![0.0; n];
    b[u] = alpha;
    solve(m, b)
}
