//! Entity scores that drive entity and edge selection.

use std::collections::VecDeque;

use rand::Rng;

use super::config::{Heuristic, Orientation, SamplerConfig};
use crate::error::{Error, Result};
use crate::kg::{EntityId, ObservedGraph, RelationId};
use crate::seed;

/// Result of a power iteration.
#[derive(Debug, Clone)]
pub struct PowerIteration {
    pub scores: Vec<f64>,
    pub iterations: usize,
    /// L1 distance between the last two iterates.
    pub residual: f64,
}

/// Iterates `p <- alpha * restart + (1 - alpha) * T p` starting from
/// `restart`, for at most `max_iters` steps. Zero-degree rows of `T` are
/// zero, so dangling entities drop mass instead of teleporting.
pub fn power_iteration(
    graph: &ObservedGraph,
    restart: &[f64],
    alpha: f64,
    max_iters: usize,
    tol: f64,
    orientation: Orientation,
) -> PowerIteration {
    let n = graph.num_entities();
    let degrees = graph.degrees();
    let mut p = restart.to_vec();
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let damp = 1.0 - alpha;
    while iterations < max_iters {
        match orientation {
            Orientation::Row => {
                for (i, slot) in next.iter_mut().enumerate() {
                    let d = degrees[i];
                    let walk = if d == 0 {
                        0.0
                    } else {
                        graph.out_neighbors(i as EntityId).map(|j| p[j as usize]).sum::<f64>()
                            / d as f64
                    };
                    *slot = alpha * restart[i] + damp * walk;
                }
            }
            Orientation::Column => {
                for (i, slot) in next.iter_mut().enumerate() {
                    let walk: f64 = graph
                        .in_edges(i as EntityId)
                        .map(|e| p[e.other as usize] / degrees[e.other as usize] as f64)
                        .sum();
                    *slot = alpha * restart[i] + damp * walk;
                }
            }
        }
        residual = p.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut p, &mut next);
        iterations += 1;
        if residual < tol {
            break;
        }
    }
    PowerIteration {
        scores: p,
        iterations,
        residual,
    }
}

fn check_entity(graph: &ObservedGraph, u: EntityId) -> Result<()> {
    if (u as usize) < graph.num_entities() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "entity {u} out of range (|V| = {})",
            graph.num_entities()
        )))
    }
}

/// Personalized PageRank anchored at `u`.
pub fn ppr_scores(graph: &ObservedGraph, u: EntityId, cfg: &SamplerConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_entity(graph, u)?;
    let mut restart = vec![0.0; graph.num_entities()];
    restart[u as usize] = 1.0;
    Ok(power_iteration(graph, &restart, cfg.alpha, cfg.max_iters, cfg.tol, cfg.orientation).scores)
}

/// Global PageRank with a uniform restart vector.
pub fn pagerank_scores(graph: &ObservedGraph, cfg: &SamplerConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = graph.num_entities();
    if n == 0 {
        return Ok(Vec::new());
    }
    let restart = vec![1.0 / n as f64; n];
    Ok(power_iteration(graph, &restart, cfg.alpha, cfg.max_iters, cfg.tol, cfg.orientation).scores)
}

/// Hop distance from `u` along out-edges; `None` when unreachable.
pub fn bfs_distances(graph: &ObservedGraph, u: EntityId) -> Vec<Option<u32>> {
    let mut dist = vec![None; graph.num_entities()];
    let mut queue = VecDeque::new();
    dist[u as usize] = Some(0);
    queue.push_back(u);
    while let Some(x) = queue.pop_front() {
        let d = dist[x as usize].unwrap_or(0);
        for o in graph.out_neighbors(x) {
            if dist[o as usize].is_none() {
                dist[o as usize] = Some(d + 1);
                queue.push_back(o);
            }
        }
    }
    dist
}

/// `1 / (1 + dist(u, o))`, zero when unreachable.
pub fn bfs_scores(graph: &ObservedGraph, u: EntityId) -> Result<Vec<f64>> {
    check_entity(graph, u)?;
    Ok(bfs_distances(graph, u)
        .into_iter()
        .map(|d| d.map_or(0.0, |d| 1.0 / (1.0 + d as f64)))
        .collect())
}

/// Normalised visit counts of `walks` random walks of `length` steps from
/// `u`. The start position counts as a visit; a walk ends early at a
/// dangling entity.
pub fn random_walk_scores(
    graph: &ObservedGraph,
    u: EntityId,
    walks: usize,
    length: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_entity(graph, u)?;
    let mut rng = seed::rng(seed, &[0x5257, u as u64]);
    let mut counts = vec![0u64; graph.num_entities()];
    let mut total = 0u64;
    for _ in 0..walks {
        let mut x = u;
        counts[x as usize] += 1;
        total += 1;
        for _ in 0..length {
            let d = graph.degree(x) as usize;
            if d == 0 {
                break;
            }
            let k = rng.gen_range(0..d);
            x = graph.out_neighbors(x).nth(k).unwrap_or(x);
            counts[x as usize] += 1;
            total += 1;
        }
    }
    let total = total.max(1) as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// I.i.d. uniform scores in `[0, 1)` with `u` pinned to 1.
pub fn random_scores(n: usize, u: EntityId, q: RelationId, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed, &[0x52414e44, u as u64, q as u64]);
    let mut s: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    if let Some(x) = s.get_mut(u as usize) {
        *x = 1.0;
    }
    s
}

/// Scores for the non-PPR baselines. `global_pr` may carry a precomputed
/// PageRank vector for [`Heuristic::Pr`].
pub fn heuristic_scores(
    graph: &ObservedGraph,
    u: EntityId,
    q: RelationId,
    cfg: &SamplerConfig,
    global_pr: Option<&[f64]>,
) -> Result<Vec<f64>> {
    check_entity(graph, u)?;
    match cfg.heuristic {
        Heuristic::Rand => Ok(random_scores(graph.num_entities(), u, q, cfg.seed)),
        Heuristic::Pr => match global_pr {
            Some(p) => Ok(p.to_vec()),
            None => pagerank_scores(graph, cfg),
        },
        Heuristic::Rw => random_walk_scores(graph, u, cfg.rw_walks, cfg.rw_length, cfg.seed),
        Heuristic::Bfs => bfs_scores(graph, u),
        Heuristic::Ppr => Err(Error::config(
            "heuristic",
            "PPR is not a baseline heuristic; use ppr_scores",
        )),
    }
}
