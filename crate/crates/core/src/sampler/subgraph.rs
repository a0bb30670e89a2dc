use std::collections::VecDeque;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::config::{sample_count, Heuristic, SamplerConfig};
use super::scores::{heuristic_scores, pagerank_scores, ppr_scores};
use super::topk::{rank_order, top_k_entities, top_k_positions};
use crate::error::{Error, Result};
use crate::kg::{EntityId, ObservedGraph, RelationId};

pub const SUBGRAPH_FORMAT: &str = "oneshot-subgraph";
pub const SUBGRAPH_VERSION: u32 = 1;

/// Edge of a subgraph in local entity ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalEdge {
    pub head: u32,
    pub rel: RelationId,
    pub tail: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub heuristic: Heuristic,
    pub entity_ratio: f64,
    pub edge_ratio: f64,
    /// Heuristic score of each sampled entity, aligned with `entities`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

/// One query-dependent subgraph.
///
/// `entities` is sorted, so the local id of an entity is its position
/// there. `edge_ids` are ids in the observation graph the subgraph was
/// drawn from, sorted ascending and aligned with `edges`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgraph {
    pub entities: Vec<EntityId>,
    pub edges: Vec<LocalEdge>,
    pub edge_ids: Vec<u32>,
    pub anchor: u32,
    pub query_relation: RelationId,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    #[serde(flatten)]
    body: T,
}

impl Subgraph {
    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn local_id(&self, entity: EntityId) -> Option<u32> {
        self.entities.binary_search(&entity).ok().map(|i| i as u32)
    }

    pub fn anchor_entity(&self) -> EntityId {
        self.entities[self.anchor as usize]
    }

    pub fn contains(&self, entity: EntityId) -> bool {
        self.local_id(entity).is_some()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Envelope {
            format: SUBGRAPH_FORMAT.into(),
            version: SUBGRAPH_VERSION,
            body: self,
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: Envelope<Subgraph> = serde_json::from_str(s)?;
        if env.format != SUBGRAPH_FORMAT || env.version != SUBGRAPH_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported subgraph record {} v{}",
                env.format, env.version
            )));
        }
        Ok(env.body)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(std::fs::read_to_string(path)?.trim_end())
    }

    /// Total (in + out) degree of every local entity within the subgraph.
    pub fn local_degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.entities.len()];
        for e in &self.edges {
            d[e.head as usize] += 1;
            d[e.tail as usize] += 1;
        }
        d
    }

    /// Directed hop distance from the anchor along subgraph edges.
    pub fn anchor_reach(&self) -> Vec<Option<u32>> {
        let n = self.entities.len();
        let mut offsets = vec![0usize; n + 1];
        for e in &self.edges {
            offsets[e.head as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0u32; self.edges.len()];
        for e in &self.edges {
            targets[cursor[e.head as usize]] = e.tail;
            cursor[e.head as usize] += 1;
        }
        let mut dist = vec![None; n];
        dist[self.anchor as usize] = Some(0);
        let mut queue = VecDeque::from([self.anchor]);
        while let Some(x) = queue.pop_front() {
            let d = dist[x as usize].unwrap_or(0);
            for &o in &targets[offsets[x as usize]..offsets[x as usize + 1]] {
                if dist[o as usize].is_none() {
                    dist[o as usize] = Some(d + 1);
                    queue.push_back(o);
                }
            }
        }
        dist
    }

    /// Hop distance from the anchor over subgraph edges (either direction).
    pub fn anchor_distances(&self) -> Vec<Option<u32>> {
        let n = self.entities.len();
        let mut nbrs = vec![Vec::new(); n];
        for e in &self.edges {
            nbrs[e.head as usize].push(e.tail);
            nbrs[e.tail as usize].push(e.head);
        }
        let mut dist = vec![None; n];
        dist[self.anchor as usize] = Some(0);
        let mut queue = VecDeque::from([self.anchor]);
        while let Some(x) = queue.pop_front() {
            let d = dist[x as usize].unwrap_or(0);
            for &o in &nbrs[x as usize] {
                if dist[o as usize].is_none() {
                    dist[o as usize] = Some(d + 1);
                    queue.push_back(o);
                }
            }
        }
        dist
    }
}

/// Top-`k` entities by score with `u` always retained: if `u` misses the
/// cut it replaces the lowest-ranked member. Returned sorted by id.
pub fn select_entities(scores: &[f64], u: EntityId, k: usize) -> Vec<EntityId> {
    let mut chosen = top_k_entities(scores, k.max(1));
    if !chosen.contains(&u) {
        chosen.pop();
        chosen.push(u);
    }
    chosen.sort_unstable();
    chosen
}

/// Builds the subgraph for query `(u, q, ?)` from precomputed entity scores.
pub fn extract_with_scores(
    graph: &ObservedGraph,
    u: EntityId,
    q: RelationId,
    cfg: &SamplerConfig,
    scores: &[f64],
    keep_scores: bool,
) -> Result<Subgraph> {
    cfg.validate()?;
    let n = graph.num_entities();
    if u as usize >= n {
        return Err(Error::InvalidInput(format!("entity {u} out of range (|V| = {n})")));
    }
    if scores.len() != n {
        return Err(Error::Shape(format!("{} scores for {n} entities", scores.len())));
    }
    let (entity_ratio, edge_ratio) = cfg.ratios_for(q);
    let entities = select_entities(scores, u, sample_count(entity_ratio, n));

    let mut local = vec![u32::MAX; n];
    for (i, &e) in entities.iter().enumerate() {
        local[e as usize] = i as u32;
    }
    let mut candidates: Vec<(f64, u32)> = Vec::new();
    for &x in &entities {
        for e in graph.out_edges(x) {
            if local[e.other as usize] != u32::MAX {
                candidates.push((scores[x as usize] * scores[e.other as usize], e.id));
            }
        }
    }
    let k_edges = sample_count(edge_ratio, graph.num_edges()).min(candidates.len());
    let mut edge_ids: Vec<u32> = top_k_positions(&candidates, k_edges)
        .into_iter()
        .map(|p| candidates[p].1)
        .collect();
    edge_ids.sort_unstable();
    let edges = edge_ids
        .iter()
        .map(|&id| {
            let t = graph.triple(id);
            LocalEdge {
                head: local[t.head as usize],
                rel: t.rel,
                tail: local[t.tail as usize],
            }
        })
        .collect();
    Ok(Subgraph {
        anchor: local[u as usize],
        provenance: Provenance {
            heuristic: cfg.heuristic,
            entity_ratio,
            edge_ratio,
            scores: keep_scores.then(|| entities.iter().map(|&e| scores[e as usize]).collect()),
        },
        entities,
        edges,
        edge_ids,
        query_relation: q,
    })
}

/// Samples one-shot subgraphs from a fixed observation graph.
///
/// Holds the global PageRank vector lazily so the query-independent
/// baseline is computed once per graph.
pub struct Sampler<'g> {
    graph: &'g ObservedGraph,
    cfg: SamplerConfig,
    global_pr: OnceLock<Vec<f64>>,
}

impl<'g> Sampler<'g> {
    pub fn new(graph: &'g ObservedGraph, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Sampler {
            graph,
            cfg,
            global_pr: OnceLock::new(),
        })
    }

    pub fn graph(&self) -> &'g ObservedGraph {
        self.graph
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    /// Entity scores for anchor `u` and query relation `q`.
    pub fn scores(&self, u: EntityId, q: RelationId) -> Result<Vec<f64>> {
        match self.cfg.heuristic {
            Heuristic::Ppr => ppr_scores(self.graph, u, &self.cfg),
            Heuristic::Pr => {
                if self.global_pr.get().is_none() {
                    let _ = self.global_pr.set(pagerank_scores(self.graph, &self.cfg)?);
                }
                heuristic_scores(self.graph, u, q, &self.cfg, self.global_pr.get().map(Vec::as_slice))
            }
            _ => heuristic_scores(self.graph, u, q, &self.cfg, None),
        }
    }

    pub fn extract(&self, u: EntityId, q: RelationId) -> Result<Subgraph> {
        let scores = self.scores(u, q)?;
        extract_with_scores(self.graph, u, q, &self.cfg, &scores, false)
    }

    /// Like [`Sampler::extract`] but records entity scores in the provenance.
    pub fn extract_with_provenance(&self, u: EntityId, q: RelationId) -> Result<Subgraph> {
        let scores = self.scores(u, q)?;
        extract_with_scores(self.graph, u, q, &self.cfg, &scores, true)
    }
}

/// One-off extraction; prefer [`Sampler`] when sampling many queries.
pub fn extract_subgraph(
    graph: &ObservedGraph,
    u: EntityId,
    q: RelationId,
    cfg: &SamplerConfig,
) -> Result<Subgraph> {
    Sampler::new(graph, cfg.clone())?.extract(u, q)
}

/// Position of `v` in the ranking order of `scores` (0 = best).
pub fn rank_position(scores: &[f64], v: EntityId) -> usize {
    let key = (scores[v as usize], v);
    scores
        .iter()
        .enumerate()
        .filter(|&(i, &s)| rank_order((s, i as u32), key).is_lt())
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Triple;

    fn path(n: u32) -> ObservedGraph {
        let triples = (0..n - 1)
            .flat_map(|i| [Triple::new(i, 0, i + 1), Triple::new(i + 1, 1, i)])
            .collect();
        ObservedGraph::new(n as usize, triples)
    }

    #[test]
    fn path_keeps_nearest_entities() {
        let g = path(5);
        let cfg = SamplerConfig::default().with_ratios(0.6, 1.0);
        let s = extract_subgraph(&g, 0, 0, &cfg).unwrap();
        assert_eq!(s.entities, vec![0, 1, 2]);
        assert_eq!(s.anchor, 0);
        assert_eq!(s.edge_ids, vec![0, 1, 2, 3]);
        for (e, &id) in s.edges.iter().zip(&s.edge_ids) {
            let t = g.triple(id);
            assert_eq!(s.entities[e.head as usize], t.head);
            assert_eq!(s.entities[e.tail as usize], t.tail);
            assert_eq!(e.rel, t.rel);
        }
    }

    #[test]
    fn full_ratios_reproduce_observed_graph() {
        let g = path(6);
        let cfg = SamplerConfig::default().with_ratios(1.0, 1.0);
        let s = extract_subgraph(&g, 2, 0, &cfg).unwrap();
        assert_eq!(s.entities, (0..6).collect::<Vec<_>>());
        assert_eq!(s.edge_ids, (0..g.num_edges() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn anchor_is_forced_in() {
        // anchor scored lowest still survives; lowest-ranked member is evicted
        let scores = [0.9, 0.8, 0.7, 0.1];
        assert_eq!(select_entities(&scores, 3, 2), vec![0, 3]);
        assert_eq!(select_entities(&scores, 1, 2), vec![0, 1]);
    }

    #[test]
    fn edge_budget_keeps_highest_products() {
        let g = path(5);
        let scores = [1.0, 0.5, 0.25, 0.0, 0.0];
        let cfg = SamplerConfig::default().with_ratios(0.6, 0.25);
        let s = extract_with_scores(&g, 0, 0, &cfg, &scores, true).unwrap();
        // 8 edges * 0.25 = 2 edges: both directions of 0-1
        assert_eq!(s.edge_ids, vec![0, 1]);
        assert_eq!(s.provenance.scores, Some(vec![1.0, 0.5, 0.25]));
    }

    #[test]
    fn bad_ratio_is_config_error() {
        let g = path(3);
        let cfg = SamplerConfig::default().with_ratios(0.0, 0.5);
        assert!(matches!(extract_subgraph(&g, 0, 0, &cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn json_round_trip_is_stable() {
        let g = path(7);
        let sampler = Sampler::new(&g, SamplerConfig::default().with_ratios(0.5, 0.5)).unwrap();
        let s = sampler.extract_with_provenance(3, 1).unwrap();
        let json = s.to_json().unwrap();
        assert!(json.starts_with("{\"format\":\"oneshot-subgraph\",\"version\":1"));
        let back = Subgraph::from_json(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json().unwrap(), json);
        assert!(Subgraph::from_json(&json.replace("\"version\":1", "\"version\":9")).is_err());
    }

    #[test]
    fn rank_position_follows_tie_break() {
        let s = [0.5, 0.9, 0.5, 0.1];
        assert_eq!(rank_position(&s, 1), 0);
        assert_eq!(rank_position(&s, 0), 1);
        assert_eq!(rank_position(&s, 2), 2);
        assert_eq!(rank_position(&s, 3), 3);
    }
}
