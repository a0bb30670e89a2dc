use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::metrics::{rank_filtered, MetricAccumulator, MetricReport};
use crate::error::Result;
use crate::kg::{EntityId, KnowledgeGraph, ObservedGraph, RelationId, Split, Triple};
use crate::parallel::{self, ExecMode};
use crate::predictor::Predictor;
use crate::sampler::{Sampler, SamplerConfig};

/// All known tails of every `(head, relation)` pair across the splits.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    tails: HashMap<(EntityId, RelationId), Vec<EntityId>>,
}

impl FilterIndex {
    pub fn new<'a>(facts: impl IntoIterator<Item = &'a Triple>) -> Self {
        let mut tails: HashMap<(EntityId, RelationId), Vec<EntityId>> = HashMap::new();
        for t in facts {
            tails.entry((t.head, t.rel)).or_default().push(t.tail);
        }
        for v in tails.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        FilterIndex { tails }
    }

    pub fn from_kg(kg: &KnowledgeGraph) -> Self {
        Self::new(kg.facts())
    }

    /// Other true tails of `(u, q, ·)` excluding `answer`.
    pub fn known_true(&self, u: EntityId, q: RelationId, answer: EntityId) -> Vec<EntityId> {
        self.tails
            .get(&(u, q))
            .map(|v| v.iter().copied().filter(|&t| t != answer).collect())
            .unwrap_or_default()
    }
}

/// Per-query evaluation result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub rank: f64,
    /// Answer was not sampled into the subgraph.
    pub missed: bool,
    pub subgraph_entities: usize,
    pub subgraph_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub exec: ExecMode,
    /// Evaluate only the first `n` queries of the split.
    pub max_queries: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            exec: ExecMode::Parallel,
            max_queries: None,
        }
    }
}

/// Scores one query over all of `V`: sampled entities carry their logit,
/// everything else the `-inf` sentinel.
pub fn rank_query(
    predictor: &Predictor,
    sampler: &Sampler<'_>,
    filters: &FilterIndex,
    query: Triple,
) -> Result<QueryOutcome> {
    let sub = sampler.extract(query.head, query.rel)?;
    let logits = predictor.logits(&sub, query.rel)?;
    let mut scores = vec![f64::NEG_INFINITY; sampler.graph().num_entities()];
    for (&e, &z) in sub.entities.iter().zip(&logits) {
        scores[e as usize] = z;
    }
    let known = filters.known_true(query.head, query.rel, query.tail);
    Ok(QueryOutcome {
        rank: rank_filtered(&scores, query.tail, &known)?,
        missed: !sub.contains(query.tail),
        subgraph_entities: sub.num_entities(),
        subgraph_edges: sub.num_edges(),
    })
}

/// Ranks every query against `graph`, in query order.
pub fn rank_queries(
    predictor: &Predictor,
    graph: &ObservedGraph,
    sampler_cfg: &SamplerConfig,
    filters: &FilterIndex,
    queries: &[Triple],
    exec: ExecMode,
) -> Result<Vec<QueryOutcome>> {
    let sampler = Sampler::new(graph, sampler_cfg.clone())?;
    parallel::map(exec, queries, |&q| rank_query(predictor, &sampler, filters, q))
        .into_iter()
        .collect()
}

/// Folds outcomes in order, so a fixed query order gives a bit-identical report.
pub fn summarize(outcomes: &[QueryOutcome]) -> MetricReport {
    let mut acc = MetricAccumulator::default();
    for o in outcomes {
        acc.push(o.rank, o.missed);
    }
    acc.finish()
}

/// Queries of `split` (both directions on an augmented graph).
pub fn split_queries(kg: &KnowledgeGraph, split: Split, max: Option<usize>) -> Vec<Triple> {
    let qs = kg.split(split);
    qs[..max.unwrap_or(qs.len()).min(qs.len())].to_vec()
}

/// Filtered MRR / Hits@k of `predictor` on `split`.
///
/// Valid queries are answered against the train facts, test queries
/// against train plus valid facts.
pub fn evaluate(
    kg: &KnowledgeGraph,
    split: Split,
    sampler_cfg: &SamplerConfig,
    predictor: &Predictor,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    let graph = kg.observation_graph(split);
    let filters = FilterIndex::from_kg(kg);
    let queries = split_queries(kg, split, opts.max_queries);
    let outcomes = rank_queries(predictor, &graph, sampler_cfg, &filters, &queries, opts.exec)?;
    Ok(summarize(&outcomes))
}
