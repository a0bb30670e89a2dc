//! One-shot subgraph sampling: entity scoring heuristics followed by
//! top-K entity and edge selection.

mod config;
mod scores;
mod subgraph;
mod topk;

pub use config::{sample_count, Heuristic, Orientation, SamplerConfig};
pub use scores::{
    bfs_distances, bfs_scores, heuristic_scores, pagerank_scores, power_iteration, ppr_scores,
    random_scores, random_walk_scores, PowerIteration,
};
pub use subgraph::{
    extract_subgraph, extract_with_scores, rank_position, select_entities, LocalEdge, Provenance,
    Sampler, Subgraph, SUBGRAPH_FORMAT, SUBGRAPH_VERSION,
};
pub use topk::{rank_order, top_k, top_k_entities};
