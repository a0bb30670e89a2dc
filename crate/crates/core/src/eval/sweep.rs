use serde::{Deserialize, Serialize};

use super::evaluate::{rank_queries, split_queries, summarize, EvalOptions, FilterIndex};
use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, Split};
use crate::predictor::Predictor;
use crate::sampler::SamplerConfig;

/// Validation MRR of a frozen predictor over a grid of sampling ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMatrix {
    /// Row axis.
    pub entity_ratios: Vec<f64>,
    /// Column axis.
    pub edge_ratios: Vec<f64>,
    /// `mrr[i][j]` at `(entity_ratios[i], edge_ratios[j])`.
    pub mrr: Vec<Vec<f64>>,
}

impl SweepMatrix {
    /// Tab-separated grid with a header row of edge ratios and a leading
    /// column of entity ratios.
    pub fn to_grid(&self) -> String {
        let mut out = String::from("entity_ratio\\edge_ratio");
        for r in &self.edge_ratios {
            out.push_str(&format!("\t{r}"));
        }
        out.push('\n');
        for (rv, row) in self.entity_ratios.iter().zip(&self.mrr) {
            out.push_str(&rv.to_string());
            for m in row {
                out.push_str(&format!("\t{m:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Re-evaluates `predictor` on the valid split at every grid cell.
pub fn extrapolation_sweep(
    kg: &KnowledgeGraph,
    predictor: &Predictor,
    base: &SamplerConfig,
    entity_ratios: &[f64],
    edge_ratios: &[f64],
    opts: &EvalOptions,
) -> Result<SweepMatrix> {
    if entity_ratios.is_empty() || edge_ratios.is_empty() {
        return Err(Error::config("grid", "sweep grid must be non-empty"));
    }
    let graph = kg.observation_graph(Split::Valid);
    let filters = FilterIndex::from_kg(kg);
    let queries = split_queries(kg, Split::Valid, opts.max_queries);
    let mut mrr = Vec::with_capacity(entity_ratios.len());
    for &rv in entity_ratios {
        let mut row = Vec::with_capacity(edge_ratios.len());
        for &re in edge_ratios {
            let cfg = base.clone().with_ratios(rv, re);
            let outcomes = rank_queries(predictor, &graph, &cfg, &filters, &queries, opts.exec)?;
            row.push(summarize(&outcomes).mrr);
        }
        mrr.push(row);
    }
    Ok(SweepMatrix {
        entity_ratios: entity_ratios.to_vec(),
        edge_ratios: edge_ratios.to_vec(),
        mrr,
    })
}
