use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, Split};
use crate::parallel::{self, ExecMode};
use crate::sampler::{rank_position, sample_count, Heuristic, Sampler, SamplerConfig};

/// Whether `v` survives entity sampling of `k` entities anchored at `u`
/// (top-`k` with `u` forced in), computed from ranking positions.
pub fn entity_covered(scores: &[f64], u: u32, v: u32, k: usize) -> bool {
    if u == v {
        return true;
    }
    let k = k.max(1);
    let pos_v = rank_position(scores, v);
    if rank_position(scores, u) < k {
        pos_v < k
    } else {
        pos_v + 1 < k
    }
}

/// Fraction of queries whose answer is sampled, per heuristic and ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub heuristics: Vec<Heuristic>,
    pub ratios: Vec<f64>,
    /// `values[h][r]`.
    pub values: Vec<Vec<f64>>,
    pub n_queries: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub heuristic: Heuristic,
    pub ratio: f64,
    pub coverage: f64,
    pub n_queries: usize,
}

impl CoverageTable {
    pub fn get(&self, h: Heuristic, ratio: f64) -> Option<f64> {
        let hi = self.heuristics.iter().position(|&x| x == h)?;
        let ri = self.ratios.iter().position(|&x| x == ratio)?;
        Some(self.values[hi][ri])
    }

    pub fn records(&self) -> Vec<CoverageRecord> {
        self.heuristics
            .iter()
            .zip(&self.values)
            .flat_map(|(&h, row)| {
                self.ratios.iter().zip(row).map(move |(&ratio, &coverage)| CoverageRecord {
                    heuristic: h,
                    ratio,
                    coverage,
                    n_queries: self.n_queries,
                })
            })
            .collect()
    }

    /// Heuristics as rows, ratios as columns, three decimals.
    pub fn to_text(&self) -> String {
        let label_w = self
            .heuristics
            .iter()
            .map(|h| h.label().len())
            .max()
            .unwrap_or(10)
            .max("heuristics".len());
        let mut out = format!("{:<label_w$}", "heuristics");
        for r in &self.ratios {
            out.push_str(&format!(" | {:>9}", format!("r={r}")));
        }
        out.push('\n');
        out.push_str(&"-".repeat(label_w + 12 * self.ratios.len()));
        out.push('\n');
        for (h, row) in self.heuristics.iter().zip(&self.values) {
            out.push_str(&format!("{:<label_w$}", h.label()));
            for v in row {
                out.push_str(&format!(" | {v:>9.3}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Coverage ratio of each heuristic at each entity ratio over the
/// queries of `split`. Scores are computed once per query and heuristic.
pub fn coverage_ratio(
    kg: &KnowledgeGraph,
    split: Split,
    heuristics: &[Heuristic],
    ratios: &[f64],
    base: &SamplerConfig,
    exec: ExecMode,
) -> Result<CoverageTable> {
    for &r in ratios {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::config("ratios", format!("ratio {r} outside (0, 1]")));
        }
    }
    let graph = kg.observation_graph(split);
    let queries = kg.split(split);
    let n = graph.num_entities();
    let ks: Vec<usize> = ratios.iter().map(|&r| sample_count(r, n)).collect();
    let mut values = Vec::with_capacity(heuristics.len());
    for &h in heuristics {
        let sampler = Sampler::new(&graph, base.clone().with_heuristic(h))?;
        let hits: Vec<Result<Vec<bool>>> = parallel::map(exec, queries, |t| {
            let scores = sampler.scores(t.head, t.rel)?;
            Ok(ks
                .iter()
                .map(|&k| entity_covered(&scores, t.head, t.tail, k))
                .collect())
        });
        let mut counts = vec![0usize; ratios.len()];
        for row in hits {
            for (c, hit) in counts.iter_mut().zip(row?) {
                *c += usize::from(hit);
            }
        }
        let denom = queries.len().max(1) as f64;
        values.push(counts.into_iter().map(|c| c as f64 / denom).collect());
    }
    Ok(CoverageTable {
        heuristics: heuristics.to_vec(),
        ratios: ratios.to_vec(),
        values,
        n_queries: queries.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::select_entities;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn covered_agrees_with_selection(
            raw in prop::collection::vec(0u8..10, 1..80),
            u in 0usize..80,
            v in 0usize..80,
            k in 1usize..90,
        ) {
            let scores: Vec<f64> = raw.iter().map(|&x| x as f64).collect();
            let n = scores.len();
            let (u, v) = ((u % n) as u32, (v % n) as u32);
            let chosen = select_entities(&scores, u, k);
            prop_assert_eq!(entity_covered(&scores, u, v, k), chosen.contains(&v));
        }
    }
}
