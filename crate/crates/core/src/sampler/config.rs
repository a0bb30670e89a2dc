use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_with::{serde_as, DisplayFromStr};

use crate::error::{Error, Result};
use crate::kg::RelationId;

/// Entity-scoring heuristic used to pick the subgraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    Rand,
    Pr,
    Rw,
    Bfs,
    Ppr,
}

impl Heuristic {
    pub const ALL: [Heuristic; 5] = [
        Heuristic::Rand,
        Heuristic::Pr,
        Heuristic::Rw,
        Heuristic::Bfs,
        Heuristic::Ppr,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Heuristic::Rand => "Random Sampling (RAND)",
            Heuristic::Pr => "PageRank (PR)",
            Heuristic::Rw => "Random Walk (RW)",
            Heuristic::Bfs => "Breadth-first-searching (BFS)",
            Heuristic::Ppr => "Personalized PageRank (PPR)",
        }
    }
}

impl std::str::FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rand" | "random" => Ok(Heuristic::Rand),
            "pr" | "pagerank" => Ok(Heuristic::Pr),
            "rw" | "randomwalk" => Ok(Heuristic::Rw),
            "bfs" => Ok(Heuristic::Bfs),
            "ppr" => Ok(Heuristic::Ppr),
            other => Err(Error::config("heuristic", format!("unknown heuristic `{other}`"))),
        }
    }
}

impl std::fmt::Display for Heuristic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Heuristic::Rand => "rand",
            Heuristic::Pr => "pr",
            Heuristic::Rw => "rw",
            Heuristic::Bfs => "bfs",
            Heuristic::Ppr => "ppr",
        };
        f.write_str(s)
    }
}

/// Normalisation of the transition matrix in the power iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// `D^{-1} A p`: each entity takes the mean score of its neighbours.
    #[default]
    Row,
    /// `A D^{-1} p`: each entity spreads its score evenly over its
    /// neighbours (mass-conserving random walk with restart).
    Column,
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "row" => Ok(Orientation::Row),
            "column" | "col" => Ok(Orientation::Column),
            other => Err(Error::config(
                "orientation",
                format!("expected `row` or `column`, got `{other}`"),
            )),
        }
    }
}

#[serde_as]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub heuristic: Heuristic,
    /// Restart probability of the power iteration.
    pub alpha: f64,
    pub max_iters: usize,
    /// Early stop once successive iterates differ by less than this in L1.
    pub tol: f64,
    pub orientation: Orientation,
    /// Default entity sampling ratio.
    pub entity_ratio: f64,
    /// Default edge sampling ratio.
    pub edge_ratio: f64,
    /// Per-query-relation overrides of `entity_ratio`.
    #[serde_as(as = "BTreeMap<DisplayFromStr, _>")]
    pub entity_ratio_by_relation: BTreeMap<RelationId, f64>,
    /// Per-query-relation overrides of `edge_ratio`.
    #[serde_as(as = "BTreeMap<DisplayFromStr, _>")]
    pub edge_ratio_by_relation: BTreeMap<RelationId, f64>,
    pub rw_walks: usize,
    pub rw_length: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            heuristic: Heuristic::Ppr,
            alpha: 0.85,
            max_iters: 100,
            tol: 1e-6,
            orientation: Orientation::Row,
            entity_ratio: 0.1,
            edge_ratio: 0.1,
            entity_ratio_by_relation: BTreeMap::new(),
            edge_ratio_by_relation: BTreeMap::new(),
            rw_walks: 100,
            rw_length: 10,
            seed: 0,
        }
    }
}

fn check_ratio(key: &str, r: f64) -> Result<()> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("ratio must lie in (0, 1], got {r}")))
    }
}

impl SamplerConfig {
    pub fn with_ratios(mut self, entity_ratio: f64, edge_ratio: f64) -> Self {
        self.entity_ratio = entity_ratio;
        self.edge_ratio = edge_ratio;
        self
    }

    pub fn with_heuristic(mut self, heuristic: Heuristic) -> Self {
        self.heuristic = heuristic;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(
                "alpha",
                format!("damping must lie in (0, 1], got {}", self.alpha),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters", "must be at least 1"));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::config("tol", "must be non-negative"));
        }
        check_ratio("entity_ratio", self.entity_ratio)?;
        check_ratio("edge_ratio", self.edge_ratio)?;
        for &r in self.entity_ratio_by_relation.values() {
            check_ratio("entity_ratio_by_relation", r)?;
        }
        for &r in self.edge_ratio_by_relation.values() {
            check_ratio("edge_ratio_by_relation", r)?;
        }
        Ok(())
    }

    /// `(entity_ratio, edge_ratio)` in effect for query relation `q`.
    pub fn ratios_for(&self, q: RelationId) -> (f64, f64) {
        (
            self.entity_ratio_by_relation
                .get(&q)
                .copied()
                .unwrap_or(self.entity_ratio),
            self.edge_ratio_by_relation
                .get(&q)
                .copied()
                .unwrap_or(self.edge_ratio),
        )
    }
}

/// `max(1, round_half_up(ratio * total))`, capped at `total`.
pub fn sample_count(ratio: f64, total: usize) -> usize {
    if total == 0 {
        return 0;
    }
    let k = (ratio * total as f64 + 0.5).floor() as usize;
    k.clamp(1, total)
}
