use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::KnowledgeGraph;
use crate::error::{Error, Result};

/// Observed share of the train facts used when no fraction is given.
pub const DEFAULT_OBSERVED_FRACTION: f64 = 0.95;

/// Partition of the train triple ids into observation edges and query edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSplit {
    /// Sorted train triple ids forming the observation graph.
    pub observed: Vec<u32>,
    /// Sorted train triple ids used as supervision queries.
    pub queries: Vec<u32>,
    /// Requested observed fraction, stored as parts per billion so the
    /// struct stays `Eq`.
    pub fraction_ppb: u64,
    pub seed: u64,
}

impl EdgeSplit {
    pub fn fraction(&self) -> f64 {
        self.fraction_ppb as f64 / 1e9
    }

    /// `|observed| / |queries|`.
    pub fn ratio(&self) -> f64 {
        self.observed.len() as f64 / self.queries.len() as f64
    }
}

/// Randomly splits the train facts so that `fraction` of them are observed.
///
/// On an augmented graph a fact and its inverse copy form one unit and
/// always land on the same side.
pub fn split_train_edges(kg: &KnowledgeGraph, fraction: f64, seed: u64) -> Result<EdgeSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(
            "split_fraction",
            format!("observed fraction must lie in (0, 1), got {fraction}"),
        ));
    }
    let n_triples = kg.train().len();
    let units = if kg.is_augmented() { n_triples / 2 } else { n_triples };
    if units < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 train facts to split, found {units}"
        )));
    }
    let n_obs = ((fraction * units as f64).round() as usize).clamp(1, units - 1);
    let mut order: Vec<u32> = (0..units as u32).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let expand = |ids: &[u32]| -> Vec<u32> {
        let mut out: Vec<u32> = if kg.is_augmented() {
            ids.iter()
                .flat_map(|&i| [i, i + units as u32])
                .collect()
        } else {
            ids.to_vec()
        };
        out.sort_unstable();
        out
    };
    Ok(EdgeSplit {
        observed: expand(&order[..n_obs]),
        queries: expand(&order[n_obs..]),
        fraction_ppb: (fraction * 1e9).round() as u64,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Triple, Vocab};

    fn chain_kg(n_facts: usize) -> KnowledgeGraph {
        let n = n_facts + 1;
        let entities = Vocab::from_names((0..n).map(|i| format!("e{i}"))).unwrap();
        let relations = Vocab::from_names(["r", "s"]).unwrap();
        let train = (0..n_facts)
            .map(|i| Triple::new(i as u32, (i % 2) as u32, i as u32 + 1))
            .collect();
        KnowledgeGraph::new(entities, relations, train, vec![], vec![]).unwrap()
    }

    #[test]
    fn split_sizes_follow_fraction() {
        let kg = chain_kg(100);
        let s = split_train_edges(&kg, 0.95, 7).unwrap();
        assert_eq!(s.observed.len(), 95);
        assert_eq!(s.queries.len(), 5);
        assert!((s.ratio() - 19.0).abs() < 1e-12);
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let kg = chain_kg(100).augment_inverse().unwrap();
        let a = split_train_edges(&kg, 0.9, 3).unwrap();
        let b = split_train_edges(&kg, 0.9, 3).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<u32> = a.observed.iter().chain(&a.queries).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..200).collect::<Vec<_>>());
        let c = split_train_edges(&kg, 0.9, 4).unwrap();
        assert_ne!(a.queries, c.queries);
        assert_eq!(a.queries.len(), c.queries.len());
    }

    #[test]
    fn inverse_pairs_stay_together() {
        let kg = chain_kg(50).augment_inverse().unwrap();
        for seed in 0..20 {
            let s = split_train_edges(&kg, 0.7, seed).unwrap();
            let observed: std::collections::HashSet<Triple> =
                s.observed.iter().map(|&i| kg.train()[i as usize]).collect();
            for t in kg.train() {
                let inv = kg.inverse_triple(*t).unwrap();
                assert_eq!(observed.contains(t), observed.contains(&inv));
            }
        }
    }

    #[test]
    fn fraction_outside_unit_interval_is_config_error() {
        let kg = chain_kg(10);
        for f in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(
                split_train_edges(&kg, f, 0),
                Err(Error::Config { .. })
            ));
        }
        assert!(split_train_edges(&chain_kg(1), 0.5, 0).is_err());
    }
}
