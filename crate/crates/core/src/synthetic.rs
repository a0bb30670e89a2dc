//! Generated rule graphs with known answers.
//!
//! `target(x) = g(f(x))` where `f` and `g` are random permutations, so
//! every target query, head or tail, has exactly one answer reachable by a
//! two-hop relational path. A `noise` relation adds distractor edges.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId, Triple, Vocab};
use crate::seed;

pub const REL_F: RelationId = 0;
pub const REL_G: RelationId = 1;
pub const REL_NOISE: RelationId = 2;
pub const REL_TARGET: RelationId = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleKgConfig {
    pub entities: usize,
    /// Distractor edges per entity.
    pub noise_per_entity: usize,
    pub valid: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for RuleKgConfig {
    fn default() -> Self {
        RuleKgConfig {
            entities: 500,
            noise_per_entity: 1,
            valid: 50,
            test: 50,
            seed: 0,
        }
    }
}

/// A rule graph together with the permutations that generated it.
#[derive(Debug, Clone)]
pub struct RuleKg {
    pub kg: KnowledgeGraph,
    pub f: Vec<EntityId>,
    pub g: Vec<EntityId>,
}

impl RuleKg {
    /// Answer of `(x, target, ?)` by applying the rule symbolically.
    pub fn oracle(&self, x: EntityId) -> EntityId {
        self.g[self.f[x as usize] as usize]
    }

    /// Answer of `(?, target, y)`.
    pub fn oracle_inverse(&self, y: EntityId) -> EntityId {
        let fx = self.g.iter().position(|&v| v == y).expect("g is a permutation") as EntityId;
        self.f.iter().position(|&v| v == fx).expect("f is a permutation") as EntityId
    }

    /// One-hot scores from the symbolic rule for a target query. The
    /// inverse target relation is numbered as in the augmented graph.
    pub fn oracle_scores(&self, u: EntityId, q: RelationId) -> Option<Vec<f64>> {
        let n = self.kg.num_entities();
        let answer = if q == REL_TARGET {
            self.oracle(u)
        } else if q == REL_TARGET + self.kg.num_base_relations() as RelationId {
            self.oracle_inverse(u)
        } else {
            return None;
        };
        let mut s = vec![0.0; n];
        s[answer as usize] = 1.0;
        Some(s)
    }

    /// True when every target fact in every split agrees with the rule.
    pub fn consistent(&self) -> bool {
        self.kg
            .facts()
            .filter(|t| t.rel == REL_TARGET)
            .all(|t| self.oracle(t.head) == t.tail)
    }
}

fn derangement(n: usize, rng: &mut impl Rng) -> Vec<EntityId> {
    let mut p: Vec<EntityId> = (0..n as EntityId).collect();
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &v)| i as EntityId != v) {
            return p;
        }
    }
}

/// Generates a rule graph. Train holds all `f`, `g` and noise facts plus
/// the target facts not held out for valid and test.
pub fn rule_kg(cfg: &RuleKgConfig) -> Result<RuleKg> {
    let n = cfg.entities;
    if n < 4 {
        return Err(Error::config("entities", "need at least 4"));
    }
    if cfg.valid + cfg.test >= n {
        return Err(Error::config("valid", "valid plus test must leave target facts for training"));
    }
    if cfg.noise_per_entity >= n - 1 {
        return Err(Error::config("noise_per_entity", "too many distractors for the entity count"));
    }
    let mut rng = seed::rng(cfg.seed, &[]);
    let f = derangement(n, &mut rng);
    let g = derangement(n, &mut rng);

    let mut train = Vec::with_capacity(n * (3 + cfg.noise_per_entity));
    for x in 0..n as EntityId {
        train.push(Triple::new(x, REL_F, f[x as usize]));
        train.push(Triple::new(x, REL_G, g[x as usize]));
    }
    for x in 0..n as EntityId {
        let targets = rand::seq::index::sample(&mut rng, n - 1, cfg.noise_per_entity);
        for j in targets {
            let y = if j as EntityId >= x { j as EntityId + 1 } else { j as EntityId };
            train.push(Triple::new(x, REL_NOISE, y));
        }
    }
    let mut heads: Vec<EntityId> = (0..n as EntityId).collect();
    heads.shuffle(&mut rng);
    let target = |x: EntityId| Triple::new(x, REL_TARGET, g[f[x as usize] as usize]);
    let valid: Vec<Triple> = heads[..cfg.valid].iter().map(|&x| target(x)).collect();
    let test: Vec<Triple> = heads[cfg.valid..cfg.valid + cfg.test].iter().map(|&x| target(x)).collect();
    let mut rest: Vec<EntityId> = heads[cfg.valid + cfg.test..].to_vec();
    rest.sort_unstable();
    train.extend(rest.into_iter().map(target));

    let entities = Vocab::from_names((0..n).map(|i| format!("e{i}")))?;
    let relations = Vocab::from_names(["f", "g", "noise", "target"])?;
    let kg = KnowledgeGraph::new(entities, relations, train, valid, test)?;
    Ok(RuleKg { kg, f, g })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_and_rule() {
        let r = rule_kg(&RuleKgConfig::default()).unwrap();
        assert_eq!(r.kg.num_entities(), 500);
        assert_eq!(r.kg.valid().len(), 50);
        assert_eq!(r.kg.test().len(), 50);
        assert_eq!(r.kg.train().len(), 500 * 3 + 400);
        assert!(r.consistent());
        for x in 0..500 {
            assert_eq!(r.oracle_inverse(r.oracle(x)), x);
        }
    }

    #[test]
    fn seeded() {
        let a = rule_kg(&RuleKgConfig::default()).unwrap();
        let b = rule_kg(&RuleKgConfig::default()).unwrap();
        assert_eq!(a.kg.train(), b.kg.train());
        let c = rule_kg(&RuleKgConfig { seed: 1, ..Default::default() }).unwrap();
        assert_ne!(a.kg.train(), c.kg.train());
    }
}
