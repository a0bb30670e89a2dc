//! Knowledge-graph storage: vocabularies, split triple lists, inverse
//! augmentation, CSR adjacency and the observation/query edge split.

mod csr;
mod io;
mod split;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use csr::{EdgeRef, ObservedGraph};
pub use io::{load_dataset, load_dataset_with, save_dataset, LoadOptions};
pub use split::{split_train_edges, EdgeSplit, DEFAULT_OBSERVED_FRACTION};

use crate::error::{Error, Result};

pub type EntityId = u32;
pub type RelationId = u32;

/// A `(head, relation, tail)` fact over dense ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub rel: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub const fn new(head: EntityId, rel: RelationId, tail: EntityId) -> Self {
        Triple { head, rel, tail }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::config("split", format!("unknown split `{other}`"))),
        }
    }
}

/// Ordered name ↔ dense id mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocab::new();
        for name in names {
            let name = name.into();
            if vocab.index.contains_key(&name) {
                return Err(Error::Vocabulary(format!("duplicate name `{name}`")));
            }
            vocab.intern(&name);
        }
        Ok(vocab)
    }

    /// Returns the id of `name`, assigning the next free id on first sight.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Headline sizes of a loaded graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgStats {
    pub entities: usize,
    pub relations: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

/// Immutable knowledge graph with its three splits.
///
/// When augmented, every split list holds the original facts followed by
/// their inverse copies in the same order, so triple `i` and triple
/// `i + n/2` of a split are mirror images.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
    base_relations: usize,
    augmented: bool,
    adjacency: ObservedGraph,
}

impl KnowledgeGraph {
    /// Builds and validates a graph from vocabularies and split lists.
    pub fn new(
        entities: Vocab,
        relations: Vocab,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        let base_relations = relations.len();
        let kg = Self::assemble(entities, relations, train, valid, test, base_relations, false);
        kg.validate()?;
        Ok(kg)
    }

    fn assemble(
        entities: Vocab,
        relations: Vocab,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
        base_relations: usize,
        augmented: bool,
    ) -> Self {
        let adjacency = ObservedGraph::new(entities.len(), train.clone());
        KnowledgeGraph {
            entities,
            relations,
            train,
            valid,
            test,
            base_relations,
            augmented,
            adjacency,
        }
    }

    fn validate(&self) -> Result<()> {
        let n_ent = self.entities.len() as u32;
        let n_rel = self.relations.len() as u32;
        for (split, triples) in self.splits() {
            for t in triples {
                if t.head >= n_ent || t.tail >= n_ent || t.rel >= n_rel {
                    return Err(Error::Vocabulary(format!(
                        "{split:?} triple {t:?} out of bounds (|V|={n_ent}, |R|={n_rel})"
                    )));
                }
            }
        }
        let train: std::collections::HashSet<&Triple> = self.train.iter().collect();
        let valid: std::collections::HashSet<&Triple> = self.valid.iter().collect();
        if let Some(t) = self.valid.iter().find(|t| train.contains(t)) {
            return Err(Error::InvalidInput(format!("triple {t:?} in both train and valid")));
        }
        if let Some(t) = self
            .test
            .iter()
            .find(|t| train.contains(t) || valid.contains(t))
        {
            return Err(Error::InvalidInput(format!(
                "test triple {t:?} also appears in train or valid"
            )));
        }
        Ok(())
    }

    /// Adds the inverse relation `r + |R|` for every relation and the mirrored
    /// fact `(o, r + |R|, x)` for every fact in every split.
    pub fn augment_inverse(&self) -> Result<Self> {
        if self.augmented {
            return Err(Error::AlreadyAugmented);
        }
        let n_rel = self.relations.len() as u32;
        let mut relations = self.relations.clone();
        for name in self.relations.names() {
            let inv = format!("{name}_inv");
            if relations.get(&inv).is_some() {
                return Err(Error::Vocabulary(format!(
                    "inverse relation name `{inv}` already exists"
                )));
            }
            relations.intern(&inv);
        }
        let mirror = |ts: &[Triple]| -> Vec<Triple> {
            ts.iter()
                .copied()
                .chain(ts.iter().map(|t| Triple::new(t.tail, t.rel + n_rel, t.head)))
                .collect()
        };
        Ok(Self::assemble(
            self.entities.clone(),
            relations,
            mirror(&self.train),
            mirror(&self.valid),
            mirror(&self.test),
            self.base_relations,
            true,
        ))
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    /// Relation count before inverse augmentation.
    pub fn num_base_relations(&self) -> usize {
        self.base_relations
    }

    /// Inverse of relation `r` on an augmented graph.
    pub fn inverse_relation(&self, r: RelationId) -> Option<RelationId> {
        if !self.augmented {
            return None;
        }
        let n = self.base_relations as u32;
        Some(if r < n { r + n } else { r - n })
    }

    /// Mirror image of `t` on an augmented graph.
    pub fn inverse_triple(&self, t: Triple) -> Option<Triple> {
        self.inverse_relation(t.rel)
            .map(|r| Triple::new(t.tail, r, t.head))
    }

    /// Rewrites a head query `(?, q, v)` as the tail query `(v, q_inv, ?)`.
    pub fn head_query_as_tail(&self, q: RelationId, v: EntityId) -> Option<(EntityId, RelationId)> {
        self.inverse_relation(q).map(|qi| (v, qi))
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid
    }

    pub fn test(&self) -> &[Triple] {
        &self.test
    }

    pub fn splits(&self) -> [(Split, &[Triple]); 3] {
        [
            (Split::Train, &self.train),
            (Split::Valid, &self.valid),
            (Split::Test, &self.test),
        ]
    }

    /// All facts across the three splits.
    pub fn facts(&self) -> impl Iterator<Item = &Triple> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }

    /// CSR index over the train facts.
    pub fn adjacency(&self) -> &ObservedGraph {
        &self.adjacency
    }

    /// Per-entity degree in the train adjacency.
    pub fn degrees(&self) -> &[u32] {
        self.adjacency.degrees()
    }

    /// Graph the queries of `split` are answered against: train facts for
    /// train/valid queries, train plus valid facts for test queries.
    pub fn observation_graph(&self, split: Split) -> ObservedGraph {
        match split {
            Split::Train | Split::Valid => self.adjacency.clone(),
            Split::Test => ObservedGraph::new(
                self.num_entities(),
                self.train.iter().chain(&self.valid).copied().collect(),
            ),
        }
    }

    pub fn stats(&self) -> KgStats {
        KgStats {
            entities: self.num_entities(),
            relations: self.num_relations(),
            train: self.train.len(),
            valid: self.valid.len(),
            test: self.test.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> KnowledgeGraph {
        let entities = Vocab::from_names((0..6).map(|i| format!("e{i}"))).unwrap();
        let relations = Vocab::from_names((0..11).map(|i| format!("r{i}"))).unwrap();
        KnowledgeGraph::new(
            entities,
            relations,
            vec![Triple::new(0, 2, 5), Triple::new(1, 0, 2)],
            vec![Triple::new(3, 1, 4)],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn augmentation_adds_shifted_inverse() {
        let kg = toy().augment_inverse().unwrap();
        assert_eq!(kg.num_relations(), 22);
        assert_eq!(kg.train().len(), 4);
        assert!(kg.train().contains(&Triple::new(5, 13, 0)));
        assert_eq!(kg.valid(), &[Triple::new(3, 1, 4), Triple::new(4, 12, 3)]);
        assert_eq!(kg.relations().name(13), Some("r2_inv"));
    }

    #[test]
    fn double_augmentation_is_rejected() {
        let kg = toy().augment_inverse().unwrap();
        assert!(matches!(kg.augment_inverse(), Err(Error::AlreadyAugmented)));
    }

    #[test]
    fn head_query_becomes_inverse_tail_query() {
        let kg = toy().augment_inverse().unwrap();
        assert_eq!(kg.head_query_as_tail(2, 5), Some((5, 13)));
        assert_eq!(kg.inverse_relation(13), Some(2));
        assert_eq!(toy().head_query_as_tail(2, 5), None);
    }

    #[test]
    fn overlapping_splits_are_rejected() {
        let v = Vocab::from_names(["a", "b"]).unwrap();
        let r = Vocab::from_names(["r"]).unwrap();
        let t = Triple::new(0, 0, 1);
        assert!(KnowledgeGraph::new(v.clone(), r.clone(), vec![t], vec![], vec![t]).is_err());
        assert!(KnowledgeGraph::new(v, r, vec![], vec![Triple::new(0, 0, 2)], vec![]).is_err());
    }

    #[test]
    fn degrees_count_symmetrized_edges() {
        let kg = toy().augment_inverse().unwrap();
        let total: u32 = kg.degrees().iter().sum();
        assert_eq!(total as usize, 2 * toy().train().len());
        assert_eq!(kg.degrees()[0], 1);
        assert_eq!(kg.degrees()[5], 1);
        assert_eq!(kg.degrees()[3], 0);
    }
}
