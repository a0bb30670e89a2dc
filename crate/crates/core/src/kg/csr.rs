use super::{EntityId, RelationId, Triple};

/// One adjacency entry: the edge id, its relation and the entity on the
/// other end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeRef {
    pub id: u32,
    pub rel: RelationId,
    pub other: EntityId,
}

/// CSR index over an owned edge list, forward (by head) and reverse (by tail).
///
/// Edge ids are positions in the list handed to [`ObservedGraph::new`].
/// `degrees()` is the out-degree, which on an inverse-augmented edge list
/// equals the total (in + out) degree of the original graph.
#[derive(Debug, Clone)]
pub struct ObservedGraph {
    num_entities: usize,
    triples: Vec<Triple>,
    out_offsets: Vec<usize>,
    out_ids: Vec<u32>,
    in_offsets: Vec<usize>,
    in_ids: Vec<u32>,
    degrees: Vec<u32>,
}

fn bucket(n: usize, keys: impl Iterator<Item = EntityId> + Clone) -> (Vec<usize>, Vec<u32>) {
    let mut offsets = vec![0usize; n + 1];
    for k in keys.clone() {
        offsets[k as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut ids = vec![0u32; offsets[n]];
    for (id, k) in keys.enumerate() {
        let slot = &mut cursor[k as usize];
        ids[*slot] = id as u32;
        *slot += 1;
    }
    (offsets, ids)
}

impl ObservedGraph {
    pub fn new(num_entities: usize, triples: Vec<Triple>) -> Self {
        let (out_offsets, out_ids) = bucket(num_entities, triples.iter().map(|t| t.head));
        let (in_offsets, in_ids) = bucket(num_entities, triples.iter().map(|t| t.tail));
        let degrees = out_offsets.windows(2).map(|w| (w[1] - w[0]) as u32).collect();
        ObservedGraph {
            num_entities,
            triples,
            out_offsets,
            out_ids,
            in_offsets,
            in_ids,
            degrees,
        }
    }

    /// Index over the subset `ids` of `triples`; edge ids are renumbered.
    pub fn from_subset(num_entities: usize, triples: &[Triple], ids: &[u32]) -> Self {
        Self::new(num_entities, ids.iter().map(|&i| triples[i as usize]).collect())
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_edges(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn triple(&self, id: u32) -> Triple {
        self.triples[id as usize]
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn degree(&self, e: EntityId) -> u32 {
        self.degrees[e as usize]
    }

    pub fn out_edges(&self, head: EntityId) -> impl Iterator<Item = EdgeRef> + '_ {
        let h = head as usize;
        self.out_ids[self.out_offsets[h]..self.out_offsets[h + 1]]
            .iter()
            .map(move |&id| {
                let t = self.triples[id as usize];
                EdgeRef {
                    id,
                    rel: t.rel,
                    other: t.tail,
                }
            })
    }

    pub fn in_edges(&self, tail: EntityId) -> impl Iterator<Item = EdgeRef> + '_ {
        let o = tail as usize;
        self.in_ids[self.in_offsets[o]..self.in_offsets[o + 1]]
            .iter()
            .map(move |&id| {
                let t = self.triples[id as usize];
                EdgeRef {
                    id,
                    rel: t.rel,
                    other: t.head,
                }
            })
    }

    /// Neighbours reached through out-edges (with multiplicity).
    pub fn out_neighbors(&self, head: EntityId) -> impl Iterator<Item = EntityId> + '_ {
        let h = head as usize;
        self.out_ids[self.out_offsets[h]..self.out_offsets[h + 1]]
            .iter()
            .map(move |&id| self.triples[id as usize].tail)
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.out_edges(t.head)
            .any(|e| e.rel == t.rel && e.other == t.tail)
    }
}
