//! Interactions, knowledge-graph triples and the item–entity alignment,
//! plus the preprocessing that turns raw ratings into a split dataset.

mod io;
mod synthetic;

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MkrError, Result};

pub use io::{read_alignment, read_kg, read_ratings};
pub use synthetic::{generate_synthetic, generate_synthetic_with_latents, SyntheticConfig, SyntheticLatents};

/// One raw rating row.
#[derive(Clone, Debug, PartialEq)]
pub struct RawInteraction {
    pub user: String,
    pub item: String,
    pub rating: f64,
}

/// A rating after the implicit-feedback transform.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledInteraction {
    pub user: String,
    pub item: String,
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RawTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub label: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "validation" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Bijection between raw string ids and dense indices `0..len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    names: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Dense ids `0..n` named by their decimal index.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::new();
        for i in 0..n {
            m.intern(&i.to_string());
        }
        m
    }

    pub fn intern(&mut self, raw: &str) -> usize {
        if let Some(&i) = self.lookup.get(raw) {
            return i;
        }
        let i = self.names.len();
        self.names.push(raw.to_string());
        self.lookup.insert(raw.to_string(), i);
        i
    }

    pub fn get(&self, raw: &str) -> Option<usize> {
        self.lookup.get(raw).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Item → entity sets and the inverse entity → item sets. Both sides are
/// sorted and duplicate-free.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alignment {
    item_entities: Vec<Vec<usize>>,
    entity_items: Vec<Vec<usize>>,
}

impl Alignment {
    pub fn from_pairs(n_items: usize, n_entities: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut item_entities = vec![Vec::new(); n_items];
        let mut entity_items = vec![Vec::new(); n_entities];
        for &(item, entity) in pairs {
            if item >= n_items || entity >= n_entities {
                return Err(MkrError::data(format!(
                    "alignment pair ({item}, {entity}) out of range"
                )));
            }
            item_entities[item].push(entity);
            entity_items[entity].push(item);
        }
        for list in item_entities.iter_mut().chain(entity_items.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Alignment {
            item_entities,
            entity_items,
        })
    }

    /// Entities associated with an item.
    pub fn entities_of(&self, item: usize) -> &[usize] {
        &self.item_entities[item]
    }

    /// Items associated with an entity.
    pub fn items_of(&self, entity: usize) -> &[usize] {
        &self.entity_items[entity]
    }

    pub fn n_items(&self) -> usize {
        self.item_entities.len()
    }

    pub fn n_entities(&self) -> usize {
        self.entity_items.len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.item_entities
            .iter()
            .enumerate()
            .flat_map(|(i, es)| es.iter().map(move |&e| (i, e)))
    }
}

/// Fully remapped dataset with split assignments.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    pub users: IdMap,
    pub items: IdMap,
    pub entities: IdMap,
    pub relations: IdMap,
    pub interactions: Vec<Interaction>,
    pub triples: Vec<Triple>,
    pub alignment: Alignment,
    pub interaction_split: Vec<Split>,
    pub triple_split: Vec<Split>,
}

impl DatasetBundle {
    /// Remaps raw ids densely, in order of first appearance. Every item must
    /// have at least one aligned entity; triples are deduplicated. All
    /// records start in the training split.
    pub fn assemble(
        interactions: &[LabeledInteraction],
        triples: &[RawTriple],
        alignment: &[(String, String)],
    ) -> Result<Self> {
        let mut users = IdMap::new();
        let mut items = IdMap::new();
        let mut entities = IdMap::new();
        let mut relations = IdMap::new();

        let mut dense = Vec::with_capacity(interactions.len());
        for r in interactions {
            if r.label > 1 {
                return Err(MkrError::data(format!("label {} is not 0/1", r.label)));
            }
            dense.push(Interaction {
                user: users.intern(&r.user),
                item: items.intern(&r.item),
                label: r.label,
            });
        }
        let mut pairs = Vec::new();
        for (item, entity) in alignment {
            if let Some(i) = items.get(item) {
                pairs.push((i, entities.intern(entity)));
            }
        }
        let mut seen = HashSet::new();
        let mut dense_triples = Vec::new();
        for t in triples {
            let triple = Triple {
                head: entities.intern(&t.head),
                relation: relations.intern(&t.relation),
                tail: entities.intern(&t.tail),
            };
            if seen.insert(triple) {
                dense_triples.push(triple);
            }
        }
        let alignment = Alignment::from_pairs(items.len(), entities.len(), &pairs)?;
        if let Some(i) = (0..items.len()).find(|&i| alignment.entities_of(i).is_empty()) {
            return Err(MkrError::data(format!(
                "item `{}` has no aligned entity",
                items.name(i)
            )));
        }
        let n_i = dense.len();
        let n_t = dense_triples.len();
        Ok(DatasetBundle {
            users,
            items,
            entities,
            relations,
            interactions: dense,
            triples: dense_triples,
            alignment,
            interaction_split: vec![Split::Train; n_i],
            triple_split: vec![Split::Train; n_t],
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn interactions_in(&self, split: Split) -> impl Iterator<Item = &Interaction> + '_ {
        self.interactions
            .iter()
            .zip(&self.interaction_split)
            .filter(move |(_, &s)| s == split)
            .map(|(r, _)| r)
    }

    pub fn triples_in(&self, split: Split) -> impl Iterator<Item = &Triple> + '_ {
        self.triples
            .iter()
            .zip(&self.triple_split)
            .filter(move |(_, &s)| s == split)
            .map(|(t, _)| t)
    }

    /// Checks the structural invariants of a bundle.
    pub fn validate(&self) -> Result<()> {
        let (m, n, e, r) = (self.n_users(), self.n_items(), self.n_entities(), self.n_relations());
        if self.interaction_split.len() != self.interactions.len()
            || self.triple_split.len() != self.triples.len()
        {
            return Err(MkrError::data("split assignment length mismatch"));
        }
        if self.alignment.n_items() != n || self.alignment.n_entities() != e {
            return Err(MkrError::data("alignment size does not match id maps"));
        }
        for x in &self.interactions {
            if x.user >= m || x.item >= n || x.label > 1 {
                return Err(MkrError::data(format!("interaction {x:?} out of range")));
            }
            if self.alignment.entities_of(x.item).is_empty() {
                return Err(MkrError::data(format!("item {} has no aligned entity", x.item)));
            }
        }
        let mut seen = HashSet::new();
        for t in &self.triples {
            if t.head >= e || t.tail >= e || t.relation >= r {
                return Err(MkrError::data(format!("triple {t:?} out of range")));
            }
            if !seen.insert(*t) {
                return Err(MkrError::data(format!("duplicate triple {t:?}")));
            }
        }
        Ok(())
    }
}

/// Turns ratings into binary feedback. Ratings at or above `threshold` are
/// positives (every rating when there is no threshold). Each user then gets
/// as many negatives as positives, drawn uniformly without replacement from
/// the items that user never rated.
pub fn to_implicit(
    records: &[RawInteraction],
    threshold: Option<f64>,
    seed: u64,
) -> Result<Vec<LabeledInteraction>> {
    let mut items = IdMap::new();
    let mut users = IdMap::new();
    let mut watched: Vec<HashSet<usize>> = Vec::new();
    let mut positives: Vec<Vec<usize>> = Vec::new();
    for r in records {
        let u = users.intern(&r.user);
        let i = items.intern(&r.item);
        if u == watched.len() {
            watched.push(HashSet::new());
            positives.push(Vec::new());
        }
        let first_time = watched[u].insert(i);
        let positive = threshold.is_none_or(|t| r.rating >= t);
        if positive && (first_time || !positives[u].contains(&i)) {
            positives[u].push(i);
        }
    }
    if positives.iter().all(|p| p.is_empty()) {
        return Err(MkrError::data(format!(
            "no rating reaches the positive threshold {threshold:?}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (u, pos) in positives.iter().enumerate() {
        if pos.is_empty() {
            continue;
        }
        let user = users.name(u);
        for &i in pos {
            out.push(LabeledInteraction {
                user: user.to_string(),
                item: items.name(i).to_string(),
                label: 1,
            });
        }
        let mut unwatched: Vec<usize> = (0..items.len()).filter(|i| !watched[u].contains(i)).collect();
        if unwatched.len() < pos.len() {
            log::warn!(
                "user `{user}` has {} positives but only {} unwatched items",
                pos.len(),
                unwatched.len()
            );
        }
        let k = pos.len().min(unwatched.len());
        let (chosen, _) = unwatched.partial_shuffle(&mut rng, k);
        for &i in chosen.iter() {
            out.push(LabeledInteraction {
                user: user.to_string(),
                item: items.name(i).to_string(),
                label: 0,
            });
        }
    }
    Ok(out)
}

/// Drops ratings whose item has no aligned entity.
pub fn filter_aligned(
    records: &[RawInteraction],
    alignment: &[(String, String)],
) -> Result<Vec<RawInteraction>> {
    let aligned: HashSet<&str> = alignment.iter().map(|(i, _)| i.as_str()).collect();
    let kept: Vec<RawInteraction> = records
        .iter()
        .filter(|r| aligned.contains(r.item.as_str()))
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(MkrError::data("no interaction references an aligned item"));
    }
    Ok(kept)
}

/// Sizes of the train/validation/test parts for `n` records at 6:2:2.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (0.6 * n as f64).round() as usize;
    let validation = (0.2 * n as f64).round() as usize;
    (train, validation, n - train - validation)
}

fn assign_splits(n: usize, rng: &mut ChaCha8Rng) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let (train, validation, _) = split_sizes(n);
    let mut out = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if rank < train {
            Split::Train
        } else if rank < train + validation {
            Split::Validation
        } else {
            Split::Test
        };
    }
    out
}

/// Uniform random 6:2:2 split of interactions and, independently, triples.
pub fn split(mut bundle: DatasetBundle, seed: u64) -> Result<DatasetBundle> {
    if bundle.interactions.len() < 5 {
        return Err(MkrError::data(format!(
            "need at least 5 interactions to split, got {}",
            bundle.interactions.len()
        )));
    }
    if bundle.triples.len() < 5 {
        return Err(MkrError::data(format!(
            "need at least 5 triples to split, got {}",
            bundle.triples.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    bundle.interaction_split = assign_splits(bundle.interactions.len(), &mut rng);
    bundle.triple_split = assign_splits(bundle.triples.len(), &mut rng);
    Ok(bundle)
}

/// Keeps `round(ratio · n)` of the `n` selected indices. Selection follows a
/// seeded ranking of the candidates, so for a fixed seed a smaller ratio
/// always keeps a subset of what a larger ratio keeps.
fn nested_keep(candidates: &[usize], ratio: f64, seed: u64) -> HashSet<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ranked: Vec<(u64, usize)> = candidates.iter().map(|&i| (rng.random::<u64>(), i)).collect();
    ranked.sort_unstable();
    let keep = (ratio * candidates.len() as f64).round() as usize;
    ranked.into_iter().take(keep).map(|(_, i)| i).collect()
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(MkrError::Config(format!("ratio {ratio} is outside (0, 1]")));
    }
    Ok(())
}

/// Keeps a uniform `ratio` fraction of the training interactions; the
/// validation and test interactions are untouched.
pub fn subsample_training(bundle: &DatasetBundle, ratio: f64, seed: u64) -> Result<DatasetBundle> {
    check_ratio(ratio)?;
    let train: Vec<usize> = (0..bundle.interactions.len())
        .filter(|&i| bundle.interaction_split[i] == Split::Train)
        .collect();
    let keep = nested_keep(&train, ratio, seed);
    let mut out = bundle.clone();
    let (interactions, split): (Vec<_>, Vec<_>) = bundle
        .interactions
        .iter()
        .zip(&bundle.interaction_split)
        .enumerate()
        .filter(|(i, (_, s))| **s != Split::Train || keep.contains(i))
        .map(|(_, (r, s))| (*r, *s))
        .unzip();
    out.interactions = interactions;
    out.interaction_split = split;
    Ok(out)
}

/// Keeps a uniform `ratio` fraction of the training triples.
pub fn subsample_triples(bundle: &DatasetBundle, ratio: f64, seed: u64) -> Result<DatasetBundle> {
    check_ratio(ratio)?;
    let train: Vec<usize> = (0..bundle.triples.len())
        .filter(|&i| bundle.triple_split[i] == Split::Train)
        .collect();
    let keep = nested_keep(&train, ratio, seed);
    let mut out = bundle.clone();
    let (triples, split): (Vec<_>, Vec<_>) = bundle
        .triples
        .iter()
        .zip(&bundle.triple_split)
        .enumerate()
        .filter(|(i, (_, s))| **s != Split::Train || keep.contains(i))
        .map(|(_, (t, s))| (*t, *s))
        .unzip();
    out.triples = triples;
    out.triple_split = split;
    Ok(out)
}
