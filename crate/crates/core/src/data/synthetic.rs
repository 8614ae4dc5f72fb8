//! Aligned recommender + knowledge-graph data with planted latent structure.
//!
//! Users, items and entities get Gaussian latent vectors. Entity `i` is
//! aligned with item `i` and its latent is `ρ·z_item + √(1−ρ²)·noise`, so
//! `ρ` controls how much the graph knows about the items. Interactions are
//! drawn from user–item affinity, triples from entity–entity affinity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{split, to_implicit, DatasetBundle, RawInteraction, RawTriple};
use crate::error::{MkrError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub users: usize,
    pub items: usize,
    /// Entities `0..items` are aligned one-to-one with items; the rest are
    /// graph-only.
    pub entities: usize,
    pub relations: usize,
    pub correlation: f64,
    pub latent_dim: usize,
    pub interactions_per_user: usize,
    pub triples_per_entity: usize,
    /// Inverse temperature of the user–item choice.
    pub preference_sharpness: f64,
    /// Inverse temperature of the head–tail choice.
    pub kg_sharpness: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(
        users: usize,
        items: usize,
        entities: usize,
        relations: usize,
        correlation: f64,
        seed: u64,
    ) -> Self {
        SyntheticConfig {
            users,
            items,
            entities,
            relations,
            correlation,
            latent_dim: 8,
            interactions_per_user: 10,
            triples_per_entity: 10,
            preference_sharpness: 2.0,
            kg_sharpness: 3.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MkrError::Config(msg));
        if self.users == 0 || self.items < 2 || self.relations == 0 || self.latent_dim == 0 {
            return bad(format!(
                "synthetic sizes must be positive (users {}, items {}, relations {}, latent_dim {})",
                self.users, self.items, self.relations, self.latent_dim
            ));
        }
        if self.entities < self.items {
            return bad(format!(
                "need at least as many entities ({}) as items ({}) for one-to-one alignment",
                self.entities, self.items
            ));
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return bad(format!("correlation {} outside [0, 1]", self.correlation));
        }
        if self.interactions_per_user == 0 || 2 * self.interactions_per_user > self.items {
            return bad(format!(
                "interactions_per_user {} must be in 1..={}",
                self.interactions_per_user,
                self.items / 2
            ));
        }
        if self.triples_per_entity == 0 || self.triples_per_entity >= self.entities {
            return bad(format!(
                "triples_per_entity {} must be in 1..{}",
                self.triples_per_entity, self.entities
            ));
        }
        Ok(())
    }
}

/// The planted vectors, indexed by the generator's own numbering
/// (`u{k}`, `i{k}`, `e{k}` in the raw ids of the bundle).
#[derive(Clone, Debug)]
pub struct SyntheticLatents {
    pub users: Vec<Vec<f64>>,
    pub items: Vec<Vec<f64>>,
    pub entities: Vec<Vec<f64>>,
}

fn gaussian(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Samples `k` distinct indices with probability proportional to
/// `exp(logit)` (Gumbel top-k).
fn gumbel_top_k(rng: &mut ChaCha8Rng, logits: &[(usize, f64)], k: usize) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = logits
        .iter()
        .map(|&(i, l)| {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            (l - (-u.ln()).ln(), i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().take(k).map(|(_, i)| i).collect()
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<DatasetBundle> {
    generate_synthetic_with_latents(config).map(|(b, _)| b)
}

pub fn generate_synthetic_with_latents(config: &SyntheticConfig) -> Result<(DatasetBundle, SyntheticLatents)> {
    config.validate()?;
    let k = config.latent_dim;
    let norm = (k as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let users: Vec<Vec<f64>> = (0..config.users).map(|_| gaussian(&mut rng, k)).collect();
    let items: Vec<Vec<f64>> = (0..config.items).map(|_| gaussian(&mut rng, k)).collect();
    let rho = config.correlation;
    let keep = (1.0 - rho * rho).max(0.0).sqrt();
    let entities: Vec<Vec<f64>> = (0..config.entities)
        .map(|e| {
            let noise = gaussian(&mut rng, k);
            match items.get(e) {
                Some(z) => z.iter().zip(&noise).map(|(a, b)| rho * a + keep * b).collect(),
                None => noise,
            }
        })
        .collect();
    let directions: Vec<Vec<f64>> = (0..config.relations).map(|_| gaussian(&mut rng, k)).collect();

    let mut ratings = Vec::new();
    for (u, zu) in users.iter().enumerate() {
        let logits: Vec<(usize, f64)> = items
            .iter()
            .enumerate()
            .map(|(i, zi)| (i, config.preference_sharpness * dot(zu, zi) / norm))
            .collect();
        for i in gumbel_top_k(&mut rng, &logits, config.interactions_per_user) {
            ratings.push(RawInteraction {
                user: format!("u{u}"),
                item: format!("i{i}"),
                rating: 1.0,
            });
        }
    }

    let mut triples = Vec::new();
    for (h, zh) in entities.iter().enumerate() {
        let logits: Vec<(usize, f64)> = entities
            .iter()
            .enumerate()
            .filter(|&(t, _)| t != h)
            .map(|(t, zt)| (t, config.kg_sharpness * dot(zh, zt) / norm))
            .collect();
        for t in gumbel_top_k(&mut rng, &logits, config.triples_per_entity) {
            let relation = directions
                .iter()
                .enumerate()
                .max_by(|a, b| dot(a.1, &entities[t]).total_cmp(&dot(b.1, &entities[t])))
                .map(|(r, _)| r)
                .unwrap_or(0);
            triples.push(RawTriple {
                head: format!("e{h}"),
                relation: format!("r{relation}"),
                tail: format!("e{t}"),
            });
        }
    }
    let alignment: Vec<(String, String)> =
        (0..config.items).map(|i| (format!("i{i}"), format!("e{i}"))).collect();

    let labeled = to_implicit(&ratings, None, config.seed.wrapping_add(1))?;
    let bundle = DatasetBundle::assemble(&labeled, &triples, &alignment)?;
    let bundle = split(bundle, config.seed.wrapping_add(2))?;
    Ok((
        bundle,
        SyntheticLatents {
            users,
            items,
            entities,
        },
    ))
}
