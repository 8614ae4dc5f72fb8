//! The full network: embedding tables, the user MLP, shared item/entity
//! layers, the relation MLP and the two prediction heads.
//!
//! Batched methods record on a [`Tape`] and take the sampled partner of each
//! row explicitly (`entities` for items, `items` for heads). Evaluation
//! methods average over the whole alignment set instead of sampling.

mod checkpoint;
mod hyper;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use hyper::{HyperParams, RsHead, TaskSchedule, Variant, KEYS as HYPER_KEYS};

use crate::autodiff::{ParamId, ParamKind, ParameterStore, Tape, Tensor, Var};
use crate::data::{Alignment, DatasetBundle, Triple};
use crate::error::{MkrError, Result};
use crate::scalar::Scalar;
use crate::units::{
    apply_shared, forward_stack, uniform_tensor, vector_init_limit, Activation, CrossCompressUnit, DcnLayer,
    DenseLayer, SharedUnit, StitchUnit,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelSizes {
    pub users: usize,
    pub items: usize,
    pub entities: usize,
    pub relations: usize,
}

impl ModelSizes {
    pub fn of(bundle: &DatasetBundle) -> Self {
        ModelSizes {
            users: bundle.n_users(),
            items: bundle.n_items(),
            entities: bundle.n_entities(),
            relations: bundle.n_relations(),
        }
    }
}

/// Parameter ids of the four lookup tables (`[rows×d]` each).
#[derive(Clone, Copy, Debug)]
pub struct EmbeddingTables {
    pub user: ParamId,
    pub item: ParamId,
    pub entity: ParamId,
    pub relation: ParamId,
}

/// Output of a batched recommendation pass.
#[derive(Clone, Debug)]
pub struct RsForward {
    /// `[B×1]` pre-sigmoid scores.
    pub logits: Var,
    /// `[B×1]` click probabilities.
    pub probs: Var,
    /// Embedding rows looked up by this pass.
    pub lookups: Vec<Var>,
}

/// Output of a batched graph pass.
#[derive(Clone, Debug)]
pub struct KgForward {
    /// `[B×d]` predicted tails.
    pub predicted: Var,
    /// `[B×d]` tail embedding rows.
    pub tails: Var,
    /// `[B×1]` `σ(tᵀ t̂)`.
    pub scores: Var,
    pub lookups: Vec<Var>,
}

#[derive(Clone, Debug)]
pub struct MkrModel<T: Scalar> {
    hp: HyperParams,
    sizes: ModelSizes,
    store: ParameterStore<T>,
    pub tables: EmbeddingTables,
    pub user_mlp: Vec<DenseLayer>,
    /// Empty for the plain variant.
    pub shared_units: Vec<SharedUnit>,
    /// Item pathway of the plain variant; empty otherwise.
    pub item_mlp: Vec<DenseLayer>,
    /// Pathway for heads with no aligned item.
    pub entity_mlp: Vec<DenseLayer>,
    pub relation_mlp: Vec<DenseLayer>,
    pub kge_head: Vec<DenseLayer>,
    /// Empty for the inner-product head.
    pub rs_head: Vec<DenseLayer>,
}

fn mlp<T: Scalar>(
    store: &mut ParameterStore<T>,
    prefix: &str,
    dims: &[usize],
    last: Activation,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DenseLayer>> {
    let n = dims.len() - 1;
    (0..n)
        .map(|k| {
            let act = if k + 1 == n { last } else { Activation::Relu };
            DenseLayer::register(store, &format!("{prefix}.{k}"), dims[k], dims[k + 1], act, rng)
        })
        .collect()
}

fn table<T: Scalar>(
    store: &mut ParameterStore<T>,
    name: &str,
    rows: usize,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ParamId> {
    if rows == 0 {
        return Err(MkrError::Config(format!("`{name}` table needs at least one row")));
    }
    store.register(
        name,
        ParamKind::Weight,
        uniform_tensor(&[rows, d], vector_init_limit(d), rng),
    )
}

fn check_ids(what: &str, ids: &[usize], bound: usize) -> Result<()> {
    if ids.is_empty() {
        return Err(MkrError::contract(format!("empty {what} batch")));
    }
    match ids.iter().find(|&&i| i >= bound) {
        Some(i) => Err(MkrError::contract(format!("{what} id {i} out of range (< {bound})"))),
        None => Ok(()),
    }
}

impl<T: Scalar> MkrModel<T> {
    /// Registers every parameter in a fixed order, so equal `(hp, sizes,
    /// seed)` give identical models.
    pub fn new(hp: HyperParams, sizes: ModelSizes, seed: u64) -> Result<Self> {
        hp.validate()?;
        let d = hp.dim;
        let l = hp.low_layers;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        let tables = EmbeddingTables {
            user: table(&mut store, "user_emb", sizes.users, d, &mut rng)?,
            item: table(&mut store, "item_emb", sizes.items, d, &mut rng)?,
            entity: table(&mut store, "entity_emb", sizes.entities, d, &mut rng)?,
            relation: table(&mut store, "relation_emb", sizes.relations, d, &mut rng)?,
        };
        let square = vec![d; l + 1];
        // relu between layers; the tower outputs stay signed
        let tower_last = Activation::Identity;
        let user_mlp = mlp(&mut store, "user_mlp", &square, tower_last, &mut rng)?;
        let mut shared_units = Vec::new();
        let mut item_mlp = Vec::new();
        match hp.variant {
            Variant::Plain => item_mlp = mlp(&mut store, "item_mlp", &square, tower_last, &mut rng)?,
            variant => {
                for k in 0..l {
                    let prefix = format!("cc.{k}");
                    shared_units.push(match variant {
                        Variant::Full => {
                            SharedUnit::CrossCompress(CrossCompressUnit::register(&mut store, &prefix, d, &mut rng)?)
                        }
                        Variant::Dcn => SharedUnit::Dcn(DcnLayer::register(&mut store, &prefix, d, &mut rng)?),
                        Variant::Stitch => SharedUnit::Stitch(StitchUnit::register(&mut store, &prefix, d)?),
                        Variant::Plain => unreachable!(),
                    });
                }
            }
        }
        let entity_mlp = mlp(&mut store, "entity_mlp", &square, tower_last, &mut rng)?;
        let relation_mlp = mlp(&mut store, "relation_mlp", &square, tower_last, &mut rng)?;
        let mut dims = vec![2 * d];
        dims.extend(std::iter::repeat_n(d, hp.high_layers));
        let kge_head = mlp(&mut store, "kge_head", &dims, Activation::Identity, &mut rng)?;
        let rs_head = match hp.rs_head {
            RsHead::InnerProduct => Vec::new(),
            RsHead::Mlp => {
                let mut dims = vec![2 * d];
                dims.extend(std::iter::repeat_n(d, hp.rs_mlp_depth - 1));
                dims.push(1);
                mlp(&mut store, "rs_head", &dims, Activation::Identity, &mut rng)?
            }
        };
        Ok(MkrModel {
            hp,
            sizes,
            store,
            tables,
            user_mlp,
            shared_units,
            item_mlp,
            entity_mlp,
            relation_mlp,
            kge_head,
            rs_head,
        })
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hp
    }

    pub fn sizes(&self) -> ModelSizes {
        self.sizes
    }

    pub fn params(&self) -> &ParameterStore<T> {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore<T> {
        &mut self.store
    }

    /// The same architecture with another set of values. `store` must have
    /// exactly this model's names and shapes.
    pub fn with_params(&self, store: ParameterStore<T>) -> Result<Self> {
        let same = store.len() == self.store.len()
            && self.store.ids().zip(store.ids()).all(|(a, b)| {
                self.store.name(a) == store.name(b) && self.store.value(a).shape() == store.value(b).shape()
            });
        if !same {
            return Err(MkrError::contract("parameter store does not match the architecture"));
        }
        Ok(MkrModel {
            store,
            ..self.clone()
        })
    }

    /// Errors unless the bundle's id spaces match the tables.
    pub fn check_compatible(&self, bundle: &DatasetBundle) -> Result<()> {
        let b = ModelSizes::of(bundle);
        if b != self.sizes {
            return Err(MkrError::data(format!(
                "model sizes {:?} do not match dataset sizes {:?}",
                self.sizes, b
            )));
        }
        Ok(())
    }

    fn uses_shared(&self) -> bool {
        !self.shared_units.is_empty()
    }

    /// Parameters of the shared item/entity layers.
    pub fn shared_params(&self) -> Vec<ParamId> {
        let mut out = Vec::new();
        for unit in &self.shared_units {
            match unit {
                SharedUnit::CrossCompress(u) => out.extend(u.params()),
                SharedUnit::Dcn(u) => out.extend([u.w_ev, u.w_ve, u.b_v, u.b_e]),
                SharedUnit::Stitch(u) => out.extend([u.alpha_aa, u.alpha_ab, u.alpha_ba, u.alpha_bb]),
            }
        }
        out
    }

    /// Parameters only the graph task uses: the relation table, the
    /// relation MLP and the tail predictor.
    pub fn kge_exclusive_params(&self) -> Vec<ParamId> {
        let mut out = vec![self.tables.relation];
        for layer in self.relation_mlp.iter().chain(&self.kge_head) {
            out.extend([layer.weight, layer.bias]);
        }
        out.sort();
        out
    }

    fn lookup(&self, tape: &mut Tape<T>, table: ParamId, rows: &[usize], lookups: &mut Vec<Var>) -> Result<Var> {
        let t = tape.param(&self.store, table);
        let x = tape.gather(t, rows)?;
        lookups.push(x);
        Ok(x)
    }

    /// `u_L` rows for a batch of users.
    pub fn user_tower(&self, tape: &mut Tape<T>, users: &[usize], lookups: &mut Vec<Var>) -> Result<Var> {
        check_ids("user", users, self.sizes.users)?;
        let u = self.lookup(tape, self.tables.user, users, lookups)?;
        forward_stack(&self.user_mlp, tape, &self.store, u)
    }

    /// `(v_L, e_L)` for aligned item/entity rows. For the plain variant the
    /// entity side is the entity MLP output and does not interact.
    fn shared_pathway(
        &self,
        tape: &mut Tape<T>,
        items: &[usize],
        entities: &[usize],
        lookups: &mut Vec<Var>,
    ) -> Result<(Var, Var)> {
        check_ids("item", items, self.sizes.items)?;
        check_ids("entity", entities, self.sizes.entities)?;
        if items.len() != entities.len() {
            return Err(MkrError::contract("item and entity batches differ in length"));
        }
        let v = self.lookup(tape, self.tables.item, items, lookups)?;
        let e = self.lookup(tape, self.tables.entity, entities, lookups)?;
        if self.uses_shared() {
            apply_shared(&self.shared_units, tape, &self.store, v, e)
        } else {
            let v = forward_stack(&self.item_mlp, tape, &self.store, v)?;
            let e = forward_stack(&self.entity_mlp, tape, &self.store, e)?;
            Ok((v, e))
        }
    }

    fn check_aligned(alignment: &Alignment, items: &[usize], entities: &[usize]) -> Result<()> {
        for (&v, &e) in items.iter().zip(entities) {
            if v >= alignment.n_items() || !alignment.entities_of(v).contains(&e) {
                return Err(MkrError::contract(format!("entity {e} is not associated with item {v}")));
            }
        }
        Ok(())
    }

    fn head_scores(&self, tape: &mut Tape<T>, u: Var, v: Var) -> Result<Var> {
        if self.rs_head.is_empty() {
            let p = tape.mul(u, v)?;
            Ok(tape.row_sum(p))
        } else {
            let x = tape.concat_cols(u, v)?;
            forward_stack(&self.rs_head, tape, &self.store, x)
        }
    }

    /// Recommendation pass with one sampled entity per row.
    pub fn rs_batch(
        &self,
        tape: &mut Tape<T>,
        users: &[usize],
        items: &[usize],
        entities: &[usize],
    ) -> Result<RsForward> {
        if users.len() != items.len() {
            return Err(MkrError::contract("user and item batches differ in length"));
        }
        let mut lookups = Vec::new();
        let u = self.user_tower(tape, users, &mut lookups)?;
        let (v, _) = self.shared_pathway(tape, items, entities, &mut lookups)?;
        let logits = self.head_scores(tape, u, v)?;
        let probs = tape.sigmoid(logits);
        Ok(RsForward { logits, probs, lookups })
    }

    /// `h_L` rows. `items[k]` is the sampled item of `heads[k]`; `None`
    /// sends that head through the entity MLP.
    pub fn head_tower(
        &self,
        tape: &mut Tape<T>,
        heads: &[usize],
        items: &[Option<usize>],
        lookups: &mut Vec<Var>,
    ) -> Result<Var> {
        check_ids("head", heads, self.sizes.entities)?;
        if heads.len() != items.len() {
            return Err(MkrError::contract("head and item batches differ in length"));
        }
        let use_shared = self.uses_shared();
        let (mut aligned, mut alone) = (Vec::new(), Vec::new());
        for (k, item) in items.iter().enumerate() {
            match item {
                Some(_) if use_shared => aligned.push(k),
                _ => alone.push(k),
            }
        }
        let part_a = if aligned.is_empty() {
            None
        } else {
            let hs: Vec<usize> = aligned.iter().map(|&k| heads[k]).collect();
            let vs: Vec<usize> = aligned.iter().map(|&k| items[k].unwrap_or(0)).collect();
            Some(self.shared_pathway(tape, &vs, &hs, lookups)?.1)
        };
        let part_b = if alone.is_empty() {
            None
        } else {
            let hs: Vec<usize> = alone.iter().map(|&k| heads[k]).collect();
            let h = self.lookup(tape, self.tables.entity, &hs, lookups)?;
            Some(forward_stack(&self.entity_mlp, tape, &self.store, h)?)
        };
        match (part_a, part_b) {
            (Some(a), None) => Ok(a),
            (None, Some(b)) => Ok(b),
            (Some(a), Some(b)) => {
                let both = tape.concat_rows(a, b)?;
                let mut position = vec![0; heads.len()];
                for (p, &k) in aligned.iter().chain(&alone).enumerate() {
                    position[k] = p;
                }
                tape.gather(both, &position)
            }
            (None, None) => unreachable!("batch is non-empty"),
        }
    }

    /// `t̂ = M^K([h_L; r_L])` given precomputed `h_L` rows.
    fn predict_from_heads(
        &self,
        tape: &mut Tape<T>,
        h: Var,
        relations: &[usize],
        lookups: &mut Vec<Var>,
    ) -> Result<Var> {
        check_ids("relation", relations, self.sizes.relations)?;
        let r = self.lookup(tape, self.tables.relation, relations, lookups)?;
        let r = forward_stack(&self.relation_mlp, tape, &self.store, r)?;
        let x = tape.concat_cols(h, r)?;
        forward_stack(&self.kge_head, tape, &self.store, x)
    }

    /// Graph pass with one sampled item per head (or `None`).
    pub fn kg_batch(
        &self,
        tape: &mut Tape<T>,
        heads: &[usize],
        relations: &[usize],
        items: &[Option<usize>],
        tails: &[usize],
    ) -> Result<KgForward> {
        if heads.len() != relations.len() || heads.len() != tails.len() {
            return Err(MkrError::contract("triple batch columns differ in length"));
        }
        check_ids("tail", tails, self.sizes.entities)?;
        let mut lookups = Vec::new();
        let h = self.head_tower(tape, heads, items, &mut lookups)?;
        let predicted = self.predict_from_heads(tape, h, relations, &mut lookups)?;
        let t = self.lookup(tape, self.tables.entity, tails, &mut lookups)?;
        let p = tape.mul(t, predicted)?;
        let s = tape.row_sum(p);
        let scores = tape.sigmoid(s);
        Ok(KgForward {
            predicted,
            tails: t,
            scores,
            lookups,
        })
    }

    /// `ŷ` for one user, item and sampled entity `e ∈ S(item)`.
    pub fn rs_forward(&self, alignment: &Alignment, user: usize, item: usize, entity: usize) -> Result<T> {
        self.require_entities(alignment, item)?;
        Self::check_aligned(alignment, &[item], &[entity])?;
        let mut tape = Tape::new();
        let out = self.rs_batch(&mut tape, &[user], &[item], &[entity])?;
        Ok(tape.value(out.probs).data()[0])
    }

    /// `ŷ` with `v_L` averaged over all of `S(item)`.
    pub fn rs_forward_eval(&self, alignment: &Alignment, user: usize, item: usize) -> Result<T> {
        Ok(self.score_pairs(alignment, &[(user, item)])?[0])
    }

    fn require_entities(&self, alignment: &Alignment, item: usize) -> Result<()> {
        if item >= alignment.n_items() || alignment.entities_of(item).is_empty() {
            return Err(MkrError::contract(format!("item {item} has no associated entity")));
        }
        Ok(())
    }

    /// `(t̂, σ(tᵀ t̂))` for one triple. `item` must be in `S(head)` and is
    /// required exactly when the head is aligned and the shared pathway is
    /// in use.
    pub fn kge_forward(
        &self,
        alignment: &Alignment,
        head: usize,
        relation: usize,
        item: Option<usize>,
        tail: usize,
    ) -> Result<(Vec<T>, T)> {
        if head >= alignment.n_entities() {
            return Err(MkrError::contract(format!("head {head} out of range")));
        }
        let partners = alignment.items_of(head);
        match item {
            Some(v) if !partners.contains(&v) => {
                return Err(MkrError::contract(format!("item {v} is not associated with head {head}")))
            }
            None if self.uses_shared() && !partners.is_empty() => {
                return Err(MkrError::contract(format!("head {head} is aligned; pass one of its items")))
            }
            _ => {}
        }
        let mut tape = Tape::new();
        let out = self.kg_batch(&mut tape, &[head], &[relation], &[item], &[tail])?;
        Ok((
            tape.value(out.predicted).data().to_vec(),
            tape.value(out.scores).data()[0],
        ))
    }

    /// `u_L` for every user, `[M×d]`.
    pub fn user_vectors(&self) -> Result<Tensor<T>> {
        let users: Vec<usize> = (0..self.sizes.users).collect();
        let mut tape = Tape::new();
        let u = self.user_tower(&mut tape, &users, &mut Vec::new())?;
        Ok(tape.value(u).clone())
    }

    /// Evaluation-mode `v_L` for every item, `[N×d]`: the mean over `S(v)`
    /// in ascending entity order.
    pub fn item_vectors(&self, alignment: &Alignment) -> Result<Tensor<T>> {
        let n = self.sizes.items;
        if alignment.n_items() != n || alignment.n_entities() != self.sizes.entities {
            return Err(MkrError::contract("alignment does not match model sizes"));
        }
        if let Some(v) = (0..n).find(|&v| alignment.entities_of(v).is_empty()) {
            return Err(MkrError::contract(format!("item {v} has no associated entity")));
        }
        let (items, entities): (Vec<usize>, Vec<usize>) = alignment.pairs().unzip();
        let mut tape = Tape::new();
        let (v, _) = self.shared_pathway(&mut tape, &items, &entities, &mut Vec::new())?;
        Ok(mean_rows(tape.value(v), &items, n, self.hp.dim))
    }

    /// Evaluation-mode `h_L` for every entity, `[|E|×d]`.
    pub fn head_vectors(&self, alignment: &Alignment) -> Result<Tensor<T>> {
        let n = self.sizes.entities;
        if alignment.n_entities() != n || alignment.n_items() != self.sizes.items {
            return Err(MkrError::contract("alignment does not match model sizes"));
        }
        let d = self.hp.dim;
        let mut out = Tensor::zeros(&[n, d]);
        let (items, heads): (Vec<usize>, Vec<usize>) = if self.uses_shared() {
            let mut pairs: Vec<(usize, usize)> = alignment.pairs().map(|(v, e)| (e, v)).collect();
            pairs.sort();
            pairs.into_iter().map(|(e, v)| (v, e)).unzip()
        } else {
            (Vec::new(), Vec::new())
        };
        let mut covered = vec![false; n];
        if !heads.is_empty() {
            let mut tape = Tape::new();
            let (_, h) = self.shared_pathway(&mut tape, &items, &heads, &mut Vec::new())?;
            let means = mean_rows(tape.value(h), &heads, n, d);
            for &e in &heads {
                covered[e] = true;
                out.row_mut(e).copy_from_slice(means.row(e));
            }
        }
        let alone: Vec<usize> = (0..n).filter(|&e| !covered[e]).collect();
        if !alone.is_empty() {
            let mut tape = Tape::new();
            let mut lookups = Vec::new();
            let h = self.lookup(&mut tape, self.tables.entity, &alone, &mut lookups)?;
            let h = forward_stack(&self.entity_mlp, &mut tape, &self.store, h)?;
            for (k, &e) in alone.iter().enumerate() {
                out.row_mut(e).copy_from_slice(tape.value(h).row(k));
            }
        }
        Ok(out)
    }

    /// Evaluation-mode click probabilities for `(user, item)` pairs.
    pub fn score_pairs(&self, alignment: &Alignment, pairs: &[(usize, usize)]) -> Result<Vec<T>> {
        let users = self.user_vectors()?;
        let items = self.item_vectors(alignment)?;
        self.score_with(&users, &items, pairs)
    }

    /// Probabilities from precomputed [`Self::user_vectors`] and
    /// [`Self::item_vectors`].
    pub fn score_with(&self, users: &Tensor<T>, items: &Tensor<T>, pairs: &[(usize, usize)]) -> Result<Vec<T>> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let (us, vs): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        check_ids("user", &us, users.rows())?;
        check_ids("item", &vs, items.rows())?;
        if self.rs_head.is_empty() {
            return Ok(pairs
                .iter()
                .map(|&(u, v)| {
                    let s: T = users.row(u).iter().zip(items.row(v)).map(|(a, b)| *a * *b).sum();
                    crate::autodiff::stable_sigmoid(s)
                })
                .collect());
        }
        let mut tape = Tape::new();
        let ut = tape.constant(users.clone());
        let vt = tape.constant(items.clone());
        let u = tape.gather(ut, &us)?;
        let v = tape.gather(vt, &vs)?;
        let logits = self.head_scores(&mut tape, u, v)?;
        let p = tape.sigmoid(logits);
        Ok(tape.value(p).data().to_vec())
    }

    /// Evaluation-mode `t̂` rows for a list of triples, `[B×d]`.
    pub fn predict_tails(&self, alignment: &Alignment, triples: &[Triple]) -> Result<Tensor<T>> {
        if triples.is_empty() {
            return Err(MkrError::contract("no triples to predict"));
        }
        let heads = self.head_vectors(alignment)?;
        let rows: Vec<usize> = triples.iter().map(|t| t.head).collect();
        let relations: Vec<usize> = triples.iter().map(|t| t.relation).collect();
        check_ids("head", &rows, self.sizes.entities)?;
        let mut tape = Tape::new();
        let all = tape.constant(heads);
        let h = tape.gather(all, &rows)?;
        let p = self.predict_from_heads(&mut tape, h, &relations, &mut Vec::new())?;
        Ok(tape.value(p).clone())
    }

    /// The tail embedding rows of a list of triples, `[B×d]`.
    pub fn tail_embeddings(&self, triples: &[Triple]) -> Result<Tensor<T>> {
        let rows: Vec<usize> = triples.iter().map(|t| t.tail).collect();
        check_ids("tail", &rows, self.sizes.entities)?;
        let table = self.store.value(self.tables.entity);
        let d = self.hp.dim;
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in &rows {
            data.extend_from_slice(table.row(r));
        }
        Tensor::new(vec![rows.len(), d], data)
    }
}

/// Averages `rows` grouped by `keys` (already grouped and in a fixed order)
/// into an `[n×d]` table; groups with no rows stay zero.
fn mean_rows<T: Scalar>(rows: &Tensor<T>, keys: &[usize], n: usize, d: usize) -> Tensor<T> {
    let mut out = Tensor::zeros(&[n, d]);
    let mut counts = vec![0usize; n];
    for (k, &key) in keys.iter().enumerate() {
        counts[key] += 1;
        for (o, x) in out.row_mut(key).iter_mut().zip(rows.row(k)) {
            *o += *x;
        }
    }
    for (key, &c) in counts.iter().enumerate() {
        if c > 1 {
            let c = T::from_usize_lossy(c);
            out.row_mut(key).iter_mut().for_each(|x| *x /= c);
        }
    }
    out
}

#[cfg(test)]
mod tests;
