//! Losses, negative sampling, the Adam optimizer and the alternating
//! recommendation/graph training schedule.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{check_gradients, GradCheckReport, ParamId, ParamKind, ParameterStore, Tape, Tensor, Var};
use crate::data::{generate_synthetic, DatasetBundle, Split, SyntheticConfig, Triple};
use crate::error::{MkrError, Result};
use crate::eval;
use crate::model::{HyperParams, MkrModel, ModelSizes, TaskSchedule, Variant};
use crate::scalar::Scalar;

pub const PROB_CLAMP: f64 = 1e-12;
/// Rejected corruptions before falling back to the smallest absent tail.
pub const MAX_KG_REJECTS: usize = 100;

/// Mean binary cross-entropy of `[B×1]` probabilities, clamped to
/// `[1e-12, 1 − 1e-12]`.
pub fn rs_loss<T: Scalar>(tape: &mut Tape<T>, probs: Var, labels: &[u8]) -> Result<Var> {
    if labels.is_empty() {
        return Err(MkrError::contract("empty recommendation batch"));
    }
    if tape.value(probs).len() != labels.len() {
        return Err(MkrError::dim("rs_loss", tape.shape(probs), &[labels.len(), 1]));
    }
    let shape = tape.shape(probs).to_vec();
    let eps = T::lit(PROB_CLAMP);
    let p = tape.clamp(probs, eps, T::one() - eps);
    let y: Vec<T> = labels.iter().map(|&l| if l == 1 { T::one() } else { T::zero() }).collect();
    let y = tape.constant(Tensor::new(shape.clone(), y)?);
    let not_y = tape.constant(Tensor::new(
        shape.clone(),
        labels.iter().map(|&l| if l == 1 { T::zero() } else { T::one() }).collect(),
    )?);
    let one = tape.constant(Tensor::ones(&shape));
    let ln_p = tape.ln(p);
    let q = tape.sub(one, p)?;
    let ln_q = tape.ln(q);
    let a = tape.mul(y, ln_p)?;
    let b = tape.mul(not_y, ln_q)?;
    let s = tape.add(a, b)?;
    let m = tape.mean(s);
    Ok(tape.scale(m, -T::one()))
}

/// `−λ1 (mean true score − mean corrupted score)`.
pub fn kg_loss<T: Scalar>(tape: &mut Tape<T>, true_scores: Var, corrupt_scores: Var, kg_weight: f64) -> Result<Var> {
    if tape.value(true_scores).is_empty() || tape.value(corrupt_scores).is_empty() {
        return Err(MkrError::contract("graph batch needs true and corrupted triples"));
    }
    let a = tape.mean(true_scores);
    let b = tape.mean(corrupt_scores);
    let d = tape.sub(a, b)?;
    Ok(tape.scale(d, T::lit(-kg_weight)))
}

/// `λ2 · (Σ ‖w‖² over `weights` + Σ ‖x‖² over looked-up embedding rows)`.
pub fn reg_loss<T: Scalar>(
    tape: &mut Tape<T>,
    store: &ParameterStore<T>,
    weights: &[ParamId],
    lookups: &[Var],
    l2_weight: f64,
) -> Result<Var> {
    let mut total: Option<Var> = None;
    let vars: Vec<Var> = weights.iter().map(|&id| tape.param(store, id)).collect();
    for x in vars.into_iter().chain(lookups.iter().copied()) {
        let s = tape.squared_norm(x);
        total = Some(match total {
            Some(t) => tape.add(t, s)?,
            None => s,
        });
    }
    Ok(match total {
        Some(t) => tape.scale(t, T::lit(l2_weight)),
        None => tape.constant(Tensor::scalar(T::zero())),
    })
}

/// Weights the regularizer covers for a task loss: every non-bias
/// parameter it reaches except the embedding tables, whose looked-up rows
/// are regularized instead.
pub fn regularized_weights<T: Scalar>(model: &MkrModel<T>, tape: &Tape<T>, task_loss: Var) -> Vec<ParamId> {
    let t = &model.tables;
    let tables = [t.user, t.item, t.entity, t.relation];
    tape.params_reaching(task_loss)
        .into_iter()
        .filter(|&id| model.params().kind(id) == ParamKind::Weight && !tables.contains(&id))
        .collect()
}

/// Labeled recommendation examples with one sampled entity per row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RsBatch {
    pub users: Vec<usize>,
    pub items: Vec<usize>,
    pub entities: Vec<usize>,
    pub labels: Vec<u8>,
}

/// True triples, one corruption each, and the sampled item of each head
/// (shared by the triple and its corruption).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KgBatch {
    pub positives: Vec<Triple>,
    pub negatives: Vec<Triple>,
    pub items: Vec<Option<usize>>,
}

/// Task loss and the lookups it used.
pub struct Objective {
    pub task: Var,
    pub lookups: Vec<Var>,
}

pub fn rs_objective<T: Scalar>(model: &MkrModel<T>, tape: &mut Tape<T>, batch: &RsBatch) -> Result<Objective> {
    let out = model.rs_batch(tape, &batch.users, &batch.items, &batch.entities)?;
    Ok(Objective {
        task: rs_loss(tape, out.probs, &batch.labels)?,
        lookups: out.lookups,
    })
}

pub fn kg_objective<T: Scalar>(model: &MkrModel<T>, tape: &mut Tape<T>, batch: &KgBatch) -> Result<Objective> {
    if batch.positives.len() != batch.negatives.len() || batch.positives.len() != batch.items.len() {
        return Err(MkrError::contract("graph batch columns differ in length"));
    }
    let col = |ts: &[Triple], f: fn(&Triple) -> usize| ts.iter().map(f).collect::<Vec<_>>();
    let mut run = |ts: &[Triple]| {
        model.kg_batch(
            tape,
            &col(ts, |t| t.head),
            &col(ts, |t| t.relation),
            &batch.items,
            &col(ts, |t| t.tail),
        )
    };
    let pos = run(&batch.positives)?;
    let neg = run(&batch.negatives)?;
    let task = kg_loss(tape, pos.scores, neg.scores, model.hyper().kg_weight)?;
    let mut lookups = pos.lookups;
    lookups.extend(neg.lookups);
    Ok(Objective { task, lookups })
}

/// `task + reg`, the regularizer covering what the task loss reaches.
pub fn with_regularizer<T: Scalar>(model: &MkrModel<T>, tape: &mut Tape<T>, objective: &Objective) -> Result<Var> {
    let weights = regularized_weights(model, tape, objective.task);
    let lookups: &[Var] = if weights.is_empty() { &[] } else { &objective.lookups };
    let reg = reg_loss(tape, model.params(), &weights, lookups, model.hyper().l2_weight)?;
    tape.add(objective.task, reg)
}

/// `rs_loss + kg_loss + reg_loss` on one batch of each task.
pub fn joint_objective<T: Scalar>(
    model: &MkrModel<T>,
    tape: &mut Tape<T>,
    rs: &RsBatch,
    kg: &KgBatch,
) -> Result<Var> {
    let a = rs_objective(model, tape, rs)?;
    let b = kg_objective(model, tape, kg)?;
    let task = tape.add(a.task, b.task)?;
    let mut lookups = a.lookups;
    lookups.extend(b.lookups);
    with_regularizer(model, tape, &Objective { task, lookups })
}

/// Lookup structures for sampling.
#[derive(Clone, Debug)]
pub struct SamplingIndex {
    n_items: usize,
    n_entities: usize,
    /// Training positives per user.
    positives: Vec<HashSet<usize>>,
    /// Every triple of the graph, all splits.
    triples: HashSet<Triple>,
}

impl SamplingIndex {
    pub fn new(bundle: &DatasetBundle) -> Self {
        let mut positives = vec![HashSet::new(); bundle.n_users()];
        for r in bundle.interactions_in(Split::Train).filter(|r| r.label == 1) {
            positives[r.user].insert(r.item);
        }
        SamplingIndex {
            n_items: bundle.n_items(),
            n_entities: bundle.n_entities(),
            positives,
            triples: bundle.triples.iter().copied().collect(),
        }
    }

    pub fn positives(&self, user: usize) -> &HashSet<usize> {
        &self.positives[user]
    }
}

/// Up to `count` distinct items, uniform over those the user has no
/// training positive for. Returns fewer when not enough are eligible and
/// errors when none is.
pub fn sample_rs_negatives<R: Rng>(
    user: usize,
    count: usize,
    index: &SamplingIndex,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let seen = index
        .positives
        .get(user)
        .ok_or_else(|| MkrError::contract(format!("user {user} out of range")))?;
    let eligible = index.n_items - seen.len();
    if eligible == 0 {
        return Err(MkrError::data(format!("user {user} has interacted with every item")));
    }
    if count >= eligible || 4 * count >= eligible {
        let mut pool: Vec<usize> = (0..index.n_items).filter(|v| !seen.contains(v)).collect();
        let k = count.min(eligible);
        let (chosen, _) = pool.partial_shuffle(rng, k);
        return Ok(chosen.to_vec());
    }
    let mut picked = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = rng.random_range(0..index.n_items);
        if !seen.contains(&v) && picked.insert(v) {
            out.push(v);
        }
    }
    Ok(out)
}

/// Replaces the tail with a uniform entity such that the result is not in
/// the graph. After [`MAX_KG_REJECTS`] rejections the smallest valid tail is
/// used.
pub fn sample_kg_negative<R: Rng>(triple: Triple, index: &SamplingIndex, rng: &mut R) -> Result<Triple> {
    let with_tail = |tail| Triple { tail, ..triple };
    for _ in 0..MAX_KG_REJECTS {
        let t = with_tail(rng.random_range(0..index.n_entities));
        if !index.triples.contains(&t) {
            return Ok(t);
        }
    }
    (0..index.n_entities)
        .map(with_tail)
        .find(|t| !index.triples.contains(t))
        .ok_or_else(|| {
            MkrError::data(format!(
                "every entity is a true tail of ({}, {}): no corruption exists",
                triple.head, triple.relation
            ))
        })
}

/// Adam with per-parameter step counters; only the parameters passed to
/// [`Adam::step`] move.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    steps: Vec<u64>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(store: &ParameterStore<T>, learning_rate: f64) -> Self {
        let zeros: Vec<Tensor<T>> = store.ids().map(|id| Tensor::zeros(store.value(id).shape())).collect();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: zeros.clone(),
            v: zeros,
            steps: vec![0; store.len()],
        }
    }

    pub fn steps(&self, id: ParamId) -> u64 {
        self.steps[id.index()]
    }

    pub fn step(&mut self, store: &mut ParameterStore<T>, ids: &[ParamId]) {
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let (lr, eps) = (T::lit(self.learning_rate), T::lit(self.eps));
        for &id in ids {
            let k = id.index();
            self.steps[k] += 1;
            let n = self.steps[k] as i32;
            let c1 = T::one() - b1.powi(n);
            let c2 = T::one() - b2.powi(n);
            let grad = store.grad(id).data().to_vec();
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            let w = store.value_mut(id).data_mut();
            for i in 0..w.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (T::one() - b1) * g;
                v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// One line of the per-epoch log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub rs_loss: f64,
    pub kg_loss: f64,
    pub val_auc: f64,
    pub val_acc: f64,
    /// Validation tail RMSE. Selects the checkpoint only when the graph task
    /// trains alone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_rmse: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T: Scalar> {
    /// Parameters of the best validation epoch.
    pub model: MkrModel<T>,
    pub log: Vec<EpochRecord>,
    /// 1-based epoch the returned model comes from.
    pub best_epoch: usize,
    /// Optimizer steps taken, per task.
    pub rs_steps: usize,
    pub kg_steps: usize,
}

/// Optimizer steps one epoch takes.
pub fn steps_per_epoch(hp: &HyperParams, rs_positives: usize, kg_triples: usize) -> usize {
    let rs = match hp.tasks {
        TaskSchedule::Joint => hp.rs_steps * (2 * rs_positives).div_ceil(hp.batch_size_rs),
        TaskSchedule::KgeOnly => 0,
    };
    rs + (2 * kg_triples).div_ceil(hp.batch_size_kg)
}

struct Trainer<'a, T: Scalar> {
    bundle: &'a DatasetBundle,
    index: SamplingIndex,
    model: MkrModel<T>,
    adam: Adam<T>,
    rng: ChaCha8Rng,
    rs_positives: Vec<(usize, usize)>,
    kg_train: Vec<Triple>,
    epoch: usize,
    step: usize,
    rs_steps: usize,
    kg_steps: usize,
}

fn check_finite<T: Scalar>(value: T, epoch: usize, step: usize, what: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(MkrError::Divergence {
            epoch,
            step,
            detail: format!("{what} is {value}"),
        })
    }
}

impl<T: Scalar> Trainer<'_, T> {
    fn sample_entity(&mut self, item: usize) -> usize {
        *self
            .bundle
            .alignment
            .entities_of(item)
            .choose(&mut self.rng)
            .expect("items are aligned")
    }

    fn sample_item(&mut self, head: usize) -> Option<usize> {
        self.bundle.alignment.items_of(head).choose(&mut self.rng).copied()
    }

    fn update(&mut self, tape: &Tape<T>, loss: Var, task: Var, what: &str) -> Result<f64> {
        let value = tape.value(loss).item();
        check_finite(value, self.epoch, self.step, what)?;
        let reached = tape.backward(loss, self.model.params_mut())?;
        for &id in &reached {
            if !self.model.params().grad(id).all_finite() {
                return Err(MkrError::Divergence {
                    epoch: self.epoch,
                    step: self.step,
                    detail: format!("gradient of `{}` is not finite", self.model.params().name(id)),
                });
            }
        }
        self.adam.step(self.model.params_mut(), &reached);
        self.step += 1;
        Ok(tape.value(task).item().as_f64())
    }

    /// One pass over the training positives with fresh negatives.
    fn rs_pass(&mut self) -> Result<f64> {
        let mut per_user: Vec<usize> = vec![0; self.bundle.n_users()];
        for &(u, _) in &self.rs_positives {
            per_user[u] += 1;
        }
        let mut examples: Vec<(usize, usize, u8)> = self.rs_positives.iter().map(|&(u, v)| (u, v, 1)).collect();
        for (u, &count) in per_user.iter().enumerate() {
            if count == 0 {
                continue;
            }
            match sample_rs_negatives(u, count, &self.index, &mut self.rng) {
                Ok(items) => examples.extend(items.into_iter().map(|v| (u, v, 0))),
                Err(e) => log::warn!("skipping negatives for user {u}: {e}"),
            }
        }
        examples.shuffle(&mut self.rng);
        let mut total = 0.0;
        let mut batches = 0;
        let size = self.model.hyper().batch_size_rs;
        for chunk in examples.chunks(size) {
            let items: Vec<usize> = chunk.iter().map(|e| e.1).collect();
            let batch = RsBatch {
                users: chunk.iter().map(|e| e.0).collect(),
                entities: items.iter().map(|&v| self.sample_entity(v)).collect(),
                items,
                labels: chunk.iter().map(|e| e.2).collect(),
            };
            let mut tape = Tape::new();
            let obj = rs_objective(&self.model, &mut tape, &batch)?;
            let loss = with_regularizer(&self.model, &mut tape, &obj)?;
            total += self.update(&tape, loss, obj.task, "recommendation loss")?;
            batches += 1;
            self.rs_steps += 1;
        }
        Ok(total / batches.max(1) as f64)
    }

    /// One pass over the training triples, each with one corruption.
    fn kg_pass(&mut self) -> Result<f64> {
        let mut order = self.kg_train.clone();
        order.shuffle(&mut self.rng);
        let half = (self.model.hyper().batch_size_kg / 2).max(1);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(half) {
            let batch = KgBatch {
                negatives: chunk
                    .iter()
                    .map(|&t| sample_kg_negative(t, &self.index, &mut self.rng))
                    .collect::<Result<_>>()?,
                items: chunk.iter().map(|t| self.sample_item(t.head)).collect(),
                positives: chunk.to_vec(),
            };
            let mut tape = Tape::new();
            let obj = kg_objective(&self.model, &mut tape, &batch)?;
            let loss = with_regularizer(&self.model, &mut tape, &obj)?;
            total += self.update(&tape, loss, obj.task, "graph loss")?;
            batches += 1;
            self.kg_steps += 1;
        }
        Ok(total / batches.max(1) as f64)
    }
}

/// Multi-task training: each epoch runs `rs_steps` recommendation passes
/// followed by one graph pass (graph passes only for
/// [`TaskSchedule::KgeOnly`]). Returns the parameters of the best
/// validation epoch (AUC for joint training, tail RMSE for graph-only) and
/// stops after `patience` epochs without improvement (`0` disables early
/// stopping).
pub fn train<T: Scalar>(bundle: &DatasetBundle, hp: &HyperParams, seed: u64) -> Result<TrainOutcome<T>> {
    train_with_callback(bundle, hp, seed, |_| {})
}

/// [`train`], calling `on_epoch` after every epoch.
pub fn train_with_callback<T: Scalar>(
    bundle: &DatasetBundle,
    hp: &HyperParams,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>> {
    hp.validate()?;
    bundle.validate()?;
    let model = MkrModel::<T>::new(hp.clone(), ModelSizes::of(bundle), seed)?;
    let rs_positives: Vec<(usize, usize)> = bundle
        .interactions_in(Split::Train)
        .filter(|r| r.label == 1)
        .map(|r| (r.user, r.item))
        .collect();
    let kg_train: Vec<Triple> = bundle.triples_in(Split::Train).copied().collect();
    let kge_only = hp.tasks == TaskSchedule::KgeOnly;
    if rs_positives.is_empty() && !kge_only {
        return Err(MkrError::data("no training positives"));
    }
    if kg_train.is_empty() {
        return Err(MkrError::data("no training triples"));
    }
    let adam = Adam::new(model.params(), hp.learning_rate);
    let mut tr = Trainer {
        bundle,
        index: SamplingIndex::new(bundle),
        model,
        adam,
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15),
        rs_positives,
        kg_train,
        epoch: 0,
        step: 0,
        rs_steps: 0,
        kg_steps: 0,
    };

    let mut log = Vec::new();
    let mut best: Option<(f64, usize, ParameterStore<T>)> = None;
    let mut stale = 0;
    for epoch in 1..=hp.epochs {
        tr.epoch = epoch;
        let start = Instant::now();
        let mut rs = 0.0;
        if !kge_only {
            for _ in 0..hp.rs_steps {
                rs += tr.rs_pass()?;
            }
            rs /= hp.rs_steps as f64;
        }
        let kg = tr.kg_pass()?;

        let scored = eval::score_split(&tr.model, bundle, Split::Validation)?;
        let val_auc = eval::auc(&scored)?;
        let val_acc = eval::accuracy(&scored, 0.5)?;
        let val_rmse = Some(eval::kge_rmse(&tr.model, bundle, Split::Validation)?);
        let record = EpochRecord {
            epoch,
            rs_loss: rs,
            kg_loss: kg,
            val_auc,
            val_acc,
            val_rmse,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: rs_loss {rs:.4} kg_loss {kg:.4} val_auc {val_auc:.4} val_acc {val_acc:.4}"
        );
        on_epoch(&record);
        log.push(record);

        // higher is better
        let criterion = match val_rmse {
            Some(r) if kge_only => -r,
            _ => val_auc,
        };
        if best.as_ref().is_none_or(|(b, _, _)| criterion > *b) {
            best = Some((criterion, epoch, tr.model.params().clone()));
            stale = 0;
        } else {
            stale += 1;
            if hp.patience > 0 && stale >= hp.patience {
                log::info!("early stop after epoch {epoch}");
                break;
            }
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    let mut model = tr.model;
    *model.params_mut() = params;
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        rs_steps: tr.rs_steps,
        kg_steps: tr.kg_steps,
    })
}

/// Finite-difference check of the full joint objective (with the L2 term at
/// 0.01) on a model with 4 users, items, entities and relations, `d = 2`
/// and one layer of every stack. Batches are the whole training split plus
/// one sampled corruption per triple.
pub fn tiny_gradient_check(seed: u64, variant: Variant) -> Result<GradCheckReport> {
    let mut config = SyntheticConfig::new(4, 4, 4, 4, 0.9, seed);
    config.interactions_per_user = 2;
    config.triples_per_entity = 2;
    let bundle = generate_synthetic(&config)?;
    let hp = HyperParams {
        low_layers: 1,
        high_layers: 1,
        dim: 2,
        l2_weight: 0.01,
        variant,
        ..Default::default()
    };
    let model = MkrModel::<f64>::new(hp, ModelSizes::of(&bundle), seed)?;
    let rows: Vec<_> = bundle.interactions_in(Split::Train).collect();
    let rs = RsBatch {
        users: rows.iter().map(|r| r.user).collect(),
        items: rows.iter().map(|r| r.item).collect(),
        entities: rows.iter().map(|r| bundle.alignment.entities_of(r.item)[0]).collect(),
        labels: rows.iter().map(|r| r.label).collect(),
    };
    let index = SamplingIndex::new(&bundle);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positives: Vec<Triple> = bundle.triples_in(Split::Train).copied().collect();
    let kg = KgBatch {
        negatives: positives
            .iter()
            .map(|&t| sample_kg_negative(t, &index, &mut rng))
            .collect::<Result<_>>()?,
        items: positives.iter().map(|t| bundle.alignment.items_of(t.head).first().copied()).collect(),
        positives,
    };
    let mut store = model.params().clone();
    check_gradients(&mut store, None, 1e-6, |tape, store| {
        let m = model.with_params(store.clone())?;
        joint_objective(&m, tape, &rs, &kg)
    })
}
