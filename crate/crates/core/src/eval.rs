//! CTR metrics, top-K precision/recall and tail-prediction RMSE.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::data::{DatasetBundle, Split};
use crate::error::{MkrError, Result};
use crate::model::MkrModel;
use crate::scalar::Scalar;

/// K values reported by default.
pub const DEFAULT_KS: [usize; 7] = [1, 2, 5, 10, 20, 50, 100];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub user: usize,
    pub item: usize,
    pub label: u8,
    pub score: f64,
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, via the rank-sum statistic.
pub fn auc(pairs: &[ScoredPair]) -> Result<f64> {
    if let Some(p) = pairs.iter().find(|p| !p.score.is_finite()) {
        return Err(MkrError::contract(format!("non-finite score {}", p.score)));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].score.total_cmp(&pairs[b].score));
    let n_pos = pairs.iter().filter(|p| p.label == 1).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MkrError::data("AUC needs both positive and negative labels"));
    }
    // sum of 1-based average ranks of the positives
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pairs[order[end]].score == pairs[order[start]].score {
            end += 1;
        }
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let pos = order[start..end].iter().filter(|&&k| pairs[k].label == 1).count();
        rank_sum += avg_rank * pos as f64;
        start = end;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Fraction of pairs with `(score ≥ threshold) == label`.
pub fn accuracy(pairs: &[ScoredPair], threshold: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(MkrError::data("accuracy of an empty set"));
    }
    let hits = pairs
        .iter()
        .filter(|p| (p.score >= threshold) == (p.label == 1))
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Macro-averaged precision@K and recall@K.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub precision: BTreeMap<usize, f64>,
    pub recall: BTreeMap<usize, f64>,
    pub users: usize,
}

/// Ranks, for every user with at least one held-out positive, all items
/// that are not training positives (ties to the smaller item id) and
/// compares the top `K` against the held-out positives.
pub fn top_k_from_scores(
    n_items: usize,
    train_positives: &[HashSet<usize>],
    held_out: &[HashSet<usize>],
    ks: &[usize],
    mut score: impl FnMut(usize, &[usize]) -> Result<Vec<f64>>,
) -> Result<TopK> {
    if let Some(&k) = ks.iter().find(|&&k| k == 0) {
        return Err(MkrError::Config(format!("K must be positive, got {k}")));
    }
    let max_k = ks.iter().copied().max().unwrap_or(0);
    let mut out = TopK::default();
    for (user, positives) in held_out.iter().enumerate() {
        if positives.is_empty() {
            continue;
        }
        let empty = HashSet::new();
        let seen = train_positives.get(user).unwrap_or(&empty);
        let candidates: Vec<usize> = (0..n_items).filter(|v| !seen.contains(v)).collect();
        let scores = score(user, &candidates)?;
        let mut ranked: Vec<(f64, usize)> = scores.into_iter().zip(candidates).collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        ranked.truncate(max_k);
        for &k in ks {
            let hits = ranked.iter().take(k).filter(|(_, v)| positives.contains(v)).count() as f64;
            *out.precision.entry(k).or_default() += hits / k as f64;
            *out.recall.entry(k).or_default() += hits / positives.len() as f64;
        }
        out.users += 1;
    }
    if out.users == 0 {
        return Err(MkrError::data("no user has a held-out positive"));
    }
    let n = out.users as f64;
    out.precision.values_mut().for_each(|x| *x /= n);
    out.recall.values_mut().for_each(|x| *x /= n);
    Ok(out)
}

fn positives(bundle: &DatasetBundle, split: Split) -> Vec<HashSet<usize>> {
    let mut sets = vec![HashSet::new(); bundle.n_users()];
    for r in bundle.interactions_in(split).filter(|r| r.label == 1) {
        sets[r.user].insert(r.item);
    }
    sets
}

/// Top-K over `split` positives, excluding each user's training positives
/// from the candidates.
pub fn top_k<T: Scalar>(model: &MkrModel<T>, bundle: &DatasetBundle, split: Split, ks: &[usize]) -> Result<TopK> {
    model.check_compatible(bundle)?;
    let users = model.user_vectors()?;
    let items = model.item_vectors(&bundle.alignment)?;
    top_k_from_scores(
        bundle.n_items(),
        &positives(bundle, Split::Train),
        &positives(bundle, split),
        ks,
        |u, cands| {
            let pairs: Vec<(usize, usize)> = cands.iter().map(|&v| (u, v)).collect();
            Ok(model
                .score_with(&users, &items, &pairs)?
                .into_iter()
                .map(Scalar::as_f64)
                .collect())
        },
    )
}

/// Evaluation-mode scores for every labeled interaction of `split`.
pub fn score_split<T: Scalar>(model: &MkrModel<T>, bundle: &DatasetBundle, split: Split) -> Result<Vec<ScoredPair>> {
    model.check_compatible(bundle)?;
    let records: Vec<_> = bundle.interactions_in(split).copied().collect();
    let pairs: Vec<(usize, usize)> = records.iter().map(|r| (r.user, r.item)).collect();
    let scores = model.score_pairs(&bundle.alignment, &pairs)?;
    Ok(records
        .iter()
        .zip(scores)
        .map(|(r, s)| ScoredPair {
            user: r.user,
            item: r.item,
            label: r.label,
            score: s.as_f64(),
        })
        .collect())
}

/// `√(mean (t̂ − t)²)` over all rows and components.
pub fn rmse<T: Scalar>(predicted: &Tensor<T>, actual: &Tensor<T>) -> Result<f64> {
    if predicted.shape() != actual.shape() {
        return Err(MkrError::dim("rmse", predicted.shape(), actual.shape()));
    }
    let sq: f64 = predicted
        .data()
        .iter()
        .zip(actual.data())
        .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
        .sum();
    Ok((sq / predicted.len() as f64).sqrt())
}

/// Tail-prediction RMSE over the triples of `split`.
pub fn kge_rmse<T: Scalar>(model: &MkrModel<T>, bundle: &DatasetBundle, split: Split) -> Result<f64> {
    model.check_compatible(bundle)?;
    let triples: Vec<_> = bundle.triples_in(split).copied().collect();
    if triples.is_empty() {
        return Err(MkrError::data(format!("no {} triples", split.as_str())));
    }
    let predicted = model.predict_tails(&bundle.alignment, &triples)?;
    rmse(&predicted, &model.tail_embeddings(&triples)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub acc: f64,
    pub precision_at: BTreeMap<usize, f64>,
    pub recall_at: BTreeMap<usize, f64>,
    pub kge_rmse: Option<f64>,
}

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// `metric,k,value` rows; `k` is empty for metrics without one.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,k,value\n");
        s.push_str(&format!("auc,,{}\nacc,,{}\n", self.auc, self.acc));
        for (k, v) in &self.precision_at {
            s.push_str(&format!("precision,{k},{v}\n"));
        }
        for (k, v) in &self.recall_at {
            s.push_str(&format!("recall,{k},{v}\n"));
        }
        if let Some(r) = self.kge_rmse {
            s.push_str(&format!("kge_rmse,,{r}\n"));
        }
        s
    }
}

/// CTR metrics on `split`, top-K for `ks` (skipped when empty) and tail
/// RMSE when the split has triples.
pub fn evaluate<T: Scalar>(
    model: &MkrModel<T>,
    bundle: &DatasetBundle,
    split: Split,
    ks: &[usize],
) -> Result<MetricReport> {
    let scored = score_split(model, bundle, split)?;
    let (precision_at, recall_at) = if ks.is_empty() {
        Default::default()
    } else {
        let t = top_k(model, bundle, split, ks)?;
        (t.precision, t.recall)
    };
    let kge_rmse = if bundle.triples_in(split).next().is_some() {
        Some(kge_rmse(model, bundle, split)?)
    } else {
        None
    };
    Ok(MetricReport {
        auc: auc(&scored)?,
        acc: accuracy(&scored, 0.5)?,
        precision_at,
        recall_at,
        kge_rmse,
    })
}
