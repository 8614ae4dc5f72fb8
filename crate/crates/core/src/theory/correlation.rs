use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::DatasetBundle;
use crate::error::{MkrError, Result};

pub const DEFAULT_BUCKETS: usize = 5;

/// Pairs whose key count lies in `lower..=upper`, and the mean of the other
/// count over them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bucket {
    pub lower: usize,
    pub upper: usize,
    pub pairs: usize,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionReport {
    pub buckets: Vec<Bucket>,
    pub global_mean: f64,
}

impl DirectionReport {
    pub fn is_strictly_increasing(&self) -> bool {
        self.buckets.len() >= 2 && self.buckets.windows(2).all(|w| w[1].mean > w[0].mean)
    }

    /// Largest `|bucket mean − global mean|` measured in the bucket's own
    /// standard errors. A bucket with zero spread that sits off the global
    /// mean counts as infinitely far.
    pub fn max_standard_errors_from_global(&self) -> f64 {
        self.buckets
            .iter()
            .map(|b| {
                let gap = (b.mean - self.global_mean).abs();
                if gap == 0.0 {
                    0.0
                } else if b.std_error > 0.0 {
                    gap / b.std_error
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub pairs: usize,
    /// Bucketed by common raters, measuring common graph neighbours.
    pub rs_to_kg: DirectionReport,
    /// Bucketed by common graph neighbours, measuring common raters.
    pub kg_to_rs: DirectionReport,
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Splits pairs into up to `buckets` groups at quantiles of `key`. Equal
/// keys always share a group, so heavy ties can leave fewer groups.
fn bucketize(key: &[usize], value: &[usize], buckets: usize) -> DirectionReport {
    let n = key.len();
    let mut sorted = key.to_vec();
    sorted.sort_unstable();
    let mut lowers: Vec<usize> = (0..buckets).map(|b| sorted[b * n / buckets]).collect();
    lowers.dedup();

    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); lowers.len()];
    for (&k, &v) in key.iter().zip(value) {
        let g = lowers.partition_point(|&lo| lo <= k) - 1;
        groups[g].push(v as f64);
    }
    let buckets = groups
        .iter()
        .enumerate()
        .map(|(g, xs)| {
            let m = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / m;
            let var = if xs.len() > 1 {
                xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
            } else {
                0.0
            };
            Bucket {
                lower: lowers[g],
                upper: lowers.get(g + 1).map_or(sorted[n - 1], |&next| next - 1),
                pairs: xs.len(),
                mean,
                std_error: (var / m).sqrt(),
            }
        })
        .collect();
    DirectionReport {
        buckets,
        global_mean: value.iter().sum::<usize>() as f64 / n as f64,
    }
}

pub fn correlation_study(bundle: &DatasetBundle, pair_samples: usize, seed: u64) -> Result<CorrelationReport> {
    correlation_study_with(bundle, pair_samples, DEFAULT_BUCKETS, seed)
}

/// Samples item pairs uniformly (distinct items, with replacement across
/// pairs) and relates their common positive raters to the common neighbours
/// of their aligned entities in the undirected graph. Every split counts.
pub fn correlation_study_with(
    bundle: &DatasetBundle,
    pair_samples: usize,
    buckets: usize,
    seed: u64,
) -> Result<CorrelationReport> {
    let n_items = bundle.n_items();
    if n_items < 2 {
        return Err(MkrError::data(format!("correlation study needs at least 2 items, got {n_items}")));
    }
    if pair_samples == 0 || buckets == 0 {
        return Err(MkrError::Config("pair_samples and buckets must be positive".into()));
    }

    let mut raters: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_items];
    for r in bundle.interactions.iter().filter(|r| r.label == 1) {
        raters[r.item].insert(r.user);
    }
    let mut adjacent: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); bundle.n_entities()];
    for t in &bundle.triples {
        if t.head != t.tail {
            adjacent[t.head].insert(t.tail);
            adjacent[t.tail].insert(t.head);
        }
    }
    let raters: Vec<Vec<usize>> = raters.into_iter().map(|s| s.into_iter().collect()).collect();
    let neighbours: Vec<Vec<usize>> = (0..n_items)
        .map(|v| {
            let mut s = BTreeSet::new();
            for &ent in bundle.alignment.entities_of(v) {
                s.extend(adjacent[ent].iter().copied());
            }
            s.into_iter().collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut common_raters = Vec::with_capacity(pair_samples);
    let mut common_neighbours = Vec::with_capacity(pair_samples);
    for _ in 0..pair_samples {
        let a = rng.random_range(0..n_items);
        let mut b = rng.random_range(0..n_items - 1);
        if b >= a {
            b += 1;
        }
        common_raters.push(intersection_size(&raters[a], &raters[b]));
        common_neighbours.push(intersection_size(&neighbours[a], &neighbours[b]));
    }
    Ok(CorrelationReport {
        pairs: pair_samples,
        rs_to_kg: bucketize(&common_raters, &common_neighbours, buckets),
        kg_to_rs: bucketize(&common_neighbours, &common_raters, buckets),
    })
}
