//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::Instant;

use mkr::data::{generate_synthetic, subsample_training, DatasetBundle, Split, SyntheticConfig};
use mkr::eval::{self, ScoredPair};
use mkr::model::{HyperParams, TaskSchedule, Variant};
use mkr::theory::{
    check_prop1, check_prop2, check_prop3, check_theorem1, correlation_study, GRADIENT_TOLERANCE,
    PROP1_TOLERANCE, PROP2_TOLERANCE, PROP3_TOLERANCE,
};
use mkr::training::{tiny_gradient_check, train};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Set to a processed MovieLens-1M bundle directory to run the full-scale check.
const MOVIELENS_ENV: &str = "MKR_MOVIELENS_DIR";

enum Status {
    Pass,
    Fail,
    Waived,
}

struct Line {
    id: usize,
    title: &'static str,
    status: Status,
    detail: String,
}

fn verdict(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn fmt(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn gradients() -> Line {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut all = true;
    for seed in 0..20 {
        match tiny_gradient_check(seed, Variant::Full) {
            Ok(r) => {
                worst = worst.max(r.max_relative_error);
                all &= r.passes(GRADIENT_TOLERANCE);
            }
            Err(_) => all = false,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Line {
        id: 1,
        title: "gradient check, tiny joint model",
        status: verdict(all && secs < 10.0),
        detail: format!("20 seeds, max relative error {worst:.2e} (< 1e-4), {secs:.1}s (< 10s)"),
    }
}

fn theorem1() -> Line {
    let start = Instant::now();
    let mut all = true;
    let mut cells = Vec::new();
    for layers in 1..=3 {
        for dim in 1..=2 {
            match check_theorem1(layers, dim) {
                Ok(r) => {
                    all &= r.passed;
                    cells.push(format!(
                        "L{layers}d{dim}:{}/{}/{}",
                        r.v_sum.max_v_degree, r.v_sum.max_e_degree, r.expected_degree
                    ));
                }
                Err(e) => {
                    all = false;
                    cells.push(format!("L{layers}d{dim}:{e}"));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Line {
        id: 2,
        title: "cross-term degree doubling, exact",
        status: verdict(all && secs < 60.0),
        detail: format!("v/e degree/expected {} in {secs:.1}s (< 60s)", cells.join(" ")),
    }
}

type Check = fn(usize, usize, u64) -> mkr::Result<mkr::theory::OracleReport>;

fn proposition(id: usize, title: &'static str, check: Check, tol: f64) -> Line {
    let mut all = true;
    let mut parts = Vec::new();
    for (k, dim) in [1, 2, 8].into_iter().enumerate() {
        match check(1000, dim, 100 + k as u64) {
            Ok(r) => {
                all &= r.passes(tol);
                let skipped = if r.skipped > 0 { format!(" ({} skipped)", r.skipped) } else { String::new() };
                parts.push(format!("d={dim}: {:.1e}{skipped}", r.max_deviation));
            }
            Err(e) => {
                all = false;
                parts.push(format!("d={dim}: {e}"));
            }
        }
    }
    Line {
        id,
        title,
        status: verdict(all),
        detail: format!("1000 trials, max deviation {} (< {tol:.0e})", parts.join(", ")),
    }
}

fn pairwise_auc(pairs: &[ScoredPair]) -> f64 {
    let p = pairs.iter().filter(|x| x.label == 1).count();
    let n = pairs.len() - p;
    let mut twice = 0u64;
    for a in pairs.iter().filter(|x| x.label == 1) {
        for b in pairs.iter().filter(|x| x.label == 0) {
            twice += match a.score.partial_cmp(&b.score).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    (twice as f64 / 2.0) / (p as f64 * n as f64)
}

/// Precision and recall by counting, for each candidate, the candidates
/// ranked ahead of it.
fn enumerated_top_k(
    scores: &[Vec<f64>],
    train: &[HashSet<usize>],
    held: &[HashSet<usize>],
    k: usize,
) -> (f64, f64) {
    let (mut prec, mut rec, mut users) = (0.0, 0.0, 0.0);
    for u in 0..scores.len() {
        if held[u].is_empty() {
            continue;
        }
        let cands: Vec<usize> = (0..scores[u].len()).filter(|i| !train[u].contains(i)).collect();
        let mut hits = 0.0;
        for &c in &cands {
            let ahead = cands
                .iter()
                .filter(|&&o| scores[u][o] > scores[u][c] || (scores[u][o] == scores[u][c] && o < c))
                .count();
            if ahead < k && held[u].contains(&c) {
                hits += 1.0;
            }
        }
        prec += hits / k as f64;
        rec += hits / held[u].len() as f64;
        users += 1.0;
    }
    (prec / users, rec / users)
}

fn metric_oracles() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut auc_mismatch = 0;
    for _ in 0..500 {
        let n = rng.random_range(2..30);
        let mut pairs: Vec<ScoredPair> = (0..n)
            .map(|i| ScoredPair {
                user: 0,
                item: i,
                label: rng.random_range(0..2),
                // a coarse grid makes ties common
                score: rng.random_range(0..6) as f64 / 4.0,
            })
            .collect();
        pairs[0].label = 1;
        pairs[1].label = 0;
        if eval::auc(&pairs).unwrap() != pairwise_auc(&pairs) {
            auc_mismatch += 1;
        }
    }

    let mut topk_mismatch = 0;
    let toys = 200;
    for _ in 0..toys {
        let items = rng.random_range(3..9);
        let scores: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..items).map(|_| rng.random_range(0..4) as f64).collect())
            .collect();
        let mut train = vec![HashSet::new(); 3];
        let mut held = vec![HashSet::new(); 3];
        for u in 0..3 {
            for i in 0..items {
                match rng.random_range(0..4) {
                    0 => {
                        train[u].insert(i);
                    }
                    1 => {
                        held[u].insert(i);
                    }
                    _ => {}
                }
            }
        }
        held[0].insert(items - 1);
        train[0].remove(&(items - 1));
        let ks = [1, 2, 3, 5, 10];
        let got = eval::top_k_from_scores(items, &train, &held, &ks, |u, cands| {
            Ok(cands.iter().map(|&i| scores[u][i]).collect())
        })
        .unwrap();
        for k in ks {
            let (p, r) = enumerated_top_k(&scores, &train, &held, k);
            if (got.precision[&k] - p).abs() > 1e-12 || (got.recall[&k] - r).abs() > 1e-12 {
                topk_mismatch += 1;
                break;
            }
        }
    }
    Line {
        id: 6,
        title: "metric oracles",
        status: verdict(auc_mismatch == 0 && topk_mismatch == 0),
        detail: format!(
            "AUC differs from the pairwise count on {auc_mismatch}/500 sets; top-K differs from enumeration on {topk_mismatch}/{toys} 3-user toys"
        ),
    }
}

/// Shape of the synthetic bundle used by the end-to-end criteria.
fn synthetic(correlation: f64, seed: u64) -> DatasetBundle {
    let mut c = SyntheticConfig::new(500, 500, 500, 4, correlation, seed);
    c.latent_dim = 2;
    c.interactions_per_user = 20;
    c.triples_per_entity = 40;
    c.preference_sharpness = 1.5;
    generate_synthetic(&c).expect("synthetic bundle")
}

fn hyper(variant: Variant) -> HyperParams {
    let mut hp = HyperParams {
        dim: 8,
        learning_rate: 0.003,
        batch_size_rs: 256,
        batch_size_kg: 256,
        l2_weight: 1e-4,
        epochs: 300,
        patience: 20,
        variant,
        ..HyperParams::default()
    };
    if variant == Variant::Plain {
        hp.kg_weight = 0.0;
    }
    hp
}

struct Run {
    auc: f64,
    rmse: f64,
}

fn run(bundle: &DatasetBundle, hp: &HyperParams, seed: u64) -> Run {
    let out = train::<f64>(bundle, hp, seed).expect("training");
    let scored = eval::score_split(&out.model, bundle, Split::Test).expect("scores");
    Run {
        auc: eval::auc(&scored).expect("auc"),
        rmse: eval::kge_rmse(&out.model, bundle, Split::Test).expect("rmse"),
    }
}

/// Criteria 7 to 10 share the same trained models.
fn end_to_end() -> Vec<Line> {
    let start = Instant::now();
    let bundles: Vec<DatasetBundle> = (1..=5).map(|s| synthetic(0.9, s)).collect();
    let full: Vec<Run> = (0..3).map(|k| run(&bundles[k], &hyper(Variant::Full), k as u64 + 1)).collect();
    let plain: Vec<Run> = (0..3).map(|k| run(&bundles[k], &hyper(Variant::Plain), k as u64 + 1)).collect();
    let secs7 = start.elapsed().as_secs_f64();
    let full_auc: Vec<f64> = full.iter().map(|r| r.auc).collect();
    let plain_auc: Vec<f64> = plain.iter().map(|r| r.auc).collect();
    let gap = median(full_auc.clone()) - median(plain_auc.clone());
    let c7 = Line {
        id: 7,
        title: "graph benefit over the no-graph ablation",
        status: verdict(gap >= 0.02 && secs7 < 300.0),
        detail: format!(
            "test AUC full {} vs ablation {}, median gap {gap:.4} (>= 0.02), {secs7:.0}s (< 300s)",
            fmt(&full_auc),
            fmt(&plain_auc)
        ),
    };

    let sparse: Vec<DatasetBundle> =
        (0..3).map(|k| subsample_training(&bundles[k], 0.1, k as u64 + 1).expect("subsample")).collect();
    let full_sparse: Vec<f64> =
        (0..3).map(|k| run(&sparse[k], &hyper(Variant::Full), k as u64 + 1).auc).collect();
    let plain_sparse: Vec<f64> =
        (0..3).map(|k| run(&sparse[k], &hyper(Variant::Plain), k as u64 + 1).auc).collect();
    let drop_full = median(full_auc.clone()) - median(full_sparse.clone());
    let drop_plain = median(plain_auc) - median(plain_sparse.clone());
    let c8 = Line {
        id: 8,
        title: "sparsity trend, r = 100% to 10%",
        status: verdict(drop_full < drop_plain),
        detail: format!(
            "median AUC drop full {drop_full:.4} ({} at r=10%) vs ablation {drop_plain:.4} ({})",
            fmt(&full_sparse),
            fmt(&plain_sparse)
        ),
    };

    let mut kge_hp = hyper(Variant::Full);
    kge_hp.tasks = TaskSchedule::KgeOnly;
    let kge: Vec<f64> = (0..3).map(|k| run(&bundles[k], &kge_hp, k as u64 + 1).rmse).collect();
    let joint: Vec<f64> = full.iter().map(|r| r.rmse).collect();
    let (mj, mk) = (median(joint.clone()), median(kge.clone()));
    let c9 = Line {
        id: 9,
        title: "tail RMSE, joint vs graph-only training",
        status: verdict(mj < mk),
        detail: format!("median test RMSE joint {mj:.4} {} vs graph-only {mk:.4} {}", fmt(&joint), fmt(&kge)),
    };

    let mut full5 = full_auc;
    for k in 3..5 {
        full5.push(run(&bundles[k], &hyper(Variant::Full), k as u64 + 1).auc);
    }
    let dcn: Vec<f64> = (0..5).map(|k| run(&bundles[k], &hyper(Variant::Dcn), k as u64 + 1).auc).collect();
    let stitch: Vec<f64> =
        (0..5).map(|k| run(&bundles[k], &hyper(Variant::Stitch), k as u64 + 1).auc).collect();
    let (mf, md, ms) = (median(full5.clone()), median(dcn.clone()), median(stitch.clone()));
    let c10 = Line {
        id: 10,
        title: "variant ordering",
        status: verdict(mf >= md && mf >= ms),
        detail: format!(
            "median test AUC full {mf:.4} {} >= dcn {md:.4} {} and stitch {ms:.4} {}",
            fmt(&full5),
            fmt(&dcn),
            fmt(&stitch)
        ),
    };
    vec![c7, c8, c9, c10]
}

fn full_scale() -> Line {
    let title = "full-scale MovieLens-1M reproduction";
    let Some(dir) = std::env::var_os(MOVIELENS_ENV).map(PathBuf::from) else {
        return Line {
            id: 11,
            title,
            status: Status::Waived,
            detail: format!("{MOVIELENS_ENV} not set; the preprocessed dataset is not bundled, criteria 7-10 stand in"),
        };
    };
    let start = Instant::now();
    let result = DatasetBundle::read_dir(&dir).and_then(|b| {
        let hp = HyperParams::preset("movielens-1m")?;
        let out = train::<f64>(&b, &hp, 0)?;
        eval::auc(&eval::score_split(&out.model, &b, Split::Test)?)
    });
    let secs = start.elapsed().as_secs_f64();
    match result {
        Ok(auc) => Line {
            id: 11,
            title,
            status: verdict((auc - 0.917).abs() <= 0.02 && secs < 1800.0),
            detail: format!("test AUC {auc:.4} (0.917 +- 0.02), {secs:.0}s (< 1800s)"),
        },
        Err(e) => Line {
            id: 11,
            title,
            status: Status::Fail,
            detail: format!("{}: {e}", dir.display()),
        },
    }
}

fn correlation() -> Line {
    let planted = correlation_study(&synthetic(1.0, 11), 20_000, 11).expect("study");
    let null = correlation_study(&synthetic(0.0, 12), 20_000, 12).expect("study");
    let up = planted.rs_to_kg.is_strictly_increasing() && planted.kg_to_rs.is_strictly_increasing();
    let se = null.rs_to_kg.max_standard_errors_from_global().max(null.kg_to_rs.max_standard_errors_from_global());
    let means = |d: &mkr::theory::DirectionReport| fmt(&d.buckets.iter().map(|b| b.mean).collect::<Vec<_>>());
    Line {
        id: 12,
        title: "co-rating vs graph-neighbour correlation",
        status: verdict(up && se <= 3.0),
        detail: format!(
            "rho=1 bucket means {} and {}; rho=0 max deviation {se:.2} SE (<= 3)",
            means(&planted.rs_to_kg),
            means(&planted.kg_to_rs)
        ),
    }
}

fn main() {
    let mut lines = vec![
        gradients(),
        theorem1(),
        proposition(3, "shared-sum identity", check_prop1, PROP1_TOLERANCE),
        proposition(4, "restricted unit equals a cross layer", check_prop2, PROP2_TOLERANCE),
        proposition(5, "bias-free unit equals scalar stitching", check_prop3, PROP3_TOLERANCE),
        metric_oracles(),
    ];
    lines.extend(end_to_end());
    lines.push(full_scale());
    lines.push(correlation());
    lines.sort_by_key(|l| l.id);

    let mut failed = 0;
    for l in &lines {
        let tag = match l.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Waived => "WAIVED",
        };
        println!("criterion {:>2} {tag:6} {}: {}", l.id, l.title, l.detail);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("all criteria met");
}
