use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use mkr::data::{
    filter_aligned, generate_synthetic, read_alignment, read_kg, read_ratings, split, subsample_training,
    subsample_triples, to_implicit, DatasetBundle, Split, SyntheticConfig,
};
use mkr::eval::evaluate;
use mkr::theory::{verify_suite, VerifyConfig};
use mkr::training::train_with_callback;
use mkr::{MkrError, MkrModel};

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::{Outcome, RunArgs, SynthShape};

pub const CHECKPOINT_FILE: &str = "best.ckpt";
pub const LOG_FILE: &str = "log.jsonl";
pub const CONFIG_FILE: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.json";
pub const SWEEP_FILE: &str = "sweep.csv";

type Result<T> = std::result::Result<T, MkrError>;

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(MkrError::Config(format!("{what} file {} does not exist", path.display())));
    }
    Ok(())
}

pub fn preprocess(
    ratings: &Path,
    kg: &Path,
    alignment: &Path,
    threshold: Option<f64>,
    seed: u64,
    out: &Path,
) -> Result<Outcome> {
    require_file(ratings, "ratings")?;
    require_file(kg, "graph")?;
    require_file(alignment, "alignment")?;
    let raw = read_ratings(ratings)?;
    let triples = read_kg(kg)?;
    let pairs = read_alignment(alignment)?;
    let kept = filter_aligned(&raw, &pairs)?;
    info!("{} of {} ratings reference aligned items", kept.len(), raw.len());
    let labeled = to_implicit(&kept, threshold, seed)?;
    let bundle = DatasetBundle::assemble(&labeled, &triples, &pairs)?;
    let bundle = split(bundle, seed.wrapping_add(1))?;
    bundle.write_dir(out)?;

    let mut m = Manifest::new("preprocess", seed);
    m.input(ratings)?.input(kg)?.input(alignment)?;
    m.setting("threshold", threshold.map_or("none".to_string(), |t| t.to_string()));
    describe(&mut m, &bundle);
    m.write(out)?;
    info!(
        "wrote {}: {} users, {} items, {} entities, {} interactions, {} triples",
        out.display(),
        bundle.n_users(),
        bundle.n_items(),
        bundle.n_entities(),
        bundle.interactions.len(),
        bundle.triples.len()
    );
    Ok(Outcome::Done)
}

fn describe(m: &mut Manifest, bundle: &DatasetBundle) {
    m.setting("users", bundle.n_users())
        .setting("items", bundle.n_items())
        .setting("entities", bundle.n_entities())
        .setting("relations", bundle.n_relations())
        .setting("interactions", bundle.interactions.len())
        .setting("triples", bundle.triples.len());
}

#[allow(clippy::too_many_arguments)]
pub fn synth(
    users: usize,
    items: usize,
    entities: usize,
    relations: usize,
    correlation: f64,
    shape: &SynthShape,
    seed: u64,
    out: &Path,
) -> Result<Outcome> {
    let mut config = SyntheticConfig::new(users, items, entities, relations, correlation, seed);
    if let Some(k) = shape.latent_dim {
        config.latent_dim = k;
    }
    if let Some(n) = shape.interactions_per_user {
        config.interactions_per_user = n;
    }
    if let Some(n) = shape.triples_per_entity {
        config.triples_per_entity = n;
    }
    let bundle = generate_synthetic(&config)?;
    bundle.write_dir(out)?;
    let mut m = Manifest::new("synth", seed);
    m.setting("correlation", correlation)
        .setting("latent_dim", config.latent_dim)
        .setting("interactions_per_user", config.interactions_per_user)
        .setting("triples_per_entity", config.triples_per_entity)
        .setting("preference_sharpness", config.preference_sharpness)
        .setting("kg_sharpness", config.kg_sharpness);
    describe(&mut m, &bundle);
    m.write(out)?;
    info!("wrote synthetic bundle to {}", out.display());
    Ok(Outcome::Done)
}

/// Config file, then flags, then `--set` pairs; validated before use.
pub fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    if let Some(path) = &args.config {
        require_file(path, "config")?;
        c.apply_file(path)?;
    }
    if let Some(d) = &args.data {
        c.data = Some(d.clone());
    }
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(o) = &args.out {
        c.out = Some(o.clone());
    }
    for pair in &args.set {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| MkrError::Config(format!("--set expects key=value, got `{pair}`")))?;
        c.set(k.trim(), v)?;
    }
    c.validate()?;
    Ok(c)
}

fn paths(c: &RunConfig) -> Result<(PathBuf, PathBuf)> {
    let data = c.data.clone().ok_or_else(|| MkrError::Config("no data directory (data= or --data)".into()))?;
    let out = c.out.clone().ok_or_else(|| MkrError::Config("no output directory (out= or --out)".into()))?;
    if !data.is_dir() {
        return Err(MkrError::Config(format!("data directory {} does not exist", data.display())));
    }
    Ok((data, out))
}

pub fn train(args: &RunArgs) -> Result<Outcome> {
    let c = load_config(args)?;
    let (data, out) = paths(&c)?;
    let bundle = DatasetBundle::read_dir(&data)?;
    fs::create_dir_all(&out)?;
    let text = c.to_text();
    fs::write(out.join(CONFIG_FILE), &text)?;
    let mut m = Manifest::new("train", c.seed);
    m.settings_from_text(&text).input_dir(&data)?;
    m.write(&out)?;

    let mut log = BufWriter::new(File::create(out.join(LOG_FILE))?);
    let mut log_error = None;
    let outcome = train_with_callback::<f64>(&bundle, &c.hyper, c.seed, |rec| {
        info!(
            "epoch {}: rs {:.4} kg {:.4} val auc {:.4} acc {:.4}",
            rec.epoch, rec.rs_loss, rec.kg_loss, rec.val_auc, rec.val_acc
        );
        let line = serde_json::to_string(rec).map_err(MkrError::from);
        let written = line.and_then(|l| {
            writeln!(log, "{l}")?;
            log.flush()?;
            Ok(())
        });
        if let Err(e) = written {
            log_error.get_or_insert(e);
        }
    });
    if let Some(e) = log_error {
        return Err(e);
    }
    let outcome = outcome?;
    outcome.model.save(&out.join(CHECKPOINT_FILE))?;
    let report = evaluate(&outcome.model, &bundle, Split::Validation, &[])?;
    fs::write(out.join(METRICS_FILE), report.to_json()? + "\n")?;
    info!(
        "best epoch {} (val auc {:.4}); checkpoint in {}",
        outcome.best_epoch,
        report.auc,
        out.display()
    );
    Ok(Outcome::Done)
}

pub fn parse_ks(text: &str) -> Result<Vec<usize>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|k| match k.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(k),
            _ => Err(MkrError::Config(format!("invalid cut-off `{k}` in --ks"))),
        })
        .collect()
}

pub fn eval(
    checkpoint: &Path,
    data: &Path,
    ks: &str,
    split: &str,
    format: &str,
    out: Option<&Path>,
) -> Result<Outcome> {
    let ks = parse_ks(ks)?;
    let split = Split::parse(split).ok_or_else(|| MkrError::Config(format!("unknown split `{split}`")))?;
    require_file(checkpoint, "checkpoint")?;
    let model = MkrModel::load(checkpoint)?;
    let bundle = DatasetBundle::read_dir(data)?;
    model.check_compatible(&bundle)?;
    let report = evaluate(&model, &bundle, split, &ks)?;
    let text = if format == "csv" {
        report.to_csv()
    } else {
        report.to_json()? + "\n"
    };
    print!("{text}");
    if let Some(path) = out {
        fs::write(path, &text)?;
    }
    Ok(Outcome::Done)
}

pub fn sweep(args: &RunArgs) -> Result<Outcome> {
    let c = load_config(args)?;
    let (data, out) = paths(&c)?;
    if c.sweep.is_empty() {
        return Err(MkrError::Config("no sweep axis configured (sweep.dim, sweep.rs_steps, ...)".into()));
    }
    let bundle = DatasetBundle::read_dir(&data)?;
    fs::create_dir_all(&out)?;
    let text = c.to_text();
    fs::write(out.join(CONFIG_FILE), &text)?;
    let mut m = Manifest::new("sweep", c.seed);
    m.settings_from_text(&text).input_dir(&data)?;
    m.write(&out)?;

    let mut cells: Vec<(&str, String, RunConfig, Option<(bool, f64)>)> = Vec::new();
    for &d in &c.sweep.dim {
        let mut cell = c.clone();
        cell.hyper.dim = d;
        cells.push(("dim", d.to_string(), cell, None));
    }
    for &t in &c.sweep.rs_steps {
        let mut cell = c.clone();
        cell.hyper.rs_steps = t;
        cells.push(("rs_steps", t.to_string(), cell, None));
    }
    for &r in &c.sweep.kg_ratio {
        cells.push(("kg_ratio", r.to_string(), c.clone(), Some((true, r))));
    }
    for &r in &c.sweep.train_ratio {
        cells.push(("train_ratio", r.to_string(), c.clone(), Some((false, r))));
    }

    let mut csv = BufWriter::new(File::create(out.join(SWEEP_FILE))?);
    writeln!(csv, "axis,value,replicates,auc,acc")?;
    csv.flush()?;
    for (axis, value, cell, subsample) in cells {
        let data = match subsample {
            Some((true, r)) => subsample_triples(&bundle, r, c.seed)?,
            Some((false, r)) => subsample_training(&bundle, r, c.seed)?,
            None => bundle.clone(),
        };
        let (mut auc, mut acc) = (0.0, 0.0);
        for k in 0..c.replicates as u64 {
            let outcome = mkr::training::train::<f64>(&data, &cell.hyper, c.seed + k)?;
            let report = evaluate(&outcome.model, &data, Split::Test, &[])?;
            auc += report.auc;
            acc += report.acc;
        }
        let n = c.replicates as f64;
        info!("{axis}={value}: auc {:.4} acc {:.4}", auc / n, acc / n);
        writeln!(csv, "{axis},{value},{},{},{}", c.replicates, auc / n, acc / n)?;
        csv.flush()?;
    }
    Ok(Outcome::Done)
}

pub fn verify(trials: usize, gradient_seeds: usize, seed: u64, out: Option<&Path>) -> Result<Outcome> {
    let results = verify_suite(&VerifyConfig {
        trials,
        gradient_seeds,
        seed,
    });
    let mut text = String::new();
    for r in &results {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    print!("{text}");
    if let Some(path) = out {
        fs::write(path, &text)?;
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        log::error!("{failed} of {} checks failed", results.len());
        Ok(Outcome::VerifyFailed)
    } else {
        info!("all {} checks passed", results.len());
        Ok(Outcome::Done)
    }
}
