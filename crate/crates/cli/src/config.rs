//! Flat `key=value` run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use mkr::model::{HyperParams, HYPER_KEYS};
use mkr::MkrError;

/// Axis values of a sensitivity sweep. Empty axes are skipped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepSpec {
    pub dim: Vec<usize>,
    pub rs_steps: Vec<usize>,
    pub kg_ratio: Vec<f64>,
    pub train_ratio: Vec<f64>,
}

impl SweepSpec {
    pub fn is_empty(&self) -> bool {
        self.dim.is_empty() && self.rs_steps.is_empty() && self.kg_ratio.is_empty() && self.train_ratio.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub hyper: HyperParams,
    pub data: Option<PathBuf>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub sweep: SweepSpec,
    /// Seeds per sweep cell; the CSV reports their mean.
    pub replicates: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            hyper: HyperParams::default(),
            data: None,
            seed: 0,
            out: None,
            sweep: SweepSpec::default(),
            replicates: 1,
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> MkrError {
    MkrError::Config(format!("{key}={value}: {why}"))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, MkrError>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(|v| v.trim().parse::<T>().map_err(|e| bad(key, value, e)))
        .collect()
}

impl RunConfig {
    /// Applies one setting. `preset` replaces all hyperparameters, so it
    /// should come first.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), MkrError> {
        let value = value.trim();
        match key {
            "preset" => self.hyper = HyperParams::preset(value)?,
            "data" => self.data = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "seed" => self.seed = value.parse().map_err(|e| bad(key, value, e))?,
            "replicates" => {
                self.replicates = value.parse().map_err(|e| bad(key, value, e))?;
                if self.replicates == 0 {
                    return Err(bad(key, value, "must be positive"));
                }
            }
            "sweep.dim" => self.sweep.dim = list(key, value)?,
            "sweep.rs_steps" => self.sweep.rs_steps = list(key, value)?,
            "sweep.kg_ratio" => self.sweep.kg_ratio = list(key, value)?,
            "sweep.train_ratio" => self.sweep.train_ratio = list(key, value)?,
            _ if HYPER_KEYS.contains(&key) => self.hyper.set(key, value)?,
            _ => return Err(MkrError::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// `key=value` pairs, one per line; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), MkrError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                MkrError::Config(format!("{origin}:{}: expected key=value, found `{line}`", n + 1))
            })?;
            self.set(k.trim(), v)
                .map_err(|e| MkrError::Config(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), MkrError> {
        let text = fs::read_to_string(path)?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Checks everything that can be checked before work starts.
    pub fn validate(&self) -> Result<(), MkrError> {
        self.hyper.validate()?;
        let ratio_ok = |r: &f64| *r > 0.0 && *r <= 1.0;
        if !self.sweep.kg_ratio.iter().all(ratio_ok) || !self.sweep.train_ratio.iter().all(ratio_ok) {
            return Err(MkrError::Config("sweep ratios must lie in (0, 1]".into()));
        }
        if self.sweep.dim.contains(&0) || self.sweep.rs_steps.contains(&0) {
            return Err(MkrError::Config("sweep dims and rs_steps must be positive".into()));
        }
        Ok(())
    }

    /// Every setting as `key=value` lines, loadable by `apply_text`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.hyper.to_pairs() {
            out.push_str(&format!("{k}={v}\n"));
        }
        if let Some(d) = &self.data {
            out.push_str(&format!("data={}\n", d.display()));
        }
        if let Some(o) = &self.out {
            out.push_str(&format!("out={}\n", o.display()));
        }
        out.push_str(&format!("seed={}\nreplicates={}\n", self.seed, self.replicates));
        let join = |xs: Vec<String>| xs.join(",");
        let axes = [
            ("sweep.dim", join(self.sweep.dim.iter().map(|x| x.to_string()).collect())),
            ("sweep.rs_steps", join(self.sweep.rs_steps.iter().map(|x| x.to_string()).collect())),
            ("sweep.kg_ratio", join(self.sweep.kg_ratio.iter().map(|x| x.to_string()).collect())),
            ("sweep.train_ratio", join(self.sweep.train_ratio.iter().map(|x| x.to_string()).collect())),
        ];
        for (k, v) in axes {
            if !v.is_empty() {
                out.push_str(&format!("{k}={v}\n"));
            }
        }
        out
    }
}
