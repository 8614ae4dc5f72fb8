use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MkrError, Result};

/// Which layers bridge the item and entity pathways.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Cross&compress units.
    Full,
    /// Residual cross layers with layer-0 anchors.
    Dcn,
    /// Scalar cross-stitch mixing.
    Stitch,
    /// No bridge: items go through their own MLP and never see the graph.
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RsHead {
    InnerProduct,
    Mlp,
}

/// Which tasks an epoch trains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSchedule {
    /// `rs_steps` recommendation passes, then one graph pass.
    Joint,
    /// Graph passes only; model selection on validation tail RMSE.
    KgeOnly,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = MkrError;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(MkrError::Config(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"), other
                    ))),
                }
            }
        }
    };
}

keyword_enum!(Variant { Full => "full", Dcn => "dcn", Stitch => "stitch", Plain => "plain" });
keyword_enum!(RsHead { InnerProduct => "inner_product", Mlp => "mlp" });
keyword_enum!(TaskSchedule { Joint => "joint", KgeOnly => "kge_only" });

/// Architecture and optimization settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Number of low-level layers `L` (user MLP, shared units, relation MLP).
    pub low_layers: usize,
    /// Embedding and hidden dimension `d`.
    pub dim: usize,
    /// Recommendation passes per graph pass `t`.
    pub rs_steps: usize,
    /// Graph-loss weight `λ1`.
    pub kg_weight: f64,
    /// L2 weight `λ2`.
    pub l2_weight: f64,
    /// High-level layers `K` of the tail predictor.
    pub high_layers: usize,
    /// Depth `H` of the recommendation MLP head (used when `rs_head = mlp`).
    pub rs_mlp_depth: usize,
    pub batch_size_rs: usize,
    pub batch_size_kg: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub variant: Variant,
    pub rs_head: RsHead,
    pub tasks: TaskSchedule,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            low_layers: 1,
            dim: 8,
            rs_steps: 3,
            kg_weight: 0.5,
            l2_weight: 1e-6,
            high_layers: 1,
            rs_mlp_depth: 2,
            batch_size_rs: 4096,
            batch_size_kg: 4096,
            learning_rate: 0.01,
            epochs: 50,
            patience: 5,
            variant: Variant::Full,
            rs_head: RsHead::InnerProduct,
            tasks: TaskSchedule::Joint,
        }
    }
}

pub const KEYS: [&str; 15] = [
    "low_layers",
    "dim",
    "rs_steps",
    "kg_weight",
    "l2_weight",
    "high_layers",
    "rs_mlp_depth",
    "batch_size_rs",
    "batch_size_kg",
    "learning_rate",
    "epochs",
    "patience",
    "variant",
    "rs_head",
    "tasks",
];

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| MkrError::Config(format!("`{key}`: cannot parse `{value}`")))
}

impl HyperParams {
    /// Per-dataset settings (`movielens-1m`, `book-crossing`, `last-fm`,
    /// `bing-news`); other fields keep their defaults.
    pub fn preset(name: &str) -> Result<Self> {
        let (l, d, t, l1) = match name {
            "movielens-1m" => (1, 8, 3, 0.5),
            "book-crossing" => (1, 8, 2, 0.1),
            "last-fm" => (2, 4, 2, 0.1),
            "bing-news" => (3, 16, 5, 0.2),
            other => return Err(MkrError::Config(format!("unknown preset `{other}`"))),
        };
        Ok(HyperParams {
            low_layers: l,
            dim: d,
            rs_steps: t,
            kg_weight: l1,
            ..Default::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("low_layers", self.low_layers),
            ("dim", self.dim),
            ("rs_steps", self.rs_steps),
            ("high_layers", self.high_layers),
            ("rs_mlp_depth", self.rs_mlp_depth),
            ("batch_size_rs", self.batch_size_rs),
            ("batch_size_kg", self.batch_size_kg),
            ("epochs", self.epochs),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(MkrError::Config(format!("`{k}` must be at least 1")));
        }
        if !(self.kg_weight >= 0.0 && self.kg_weight.is_finite()) {
            return Err(MkrError::Config("`kg_weight` must be a finite value ≥ 0".into()));
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return Err(MkrError::Config("`l2_weight` must be a finite value ≥ 0".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(MkrError::Config("`learning_rate` must be positive".into()));
        }
        Ok(())
    }

    /// Sets one field from its textual form. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "low_layers" => self.low_layers = parse(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            "rs_steps" => self.rs_steps = parse(key, value)?,
            "kg_weight" => self.kg_weight = parse(key, value)?,
            "l2_weight" => self.l2_weight = parse(key, value)?,
            "high_layers" => self.high_layers = parse(key, value)?,
            "rs_mlp_depth" => self.rs_mlp_depth = parse(key, value)?,
            "batch_size_rs" => self.batch_size_rs = parse(key, value)?,
            "batch_size_kg" => self.batch_size_kg = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "variant" => self.variant = value.parse()?,
            "rs_head" => self.rs_head = value.parse()?,
            "tasks" => self.tasks = value.parse()?,
            other => return Err(MkrError::Config(format!("unknown hyperparameter `{other}`"))),
        }
        Ok(())
    }

    /// `(key, value)` pairs in [`KEYS`] order; `set` accepts every pair.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("low_layers", self.low_layers.to_string()),
            ("dim", self.dim.to_string()),
            ("rs_steps", self.rs_steps.to_string()),
            ("kg_weight", format!("{:?}", self.kg_weight)),
            ("l2_weight", format!("{:?}", self.l2_weight)),
            ("high_layers", self.high_layers.to_string()),
            ("rs_mlp_depth", self.rs_mlp_depth.to_string()),
            ("batch_size_rs", self.batch_size_rs.to_string()),
            ("batch_size_kg", self.batch_size_kg.to_string()),
            ("learning_rate", format!("{:?}", self.learning_rate)),
            ("epochs", self.epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("variant", self.variant.to_string()),
            ("rs_head", self.rs_head.to_string()),
            ("tasks", self.tasks.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_round_trip() {
        let mut hp = HyperParams::preset("last-fm").unwrap();
        hp.l2_weight = 1e-6;
        hp.variant = Variant::Stitch;
        let mut back = HyperParams::default();
        for (k, v) in hp.to_pairs() {
            back.set(k, &v).unwrap();
        }
        assert_eq!(back, hp);
        assert_eq!(hp.to_pairs().iter().map(|p| p.0).collect::<Vec<_>>(), KEYS);
    }

    #[test]
    fn table_presets() {
        let ml = HyperParams::preset("movielens-1m").unwrap();
        assert_eq!((ml.low_layers, ml.dim, ml.rs_steps, ml.kg_weight), (1, 8, 3, 0.5));
        assert_eq!(ml.l2_weight, 1e-6);
        assert_eq!(ml.high_layers, 1);
        assert_eq!(ml.rs_head, RsHead::InnerProduct);
        let news = HyperParams::preset("bing-news").unwrap();
        assert_eq!((news.low_layers, news.dim, news.rs_steps, news.kg_weight), (3, 16, 5, 0.2));
    }

    #[test]
    fn validation_and_unknown_keys() {
        let mut hp = HyperParams::default();
        assert!(hp.set("nonsense", "1").is_err());
        assert!(hp.set("dim", "x").is_err());
        hp.low_layers = 0;
        assert!(hp.validate().is_err());
        let hp = HyperParams {
            kg_weight: -1.0,
            ..Default::default()
        };
        assert!(hp.validate().is_err());
        assert!("stitch".parse::<Variant>().is_ok());
        assert!("other".parse::<Variant>().is_err());
    }
}
