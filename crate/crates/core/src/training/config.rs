use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SplitFractions;

/// Model variant: the full model or one of the three ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Mixed propagation, cross-correlation scorer, joint objective.
    Full,
    /// Structure-only propagation (`alpha = 1`) and node-node loss only.
    Gcn,
    /// Dot product of last-layer rows instead of the MLP scorer.
    Inner,
    /// Node-node loss only.
    Ncoll,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::Gcn, Variant::Inner, Variant::Ncoll];

    /// Whether node/attribute-category links enter the objective.
    pub fn uses_attribute_loss(self) -> bool {
        matches!(self, Variant::Full | Variant::Inner)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::Gcn => "gcn",
            Variant::Inner => "inner",
            Variant::Ncoll => "ncoll",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "gcn" => Ok(Variant::Gcn),
            "inner" => Ok(Variant::Inner),
            "ncoll" => Ok(Variant::Ncoll),
            _ => Err(Error::Config(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Link prediction: 85/10/5 edge split.
    Lp,
    /// Node classification: 95/5 train/val split, no test edges.
    Nc,
}

impl Task {
    pub fn default_alpha(self) -> f64 {
        match self {
            Task::Lp => 0.8,
            Task::Nc => 0.2,
        }
    }

    pub fn split_fractions(self) -> SplitFractions {
        match self {
            Task::Lp => SplitFractions::LINK_PREDICTION,
            Task::Nc => SplitFractions::CLASSIFICATION,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Lp => "lp",
            Task::Nc => "nc",
        })
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp" => Ok(Task::Lp),
            "nc" => Ok(Task::Nc),
            _ => Err(Error::Config(format!("unknown task {s:?}"))),
        }
    }
}

/// Where negatives are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeScope {
    /// All nodes and attribute categories.
    Union,
    /// Entities of the same kind as the positive partner.
    TargetType,
}

impl fmt::Display for NegativeScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NegativeScope::Union => "union",
            NegativeScope::TargetType => "target_type",
        })
    }
}

impl FromStr for NegativeScope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "union" => Ok(NegativeScope::Union),
            "target_type" => Ok(NegativeScope::TargetType),
            _ => Err(Error::Config(format!("unknown negative scope {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub depth: usize,
    pub alpha: f64,
    /// Per-row feature cap; `None` keeps every entry.
    pub topn: Option<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub negatives: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub variant: Variant,
    pub task: Task,
    pub negative_scope: NegativeScope,
    pub separate_heads: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::for_task(Task::Lp)
    }
}

/// Keys accepted in config files, in echo order.
pub const CONFIG_KEYS: [&str; 14] = [
    "dim",
    "k",
    "alpha",
    "topn",
    "lr",
    "epochs",
    "patience",
    "negatives",
    "batch_size",
    "seed",
    "variant",
    "task",
    "negative_scope",
    "separate_heads",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl TrainConfig {
    pub fn for_task(task: Task) -> Self {
        TrainConfig {
            dim: 128,
            depth: 2,
            alpha: task.default_alpha(),
            topn: Some(50),
            lr: 0.01,
            epochs: 100,
            patience: 20,
            negatives: 5,
            batch_size: 1024,
            seed: 0,
            variant: Variant::Full,
            task,
            negative_scope: NegativeScope::Union,
            separate_heads: false,
        }
    }

    /// Builds a config from key/value pairs; later pairs win. `alpha`
    /// defaults to the task's value when not given.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if !CONFIG_KEYS.contains(&k) {
                return Err(Error::Config(format!("unknown config key {k:?}")));
            }
            map.insert(k, v);
        }
        let task = map.get("task").map(|v| parse::<Task>("task", v)).transpose()?;
        let mut cfg = TrainConfig::for_task(task.unwrap_or(Task::Lp));
        for (k, v) in map {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses flat `key=value` text. Blank lines and `#` comments are skipped.
    pub fn parse_text(text: &str) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            let k = k.trim();
            if !CONFIG_KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown config key {k:?}", i + 1)));
            }
            out.push((k.to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dim" => self.dim = parse(key, value)?,
            "k" => self.depth = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "topn" => {
                self.topn = match value {
                    "none" | "off" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "lr" => self.lr = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "negatives" => self.negatives = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "variant" => self.variant = value.parse()?,
            "task" => self.task = value.parse()?,
            "negative_scope" => self.negative_scope = value.parse()?,
            "separate_heads" => self.separate_heads = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("dim", self.dim.to_string()),
            ("k", self.depth.to_string()),
            ("alpha", self.alpha.to_string()),
            ("topn", self.topn.map_or("none".into(), |t| t.to_string())),
            ("lr", self.lr.to_string()),
            ("epochs", self.epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("negatives", self.negatives.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("seed", self.seed.to_string()),
            ("variant", self.variant.to_string()),
            ("task", self.task.to_string()),
            ("negative_scope", self.negative_scope.to_string()),
            ("separate_heads", self.separate_heads.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("epochs", self.epochs),
            ("patience", self.patience),
            ("negatives", self.negatives),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.topn == Some(0) {
            return Err(Error::Config("topn must be positive (or \"none\")".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }

    /// The α actually used to build the operator.
    pub fn effective_alpha(&self) -> f64 {
        if self.variant == Variant::Gcn {
            1.0
        } else {
            self.alpha
        }
    }

    /// The negative scope actually used. The structure-only ablation contrasts
    /// against nodes only.
    pub fn effective_negative_scope(&self) -> NegativeScope {
        if self.variant == Variant::Gcn {
            NegativeScope::TargetType
        } else {
            self.negative_scope
        }
    }
}
