//! Run configuration in a flat `key = value` text format.
//!
//! Lines are `key = value`; `#` starts a comment and blank lines are
//! ignored. Every key can also be given on the command line, which wins over
//! the file. [`RunConfig::to_text`] writes every key, and parsing that text
//! gives back an identical configuration.
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `dataset` | directory with `edges.tsv`, `features.csv`, `labels.csv`, `splits.json` | |
//! | `synth` | generated data: `sbm`, `tree`, `path` or `karate` | `sbm` |
//! | `synth_sizes` | block sizes, comma separated | `30,30` |
//! | `synth_p_in`, `synth_p_out` | block edge probabilities | `0.9`, `0.05` |
//! | `synth_noise` | feature noise standard deviation | `0.5` |
//! | `synth_branching`, `synth_depth` | tree shape | `2`, `3` |
//! | `synth_nodes`, `synth_feature_dim` | path shape | `64`, `4` |
//! | `data_seed` | generator and split seed; `seed` when unset | |
//! | `train_fraction`, `val_fraction` | per-class split of generated data | `0.2`, `0.2` |
//! | `signature` | product layout such as `2x2` or `16x1,4x2` | `2x2` |
//! | `layers` | number of layers `L` | `2` |
//! | `alpha` | residual weight `α` | `0.1` |
//! | `beta_base` | `λ_β` in `β_ℓ = ln(1 + λ_β/ℓ)` | `0.5` |
//! | `origin_radius` | distance of component origins from the canonical one | `1` |
//! | `frame` | `transported` or `ambient` | `transported` |
//! | `activation` | `relu` or `identity` | `relu` |
//! | `drop_rate` | HyperDrop `η` | `0` |
//! | `noise_granularity` | `per_node_component` or `per_component` | `per_node_component` |
//! | `noise_clamp` | replace negative multipliers by 0 | `false` |
//! | `optimizer` | `adam` or `sgd` | `adam` |
//! | `lr`, `weight_decay` | step size and decay on layer weights | `0.01`, `0.0005` |
//! | `momentum` | SGD momentum | `0.9` |
//! | `beta1`, `beta2`, `eps` | Adam moments | `0.9`, `0.999`, `1e-8` |
//! | `epochs`, `patience` | step budget and early stopping | `1000`, `100` |
//! | `seed` | model and noise seed | `0` |
//! | `out` | output directory | `out` |

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rhgcn_core::model::NoiseGranularity;
use rhgcn_core::optim::OptimizerConfig;
use rhgcn_core::synth::{SplitFractions, SynthSpec};
use rhgcn_core::train::TrainConfig;
use rhgcn_core::{Activation, ModelConfig, NoiseSpec, Signature, TangentFrame};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Sbm,
    Tree,
    Path,
    Karate,
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Sbm => "sbm",
            SynthKind::Tree => "tree",
            SynthKind::Path => "path",
            SynthKind::Karate => "karate",
        }
    }
}

impl FromStr for SynthKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "sbm" => Ok(SynthKind::Sbm),
            "tree" | "balanced_tree" => Ok(SynthKind::Tree),
            "path" => Ok(SynthKind::Path),
            "karate" => Ok(SynthKind::Karate),
            other => Err(CliError::Config(format!("unknown synthetic dataset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Dir(PathBuf),
    Synth(SynthKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Everything a command needs, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub synth_sizes: Vec<usize>,
    pub synth_p_in: f64,
    pub synth_p_out: f64,
    pub synth_noise: f64,
    pub synth_branching: usize,
    pub synth_depth: usize,
    pub synth_nodes: usize,
    pub synth_feature_dim: usize,
    pub data_seed: Option<u64>,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub signature: String,
    pub layers: usize,
    pub alpha: f64,
    pub beta_base: f64,
    pub origin_radius: f64,
    pub frame: TangentFrame,
    pub activation: Activation,
    pub drop_rate: f64,
    pub noise_granularity: NoiseGranularity,
    pub noise_clamp: bool,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        let OptimizerConfig::Adam { lr, beta1, beta2, eps, weight_decay } = train.optimizer else {
            unreachable!("the default optimizer is Adam")
        };
        let split = SplitFractions::default();
        Self {
            data: DataSource::Synth(SynthKind::Sbm),
            synth_sizes: vec![30, 30],
            synth_p_in: 0.9,
            synth_p_out: 0.05,
            synth_noise: 0.5,
            synth_branching: 2,
            synth_depth: 3,
            synth_nodes: 64,
            synth_feature_dim: 4,
            data_seed: None,
            train_fraction: split.train,
            val_fraction: split.val,
            signature: model.signature.to_string(),
            layers: model.layers,
            alpha: model.alpha,
            beta_base: model.beta_base,
            origin_radius: model.origin_radius,
            frame: model.frame,
            activation: model.activation,
            drop_rate: model.noise.drop_rate,
            noise_granularity: model.noise.granularity,
            noise_clamp: model.noise.clamp_nonnegative,
            optimizer: OptimizerKind::Adam,
            lr,
            weight_decay,
            momentum: 0.9,
            beta1,
            beta2,
            eps,
            epochs: train.epochs,
            patience: train.patience,
            seed: model.seed,
            out: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("invalid value {value:?} for {key}; expected true or false"))),
    }
}

fn core_err(e: rhgcn_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "dataset",
        "synth",
        "synth_sizes",
        "synth_p_in",
        "synth_p_out",
        "synth_noise",
        "synth_branching",
        "synth_depth",
        "synth_nodes",
        "synth_feature_dim",
        "data_seed",
        "train_fraction",
        "val_fraction",
        "signature",
        "layers",
        "alpha",
        "beta_base",
        "origin_radius",
        "frame",
        "activation",
        "drop_rate",
        "noise_granularity",
        "noise_clamp",
        "optimizer",
        "lr",
        "weight_decay",
        "momentum",
        "beta1",
        "beta2",
        "eps",
        "epochs",
        "patience",
        "seed",
        "out",
    ];

    /// Sets one key. Later calls win.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key.trim() {
            "dataset" => self.data = DataSource::Dir(PathBuf::from(v)),
            "synth" => self.data = DataSource::Synth(v.parse()?),
            "synth_sizes" => self.synth_sizes = v.split(',').map(|s| parse(key, s.trim())).collect::<Result<_, _>>()?,
            "synth_p_in" => self.synth_p_in = parse(key, v)?,
            "synth_p_out" => self.synth_p_out = parse(key, v)?,
            "synth_noise" => self.synth_noise = parse(key, v)?,
            "synth_branching" => self.synth_branching = parse(key, v)?,
            "synth_depth" => self.synth_depth = parse(key, v)?,
            "synth_nodes" => self.synth_nodes = parse(key, v)?,
            "synth_feature_dim" => self.synth_feature_dim = parse(key, v)?,
            "data_seed" => self.data_seed = if v.is_empty() { None } else { Some(parse(key, v)?) },
            "train_fraction" => self.train_fraction = parse(key, v)?,
            "val_fraction" => self.val_fraction = parse(key, v)?,
            "signature" => self.signature = v.to_string(),
            "layers" => self.layers = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "beta_base" => self.beta_base = parse(key, v)?,
            "origin_radius" => self.origin_radius = parse(key, v)?,
            "frame" => self.frame = v.parse().map_err(core_err)?,
            "activation" => self.activation = v.parse().map_err(core_err)?,
            "drop_rate" => self.drop_rate = parse(key, v)?,
            "noise_granularity" => self.noise_granularity = v.parse().map_err(core_err)?,
            "noise_clamp" => self.noise_clamp = parse_bool(key, v)?,
            "optimizer" => {
                self.optimizer = match v {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    other => return Err(CliError::Config(format!("unknown optimizer {other:?}"))),
                }
            }
            "lr" => self.lr = parse(key, v)?,
            "weight_decay" => self.weight_decay = parse(key, v)?,
            "momentum" => self.momentum = parse(key, v)?,
            "beta1" => self.beta1 = parse(key, v)?,
            "beta2" => self.beta2 = parse(key, v)?,
            "eps" => self.eps = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "patience" => self.patience = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            other => return Err(CliError::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. A key may appear once,
    /// and `dataset` excludes `synth`.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| CliError::Config(format!("{origin} line {}: {msg}", i + 1));
            let Some((k, v)) = line.split_once('=') else {
                return Err(at(format!("expected `key = value`, found {line:?}")));
            };
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(at(format!("duplicate key {k:?}")));
            }
            self.set(k, v).map_err(|e| match e {
                CliError::Config(m) => at(m),
                other => at(other.to_string()),
            })?;
        }
        if seen.contains("dataset") && seen.contains("synth") {
            return Err(CliError::Config(format!("{origin}: `dataset` and `synth` are mutually exclusive")));
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut c = Self::default();
        c.apply_text(text, "<config>")?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        let mut c = Self::default();
        c.apply_text(&text, &path.display().to_string())?;
        Ok(c)
    }

    /// All keys in a fixed order with their textual values.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let data = match &self.data {
            DataSource::Dir(p) => ("dataset", p.display().to_string()),
            DataSource::Synth(k) => ("synth", k.name().to_string()),
        };
        vec![
            data,
            ("synth_sizes", join(&self.synth_sizes)),
            ("synth_p_in", self.synth_p_in.to_string()),
            ("synth_p_out", self.synth_p_out.to_string()),
            ("synth_noise", self.synth_noise.to_string()),
            ("synth_branching", self.synth_branching.to_string()),
            ("synth_depth", self.synth_depth.to_string()),
            ("synth_nodes", self.synth_nodes.to_string()),
            ("synth_feature_dim", self.synth_feature_dim.to_string()),
            ("data_seed", self.data_seed.map(|s| s.to_string()).unwrap_or_default()),
            ("train_fraction", self.train_fraction.to_string()),
            ("val_fraction", self.val_fraction.to_string()),
            ("signature", self.signature.clone()),
            ("layers", self.layers.to_string()),
            ("alpha", self.alpha.to_string()),
            ("beta_base", self.beta_base.to_string()),
            ("origin_radius", self.origin_radius.to_string()),
            ("frame", self.frame.name().to_string()),
            ("activation", self.activation.name().to_string()),
            ("drop_rate", self.drop_rate.to_string()),
            ("noise_granularity", self.noise_granularity.name().to_string()),
            ("noise_clamp", self.noise_clamp.to_string()),
            (
                "optimizer",
                match self.optimizer {
                    OptimizerKind::Adam => "adam".to_string(),
                    OptimizerKind::Sgd => "sgd".to_string(),
                },
            ),
            ("lr", self.lr.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("momentum", self.momentum.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("eps", self.eps.to_string()),
            ("epochs", self.epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("seed", self.seed.to_string()),
            ("out", self.out.display().to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// The configuration as a JSON object of strings, for output echoes.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.to_pairs().into_iter().map(|(k, v)| (k.to_string(), serde_json::Value::String(v))).collect(),
        )
    }

    /// Inverse of [`RunConfig::to_json`].
    pub fn from_json(value: &serde_json::Value) -> Result<Self, CliError> {
        let obj = value.as_object().ok_or_else(|| CliError::Format("configuration echo is not an object".into()))?;
        let mut c = Self::default();
        for (k, v) in obj {
            let v =
                v.as_str().ok_or_else(|| CliError::Format(format!("configuration value for {k} is not a string")))?;
            c.set(k, v)?;
        }
        Ok(c)
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }

    pub fn model_config(&self) -> Result<ModelConfig, CliError> {
        let signature: Signature = self.signature.parse().map_err(core_err)?;
        let noise = NoiseSpec {
            drop_rate: self.drop_rate,
            granularity: self.noise_granularity,
            clamp_nonnegative: self.noise_clamp,
        };
        let cfg = ModelConfig {
            signature,
            origin_radius: self.origin_radius,
            layers: self.layers,
            alpha: self.alpha,
            beta_base: self.beta_base,
            noise,
            activation: self.activation,
            frame: self.frame,
            seed: self.seed,
        };
        cfg.validate().map_err(core_err)?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let optimizer = match self.optimizer {
            OptimizerKind::Adam => OptimizerConfig::Adam {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
                weight_decay: self.weight_decay,
            },
            OptimizerKind::Sgd => {
                OptimizerConfig::Sgd { lr: self.lr, momentum: self.momentum, weight_decay: self.weight_decay }
            }
        };
        optimizer.validate().map_err(core_err)?;
        Ok(TrainConfig { optimizer, epochs: self.epochs, patience: self.patience })
    }

    pub fn synth_spec(&self) -> Option<SynthSpec> {
        let DataSource::Synth(kind) = self.data else {
            return None;
        };
        Some(match kind {
            SynthKind::Sbm => SynthSpec::Sbm {
                sizes: self.synth_sizes.clone(),
                p_in: self.synth_p_in,
                p_out: self.synth_p_out,
                noise: self.synth_noise,
            },
            SynthKind::Tree => SynthSpec::BalancedTree { branching: self.synth_branching, depth: self.synth_depth },
            SynthKind::Path => SynthSpec::Path { n: self.synth_nodes, feature_dim: self.synth_feature_dim },
            SynthKind::Karate => SynthSpec::Karate,
        })
    }

    pub fn split_fractions(&self) -> SplitFractions {
        SplitFractions { train: self.train_fraction, val: self.val_fraction }
    }

    /// Checks every field that can be checked without touching data.
    pub fn validate(&self) -> Result<(), CliError> {
        self.model_config()?;
        self.train_config()?;
        if !(self.train_fraction > 0.0 && self.val_fraction >= 0.0 && self.train_fraction + self.val_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "split fractions {} and {} must be positive and leave room for a test set",
                self.train_fraction, self.val_fraction
            )));
        }
        Ok(())
    }
}
