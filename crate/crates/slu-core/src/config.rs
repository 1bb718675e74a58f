//! Experiment configuration: defaults matching the published training
//! recipe, a line-oriented `key=value` file format, and a `desk` preset
//! sized for a single-CPU workstation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::encoders::EncoderKind;
use crate::error::SluError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub encoder: EncoderKind,
    /// Add the recombined multi-domain corpus to the training set.
    pub use_recombined: bool,
    pub steps: u64,
    pub batch: usize,
    pub lr0: f64,
    pub decay: f64,
    pub decay_interval: u64,
    pub clip: f64,
    pub dropout: f64,
    pub seed: u64,
    pub embed_dim: usize,
    pub enc_hidden: usize,
    pub tag_hidden: usize,
    pub min_count: usize,
    /// Cap the number of training dialogues (0 = no cap); used for
    /// overfitting sanity runs.
    pub limit_train: usize,
    pub log_every: u64,
    pub eval_every: u64,
    /// Stop training once dev frame error rate drops to this value, in
    /// percent (negative = disabled). Checked at every dev evaluation.
    pub early_stop_fer: f64,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            encoder: EncoderKind::Sden,
            use_recombined: false,
            steps: 100_000,
            batch: 100,
            lr0: 0.0003,
            decay: 0.95,
            decay_interval: 3000,
            clip: 2.5,
            dropout: 0.5,
            seed: 0,
            embed_dim: 256,
            enc_hidden: 64,
            tag_hidden: 128,
            min_count: 10,
            limit_train: 0,
            log_every: 100,
            eval_every: 5000,
            early_stop_fer: -1.0,
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Shrink the run to single-CPU scale: fewer, smaller steps and a
    /// narrower model, keeping the optimizer recipe intact.
    pub fn apply_preset(&mut self, name: &str) -> Result<(), SluError> {
        match name {
            "desk" => {
                self.steps = 4000;
                self.batch = 32;
                self.embed_dim = 64;
                self.enc_hidden = 32;
                self.tag_hidden = 64;
                self.eval_every = 1000;
                Ok(())
            }
            "full" => Ok(()),
            other => Err(SluError::Config(format!("unknown preset '{other}'"))),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), SluError> {
        let bad = |what: &str| SluError::Config(format!("bad value '{value}' for {what}"));
        match key {
            "encoder" => {
                self.encoder =
                    EncoderKind::parse(value).ok_or_else(|| bad("encoder (ed|mn|sden)"))?
            }
            "use_recombined" => {
                self.use_recombined = value.parse().map_err(|_| bad("use_recombined"))?
            }
            "steps" => self.steps = value.parse().map_err(|_| bad("steps"))?,
            "batch" => self.batch = value.parse().map_err(|_| bad("batch"))?,
            "lr0" => self.lr0 = value.parse().map_err(|_| bad("lr0"))?,
            "decay" => self.decay = value.parse().map_err(|_| bad("decay"))?,
            "decay_interval" => {
                self.decay_interval = value.parse().map_err(|_| bad("decay_interval"))?
            }
            "clip" => self.clip = value.parse().map_err(|_| bad("clip"))?,
            "dropout" => self.dropout = value.parse().map_err(|_| bad("dropout"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "embed_dim" => self.embed_dim = value.parse().map_err(|_| bad("embed_dim"))?,
            "enc_hidden" => self.enc_hidden = value.parse().map_err(|_| bad("enc_hidden"))?,
            "tag_hidden" => self.tag_hidden = value.parse().map_err(|_| bad("tag_hidden"))?,
            "min_count" => self.min_count = value.parse().map_err(|_| bad("min_count"))?,
            "limit_train" => self.limit_train = value.parse().map_err(|_| bad("limit_train"))?,
            "log_every" => self.log_every = value.parse().map_err(|_| bad("log_every"))?,
            "eval_every" => self.eval_every = value.parse().map_err(|_| bad("eval_every"))?,
            "early_stop_fer" => {
                self.early_stop_fer = value.parse().map_err(|_| bad("early_stop_fer"))?
            }
            "data_dir" => self.data_dir = PathBuf::from(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "preset" => self.apply_preset(value)?,
            other => return Err(SluError::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parse a line-oriented `key=value` file; `#` starts a comment.
    pub fn load(path: &Path) -> Result<Self, SluError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SluError::Config(format!(
                    "{}:{}: expected key=value, got '{line}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SluError> {
        let mut positive: BTreeMap<&str, f64> = BTreeMap::new();
        positive.insert("steps", self.steps as f64);
        positive.insert("batch", self.batch as f64);
        positive.insert("lr0", self.lr0);
        positive.insert("decay", self.decay);
        positive.insert("decay_interval", self.decay_interval as f64);
        positive.insert("clip", self.clip);
        positive.insert("embed_dim", self.embed_dim as f64);
        positive.insert("enc_hidden", self.enc_hidden as f64);
        positive.insert("tag_hidden", self.tag_hidden as f64);
        positive.insert("log_every", self.log_every as f64);
        positive.insert("eval_every", self.eval_every as f64);
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(SluError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(SluError::Config(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.data_dir.join("vocab.tsv")
    }
}
