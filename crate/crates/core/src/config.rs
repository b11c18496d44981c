//! `key = value` run configuration: defaults, then a file, then flags.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

/// Every recognised key, in the order they are rendered.
pub const KEYS: [&str; 17] = [
    "epochs",
    "batch_size",
    "learning_rate",
    "max_seq_len",
    "alpha",
    "beta",
    "seed",
    "lr_schedule",
    "weight_decay",
    "freeze_embeddings",
    "mention_mode",
    "max_span_width",
    "dim",
    "att_dim",
    "aff_dim",
    "depth",
    "attention",
];

/// Model and training settings for one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("bad value {value:?} for {key}: {e}")))
}

impl RunConfig {
    /// Sets one key. Unknown keys are an error that lists the valid ones.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (m, t) = (&mut self.model, &mut self.train);
        match key {
            "epochs" => t.epochs = parse_value(key, value)?,
            "batch_size" => t.batch_size = parse_value(key, value)?,
            "learning_rate" => t.learning_rate = parse_value(key, value)?,
            "max_seq_len" => t.max_seq_len = parse_value(key, value)?,
            "alpha" => t.alpha = parse_value(key, value)?,
            "beta" => t.beta = parse_value(key, value)?,
            "seed" => t.seed = parse_value(key, value)?,
            "lr_schedule" => t.lr_schedule = value.parse()?,
            "weight_decay" => t.weight_decay = parse_value(key, value)?,
            "freeze_embeddings" => t.freeze_embeddings = parse_value(key, value)?,
            "mention_mode" => t.mention_mode = value.parse()?,
            "max_span_width" => t.max_span_width = parse_value(key, value)?,
            "dim" => m.dim = parse_value(key, value)?,
            "att_dim" => m.att_dim = parse_value(key, value)?,
            "aff_dim" => m.aff_dim = parse_value(key, value)?,
            "depth" => m.depth = parse_value(key, value)?,
            "attention" => m.attention = parse_value(key, value)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown config key {other:?}; valid keys: {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        let (m, t) = (&self.model, &self.train);
        match key {
            "epochs" => t.epochs.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "learning_rate" => format!("{:e}", t.learning_rate),
            "max_seq_len" => t.max_seq_len.to_string(),
            "alpha" => format!("{:?}", t.alpha),
            "beta" => format!("{:?}", t.beta),
            "seed" => t.seed.to_string(),
            "lr_schedule" => t.lr_schedule.to_string(),
            "weight_decay" => format!("{:?}", t.weight_decay),
            "freeze_embeddings" => t.freeze_embeddings.to_string(),
            "mention_mode" => t.mention_mode.to_string(),
            "max_span_width" => t.max_span_width.to_string(),
            "dim" => m.dim.to_string(),
            "att_dim" => m.att_dim.to_string(),
            "aff_dim" => m.aff_dim.to_string(),
            "depth" => m.depth.to_string(),
            "attention" => m.attention.to_string(),
            _ => unreachable!("key list and getter disagree"),
        }
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Defaults, then the file (`None` or `"default"` means no file), then
    /// the `(key, value)` overrides. The result is validated.
    pub fn load(path: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut c = Self::default();
        if let Some(p) = path.filter(|p| *p != "default") {
            let text = std::fs::read_to_string(Path::new(p)).map_err(|e| Error::io(p, e))?;
            c.apply_text(&text)?;
        }
        for (k, v) in overrides {
            c.set(k, v)?;
        }
        c.model.validate()?;
        c.train.validate()?;
        Ok(c)
    }

    /// Renders every key; parsing the output reproduces `self`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key));
        }
        out
    }
}
