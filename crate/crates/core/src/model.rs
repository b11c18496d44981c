//! The complete trainable parameter bundle and its checkpoint format.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::encoder::{EmbeddingTable, Encoder, EncoderForward};
use crate::error::{Error, Result};
use crate::numerics::{Container, Matrix, ParamTensor, Parameters, Payload, Rng, StoredTensor, FORMAT_F64};
use crate::resolver::{affinity_backward, affinity_forward, AffinityForward, AffinityParams, MentionScorerParams};
use crate::textmodel::MentionSpan;

/// Architecture hyper-parameters. Together with the vocabulary they
/// determine every tensor shape, and they are what the fingerprint covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    pub att_dim: usize,
    pub aff_dim: usize,
    pub depth: usize,
    pub attention: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            att_dim: 32,
            aff_dim: 32,
            depth: 2,
            attention: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.att_dim == 0 || self.aff_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!(
            "dim={};att_dim={};aff_dim={};depth={};attention={}",
            self.dim, self.att_dim, self.aff_dim, self.depth, self.attention
        )
    }

    /// Short hex digest of the architecture and vocabulary.
    pub fn fingerprint(&self, vocab: &[String]) -> String {
        let mut h = Sha256::new();
        h.update(self.describe().as_bytes());
        for t in vocab {
            h.update([0u8]);
            h.update(t.as_bytes());
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Fingerprint ignoring the vocabulary, for checking requested dims.
    pub fn shape_fingerprint(&self) -> String {
        let h = Sha256::digest(self.describe().as_bytes());
        h.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub encoder: Encoder,
    pub affinity: AffinityParams,
    pub scorer: MentionScorerParams,
}

/// Forward values of one document.
#[derive(Debug, Clone)]
pub struct DocForward {
    pub encoder: EncoderForward,
    pub affinity: AffinityForward,
}

impl ModelParams {
    pub fn new(config: ModelConfig, vocab: impl IntoIterator<Item = String>, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let encoder = Encoder::new(vocab, config.dim, config.att_dim, config.depth, config.attention, rng);
        let affinity = AffinityParams::new(3 * config.dim, config.aff_dim, rng);
        let scorer = MentionScorerParams::new(3 * config.dim, 0.4, rng)?;
        Ok(Self {
            config,
            encoder,
            affinity,
            scorer,
        })
    }

    pub fn vocab(&self) -> &[String] {
        self.encoder.table.tokens()
    }

    pub fn fingerprint(&self) -> String {
        self.config.fingerprint(self.vocab())
    }

    pub fn forward(&self, tokens: &[String], spans: &[MentionSpan]) -> Result<DocForward> {
        let encoder = self.encoder.forward(tokens)?;
        let affinity = affinity_forward(spans, &encoder.reps, &self.affinity, self.config.aff_dim)?;
        Ok(DocForward { encoder, affinity })
    }

    /// Accumulates gradients given `d_raw`, the loss gradient on every raw
    /// affinity score (same layout as the affinity rows), plus an optional
    /// extra gradient on the token representations.
    pub fn backward(&mut self, fwd: &DocForward, d_raw: &[Vec<f64>], extra_d_r: Option<&Matrix>) -> Result<()> {
        let n = fwd.encoder.reps.len();
        let mut d_r = affinity_backward(&mut self.affinity, &fwd.affinity, d_raw, n)?;
        if let Some(extra) = extra_d_r {
            d_r.add_assign(extra)?;
        }
        self.encoder.backward(&fwd.encoder, &d_r)
    }

    pub fn to_container(&self) -> Container {
        let meta = vec![
            ("dim".to_string(), self.config.dim.to_string()),
            ("att_dim".to_string(), self.config.att_dim.to_string()),
            ("aff_dim".to_string(), self.config.aff_dim.to_string()),
            ("depth".to_string(), self.config.depth.to_string()),
            ("attention".to_string(), self.config.attention.to_string()),
            ("keep_ratio".to_string(), format!("{:?}", self.scorer.keep_ratio())),
            ("vocab".to_string(), serde_json::to_string(self.vocab()).expect("strings serialize")),
        ];
        let tensors = self
            .params()
            .into_iter()
            .map(|p| StoredTensor {
                name: p.name.clone(),
                rows: p.value.rows(),
                cols: p.value.cols(),
                payload: Payload::F64(p.value.as_slice().to_vec()),
            })
            .collect();
        Container {
            version: FORMAT_F64,
            fingerprint: self.fingerprint(),
            meta,
            tensors,
        }
    }

    /// Rebuilds a model, dequantizing any int8 tensors.
    pub fn from_container(c: &Container) -> Result<Self> {
        let get = |k: &str| c.meta(k).ok_or_else(|| Error::Format(format!("missing header field {k}")));
        let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| Error::Format(format!("bad header field {k}"))) };
        let config = ModelConfig {
            dim: num("dim")?,
            att_dim: num("att_dim")?,
            aff_dim: num("aff_dim")?,
            depth: num("depth")?,
            attention: get("attention")? == "true",
        };
        config.validate()?;
        let vocab: Vec<String> = serde_json::from_str(get("vocab")?).map_err(|e| Error::Format(format!("vocab: {e}")))?;
        let keep_ratio: f64 = get("keep_ratio")?.parse().map_err(|_| Error::Format("bad keep_ratio".into()))?;
        if config.fingerprint(&vocab) != c.fingerprint {
            return Err(Error::Format("header fingerprint does not match its own config".into()));
        }
        // Shapes come from a throwaway initialization; values are then overwritten.
        let mut rng = Rng::new(0);
        let mut model = ModelParams::new(config, vocab.clone(), &mut rng)?;
        model.encoder.table = EmbeddingTable::from_parts(vocab, Matrix::zeros(model.vocab().len(), config.dim))?;
        model.scorer.set_keep_ratio(keep_ratio)?;
        for p in model.params_mut() {
            let t = c
                .tensor(&p.name)
                .ok_or_else(|| Error::Format(format!("missing tensor {}", p.name)))?;
            if (t.rows, t.cols) != p.shape() {
                return Err(Error::Format(format!(
                    "tensor {} has shape {:?}, expected {:?}",
                    p.name,
                    (t.rows, t.cols),
                    p.shape()
                )));
            }
            let values = match &t.payload {
                Payload::F64(v) => v.clone(),
                Payload::Int8 { scale, values } => values.iter().map(|&q| *scale * q as f64).collect(),
            };
            *p = ParamTensor::new(p.name.clone(), Matrix::new(t.rows, t.cols, values)?);
        }
        if c.tensors.len() != model.params().len() {
            return Err(Error::Format("unexpected extra tensors".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_container().to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&read_container(path)?)
    }
}

pub fn read_container(path: impl AsRef<Path>) -> Result<Container> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Container::read_from(&mut bytes.as_slice())
}

impl Parameters for ModelParams {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut out = self.encoder.params();
        out.push(&self.affinity.antecedent);
        out.push(&self.affinity.anaphor);
        out.push(&self.scorer.weight);
        out.push(&self.scorer.bias);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = self.encoder.params_mut();
        out.push(&mut self.affinity.antecedent);
        out.push(&mut self.affinity.anaphor);
        out.push(&mut self.scorer.weight);
        out.push(&mut self.scorer.bias);
        out
    }
}
