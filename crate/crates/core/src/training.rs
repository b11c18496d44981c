//! Class-weighted antecedent likelihood, the batched AdamW training loop and
//! the learning-rate schedule.

use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use serde::Serialize;
use web_time::Instant;

use crate::compression::SparsityMask;
use crate::encoder::span_repr;
use crate::error::{Error, Result};
use crate::evaluation::evaluate;
pub use crate::model::ModelParams;

use crate::numerics::{AdamW, Matrix, ParamTensor, Parameters, Rng};
use crate::resolver::{enumerate_spans, AffinityMatrix, MentionMode, ResolveConfig};
use crate::textmodel::{ClusterSet, Document};

pub use crate::model::ModelConfig;
/// Probabilities are clamped to this before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    Fixed,
    LinearDecay,
}

impl fmt::Display for LrSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LrSchedule::Fixed => "fixed",
            LrSchedule::LinearDecay => "linear-decay",
        })
    }
}

impl FromStr for LrSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(LrSchedule::Fixed),
            "linear-decay" => Ok(LrSchedule::LinearDecay),
            other => Err(Error::Config(format!("unknown lr schedule {other:?} (fixed | linear-decay)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_seq_len: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub lr_schedule: LrSchedule,
    pub weight_decay: f64,
    pub freeze_embeddings: bool,
    pub mention_mode: MentionMode,
    pub max_span_width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            learning_rate: 3e-5,
            max_seq_len: 512,
            alpha: 1.0,
            beta: 1.0,
            seed: 7,
            lr_schedule: LrSchedule::LinearDecay,
            weight_decay: 0.01,
            freeze_embeddings: false,
            mention_mode: MentionMode::Gold,
            max_span_width: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if self.max_seq_len < 1 {
            return bad("max_seq_len must be at least 1");
        }
        if self.max_span_width < 1 {
            return bad("max_span_width must be at least 1");
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return bad("alpha and beta must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a finite non-negative number");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be a finite non-negative number");
        }
        Ok(())
    }

    pub fn resolve_config(&self) -> ResolveConfig {
        ResolveConfig {
            mode: self.mention_mode,
            max_span_width: self.max_span_width,
            include_singletons: false,
        }
    }
}

/// Learning rate for `step` (0-based within the epoch) of `epoch` (0-based).
pub fn lr_at(config: &TrainConfig, epoch: usize, step: usize, steps_per_epoch: usize) -> f64 {
    match config.lr_schedule {
        LrSchedule::Fixed => config.learning_rate,
        LrSchedule::LinearDecay => {
            let total = (config.epochs * steps_per_epoch.max(1)) as f64;
            let progress = ((epoch * steps_per_epoch.max(1) + step) as f64 / total).clamp(0.0, 1.0);
            config.learning_rate * (1.0 - progress)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorefLoss {
    pub loss: f64,
    /// Gradient on every raw score, same layout as the affinity rows. The
    /// dummy slot is included for completeness even though its score is fixed.
    pub d_raw: Vec<Vec<f64>>,
}

/// Mean over anaphors of `-α log P(gold antecedents)` for anaphors that have
/// an earlier gold antecedent and `-β log P(dummy)` for those that do not.
pub fn coref_loss(a: &AffinityMatrix, gold: &ClusterSet, alpha: f64, beta: f64) -> Result<CorefLoss> {
    let n = a.len();
    if let Some(m) = gold.max_index().filter(|&m| m >= n) {
        return Err(Error::Universe { index: m, universe: n });
    }
    let membership = gold.membership();
    let mut loss = 0.0;
    let mut d_raw = Vec::with_capacity(n);
    for j in 0..n {
        let p = a.attn(j);
        let mut in_gold = vec![false; j + 1];
        if let Some(&c) = membership.get(&j) {
            for &i in gold.clusters()[c].iter().filter(|&&i| i < j) {
                in_gold[i + 1] = true;
            }
        }
        let weight = if in_gold.iter().any(|&g| g) {
            alpha
        } else {
            in_gold[0] = true;
            beta
        };
        let mass: f64 = p.iter().zip(&in_gold).filter(|(_, &g)| g).map(|(x, _)| x).sum();
        loss += -weight * mass.max(PROB_FLOOR).ln();
        let grad = if mass > PROB_FLOOR {
            p.iter()
                .zip(&in_gold)
                .map(|(&pk, &g)| weight * (pk - if g { pk / mass } else { 0.0 }) / n as f64)
                .collect()
        } else {
            vec![0.0; j + 1]
        };
        d_raw.push(grad);
    }
    let loss = if n == 0 { 0.0 } else { loss / n as f64 };
    Ok(CorefLoss { loss, d_raw })
}

/// Forward + backward for one document; gradients are scaled by `scale` and
/// accumulated into `model`. Returns the (unscaled) document loss.
pub fn accumulate_document(model: &mut ModelParams, doc: &Document, config: &TrainConfig, scale: f64) -> Result<f64> {
    if doc.is_empty() {
        return Ok(0.0);
    }
    let fwd = model.forward(&doc.tokens, &doc.mentions)?;
    let mut out = coref_loss(&fwd.affinity.matrix, &doc.gold_clusters, config.alpha, config.beta)?;
    let mut total = out.loss;
    out.d_raw.iter_mut().flatten().for_each(|g| *g *= scale);

    let extra = if config.mention_mode == MentionMode::Enumerate {
        let (hinge, d_r) = mention_hinge(model, &fwd.encoder.reps, doc, config.max_span_width, scale)?;
        total += hinge;
        Some(d_r)
    } else {
        None
    };
    model.backward(&fwd, &out.d_raw, extra.as_ref())?;
    Ok(total)
}

/// Mean hinge loss `max(0, 1 - y s)` of the span scorer over all enumerated
/// spans, with `y = +1` for gold mentions. Accumulates scorer gradients and
/// returns the gradient on the token representations.
fn mention_hinge(
    model: &mut ModelParams,
    reps: &crate::encoder::TokenRepresentations,
    doc: &Document,
    max_width: usize,
    scale: f64,
) -> Result<(f64, Matrix)> {
    let spans = enumerate_spans(reps.len(), max_width);
    let n = spans.len().max(1) as f64;
    let mut d_r = Matrix::zeros(reps.len(), reps.dim());
    let mut loss = 0.0;
    for s in spans {
        let g = span_repr(reps, s)?;
        let y = if doc.mentions.binary_search(&s).is_ok() { 1.0 } else { -1.0 };
        let margin = 1.0 - y * model.scorer.score(&g);
        if margin <= 0.0 {
            continue;
        }
        loss += margin / n;
        let ds = -y * scale / n;
        for (w, x) in model.scorer.weight.grad.as_mut_slice().iter_mut().zip(&g) {
            *w += ds * x;
        }
        model.scorer.bias.grad.as_mut_slice()[0] += ds;
        let d_g: Vec<f64> = model.scorer.weight.value.as_slice().iter().map(|w| w * ds).collect();
        crate::encoder::span_repr_backward(&d_g, s, &mut d_r)?;
    }
    Ok((loss, d_r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_precision: f64,
    pub dev_recall: f64,
    pub dev_f1: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Checkpoint with the best dev link F1 (the last epoch if there is no dev set).
    pub model: ModelParams,
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
}

fn vocabulary(docs: &[Document]) -> Vec<String> {
    docs.iter().flat_map(|d| d.tokens.iter().cloned()).collect()
}

/// Trains a fresh model whose vocabulary is the training documents' tokens.
pub fn train(train_docs: &[Document], dev_docs: &[Document], model_config: ModelConfig, config: &TrainConfig) -> Result<TrainOutcome> {
    let mut rng = Rng::new(config.seed);
    let model = ModelParams::new(model_config, vocabulary(train_docs), &mut rng)?;
    train_from(model, train_docs, dev_docs, config, None)
}

/// Continues training `model`. With a mask, pruned weights are re-zeroed
/// after every optimizer step.
pub fn train_from(
    mut model: ModelParams,
    train_docs: &[Document],
    dev_docs: &[Document],
    config: &TrainConfig,
    mask: Option<&SparsityMask>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_docs.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let docs: Vec<Document> = train_docs
        .iter()
        .map(|d| {
            if d.len() > config.max_seq_len {
                warn!("truncating {} from {} to {} tokens", d.id, d.len(), config.max_seq_len);
            }
            d.truncated(config.max_seq_len)
        })
        .collect();
    let dev: Vec<Document> = dev_docs.iter().map(|d| d.truncated(config.max_seq_len)).collect();
    for p in model.params_mut() {
        p.reset_state();
    }
    if let Some(mask) = mask {
        mask.apply(&mut model)?;
    }
    let optimizer = AdamW {
        weight_decay: config.weight_decay,
        ..AdamW::default()
    };
    let mut order_rng = Rng::new(config.seed).fork(1);
    let steps_per_epoch = docs.len().div_ceil(config.batch_size);
    let resolve_cfg = config.resolve_config();
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut step_index = 0u64;

    for epoch in 0..config.epochs {
        let started = Instant::now();
        order_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss += accumulate_document(&mut model, &docs[i], config, scale).map_err(|e| match e {
                    Error::NonFinite(what) => Error::NonFinite(format!("{what} at epoch {} batch {b}", epoch + 1)),
                    other => other,
                })? * scale;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!("loss at epoch {} batch {b}", epoch + 1)));
            }
            epoch_loss += batch_loss * batch.len() as f64;
            if config.freeze_embeddings {
                model.encoder.table.table.zero_grad();
            }
            step_index += 1;
            let lr = lr_at(config, epoch, b, steps_per_epoch);
            let mut params: Vec<&mut ParamTensor> = model
                .params_mut()
                .into_iter()
                .filter(|p| !(config.freeze_embeddings && p.name == "embedding"))
                .collect();
            optimizer.step(&mut params, lr, step_index)?;
            if let Some(mask) = mask {
                mask.apply(&mut model)?;
            }
        }
        let report = evaluate(&model, &dev, &resolve_cfg)?;
        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss: epoch_loss / docs.len() as f64,
            dev_precision: report.link_precision,
            dev_recall: report.link_recall,
            dev_f1: report.link_f1,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        info!(
            "epoch {:>3}  loss {:.5}  dev P {:.4} R {:.4} F1 {:.4}  {:.2}s",
            record.epoch, record.train_loss, record.dev_precision, record.dev_recall, record.dev_f1, record.wall_seconds
        );
        let improved = dev.is_empty() || best.as_ref().is_none_or(|(f, _, _)| report.link_f1 > *f);
        if improved {
            best = Some((report.link_f1, epoch + 1, model.clone()));
        }
        log.push(record);
    }
    let (_, best_epoch, mut best_model) = best.expect("at least one epoch ran");
    best_model.zero_grads();
    Ok(TrainOutcome {
        model: best_model,
        best_epoch,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textmodel::generate_synthetic_corpus;

    #[test]
    fn closed_form_losses() {
        let single = AffinityMatrix::from_raw(vec![vec![0.0]]).unwrap();
        let l = coref_loss(&single, &ClusterSet::empty(), 1.0, 1.0).unwrap();
        assert_eq!(l.loss, 0.0);

        // anaphor 1 uniform over {ε, 0}, gold {0, 1}; anaphor 0 contributes 0.
        let a = AffinityMatrix::from_raw(vec![vec![0.0], vec![0.0, 0.0]]).unwrap();
        let gold = ClusterSet::new(vec![vec![0, 1]]).unwrap();
        let l = coref_loss(&a, &gold, 1.0, 1.0).unwrap();
        assert!((l.loss * 2.0 - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn gold_outside_instance_is_rejected() {
        let a = AffinityMatrix::from_raw(vec![vec![0.0]]).unwrap();
        let gold = ClusterSet::new(vec![vec![0, 3]]).unwrap();
        assert!(matches!(coref_loss(&a, &gold, 1.0, 1.0), Err(Error::Universe { .. })));
    }

    #[test]
    fn schedule() {
        let mut cfg = TrainConfig {
            lr_schedule: LrSchedule::Fixed,
            ..TrainConfig::default()
        };
        assert_eq!(lr_at(&cfg, 17, 3, 25), 3e-5);
        cfg.lr_schedule = LrSchedule::LinearDecay;
        assert_eq!(lr_at(&cfg, 0, 0, 25), 3e-5);
        assert!((lr_at(&cfg, 15, 0, 25) - 1.5e-5).abs() < 1e-18);
        assert!(lr_at(&cfg, 29, 24, 25) > 0.0);
    }

    #[test]
    fn config_invariants() {
        let bad = |f: fn(&mut TrainConfig)| {
            let mut c = TrainConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.epochs = 0));
        assert!(bad(|c| c.batch_size = 0));
        assert!(bad(|c| c.alpha = 0.0));
        assert!(bad(|c| c.beta = -1.0));
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_untouched() {
        let docs = generate_synthetic_corpus(12, 2, 40, 20).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let mc = ModelConfig {
            dim: 6,
            att_dim: 6,
            aff_dim: 6,
            depth: 1,
            attention: true,
        };
        let initial = ModelParams::new(mc, vocabulary(&docs[..10]), &mut Rng::new(cfg.seed)).unwrap();
        let out = train(&docs[..10], &docs[10..], mc, &cfg).unwrap();
        for (a, b) in out.model.params().iter().zip(initial.params()) {
            assert_eq!(a.value, b.value, "{}", a.name);
        }
    }

    #[test]
    fn empty_train_split() {
        assert!(train(&[], &[], ModelConfig::default(), &TrainConfig::default()).is_err());
    }

    #[test]
    fn frozen_embeddings_stay_put() {
        let docs = generate_synthetic_corpus(12, 2, 40, 20).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 4,
            learning_rate: 1e-2,
            freeze_embeddings: true,
            ..TrainConfig::default()
        };
        let mc = ModelConfig {
            dim: 6,
            att_dim: 6,
            aff_dim: 6,
            depth: 1,
            attention: true,
        };
        let initial = ModelParams::new(mc, vocabulary(&docs[..10]), &mut Rng::new(cfg.seed)).unwrap();
        let out = train(&docs[..10], &[], mc, &cfg).unwrap();
        assert_eq!(out.model.encoder.table.table.value, initial.encoder.table.table.value);
        assert_ne!(out.model.affinity.antecedent.value, initial.affinity.antecedent.value);
    }
}
