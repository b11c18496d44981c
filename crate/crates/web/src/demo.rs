//! Everything the page does, as plain Rust so it runs and tests natively.

use serde::Serialize;

use coref_core::compression::{dequantize, prune, quantize, sparsity};
use coref_core::evaluation::{evaluate, EvalReport};
use coref_core::numerics::Parameters;
use coref_core::resolver::resolve;
use coref_core::textmodel::{generate_synthetic_corpus, split_corpus, Agreement, Document, MentionSpan, SyntheticVocab};
use coref_core::training::{train, train_from, EpochRecord, TrainConfig};
use coref_core::{Error, ModelConfig, ModelParams, Result};

/// Small enough to train in a browser tab in a few seconds.
const N_DOCS: usize = 200;
const VOCAB_SIZE: usize = 60;
const MAX_LEN: usize = 40;
const DIM: usize = 32;
/// Free text longer than this is rejected rather than truncated.
const MAX_TOKENS: usize = 200;
const TITLES: [&str; 2] = ["mr", "ms"];

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
    pub test: EvalReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct MentionView {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Antecedent distribution of one mention; `weights[0]` is the dummy
/// antecedent, `weights[j + 1]` is mention `j`.
#[derive(Debug, Clone, Serialize)]
pub struct AnaphorView {
    pub mention: usize,
    pub antecedent: Option<usize>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolveView {
    pub tokens: Vec<String>,
    /// Whether each token is in the model's vocabulary.
    pub known: Vec<bool>,
    pub mentions: Vec<MentionView>,
    pub anaphors: Vec<AnaphorView>,
    pub clusters: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Int8View {
    pub bytes: usize,
    pub test_f1: f64,
    /// Largest `|w - dequantized w| / scale` over all tensors; at most 0.5.
    pub worst_error_in_scales: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrunedView {
    pub sparsity: f64,
    pub finetune_epochs: usize,
    pub test_f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompressView {
    pub full_bytes: usize,
    pub full_test_f1: f64,
    pub int8: Int8View,
    pub pruned: PrunedView,
}

#[derive(Debug, Clone, Serialize)]
pub struct Lexicon {
    pub pronouns: Vec<&'static str>,
    pub titles: Vec<&'static str>,
    pub names: Vec<(String, Vec<String>)>,
}

struct Trained {
    model: ModelParams,
    config: TrainConfig,
}

pub struct Demo {
    vocab: SyntheticVocab,
    train: Vec<Document>,
    dev: Vec<Document>,
    test: Vec<Document>,
    seed: u64,
    trained: Option<Trained>,
}

fn class_name(a: Agreement) -> &'static str {
    match a {
        Agreement::Masculine => "masculine",
        Agreement::Feminine => "feminine",
        Agreement::Neuter => "neuter",
        Agreement::Plural => "plural",
    }
}

impl Demo {
    /// Generates and splits the synthetic corpus for `seed`.
    pub fn new(seed: u64) -> Result<Self> {
        let docs = generate_synthetic_corpus(N_DOCS, seed, VOCAB_SIZE, MAX_LEN)?;
        let split = split_corpus(&docs, seed)?;
        let (train, dev, test) = split.select(&docs);
        let owned = |v: Vec<&Document>| v.into_iter().cloned().collect::<Vec<_>>();
        Ok(Self {
            vocab: SyntheticVocab::new(VOCAB_SIZE),
            train: owned(train),
            dev: owned(dev),
            test: owned(test),
            seed,
            trained: None,
        })
    }

    pub fn split_sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.dev.len(), self.test.len())
    }

    /// Trains a fresh model, keeps the best dev checkpoint and scores it on test.
    pub fn train(&mut self, epochs: usize, learning_rate: f64, attention: bool) -> Result<TrainSummary> {
        let model_config = ModelConfig {
            dim: DIM,
            att_dim: DIM,
            aff_dim: DIM,
            depth: 2,
            attention,
        };
        let config = TrainConfig {
            epochs,
            learning_rate,
            seed: self.seed,
            ..TrainConfig::default()
        };
        let outcome = train(&self.train, &self.dev, model_config, &config)?;
        let test = evaluate(&outcome.model, &self.test, &config.resolve_config())?;
        self.trained = Some(Trained {
            model: outcome.model,
            config,
        });
        Ok(TrainSummary {
            best_epoch: outcome.best_epoch,
            log: outcome.log,
            test,
        })
    }

    fn trained(&self) -> Result<&Trained> {
        self.trained.as_ref().ok_or_else(|| Error::Config("train a model first".into()))
    }

    fn is_name(&self, token: &str) -> bool {
        Agreement::ALL.iter().any(|&a| self.vocab.names(a).iter().any(|n| n == token))
    }

    /// Lowercased, punctuation-trimmed tokens and the mentions found in them:
    /// every pronoun, and every known name together with a title before it.
    pub fn tokenize(&self, text: &str) -> (Vec<String>, Vec<MentionSpan>) {
        let tokens: Vec<String> = text
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        let mut spans = Vec::new();
        for (i, tok) in tokens.iter().enumerate() {
            if Agreement::ALL.iter().any(|a| a.pronoun() == tok) {
                spans.push(MentionSpan::new(i, i));
            } else if self.is_name(tok) {
                let titled = i > 0 && TITLES.contains(&tokens[i - 1].as_str());
                spans.push(MentionSpan::new(if titled { i - 1 } else { i }, i));
            }
        }
        (tokens, spans)
    }

    /// Resolves free text with the trained model.
    pub fn resolve(&self, text: &str) -> Result<ResolveView> {
        let t = self.trained()?;
        let (tokens, spans) = self.tokenize(text);
        if tokens.is_empty() {
            return Err(Error::Empty("text"));
        }
        if tokens.len() > MAX_TOKENS {
            return Err(Error::Config(format!(
                "text has {} tokens; the demo takes at most {MAX_TOKENS}",
                tokens.len()
            )));
        }
        let doc = Document::new("input", tokens, spans, Vec::new())?;
        let r = resolve(&doc, &t.model, &t.config.resolve_config())?;
        let vocab = t.model.vocab();
        let mentions = r
            .spans
            .iter()
            .map(|s| MentionView {
                start: s.start,
                end: s.end,
                text: doc.tokens[s.start..=s.end].join(" "),
            })
            .collect();
        let anaphors = (0..r.spans.len())
            .map(|i| AnaphorView {
                mention: i,
                antecedent: r.links.antecedent(i),
                weights: r.affinity.attn(i).to_vec(),
            })
            .collect();
        Ok(ResolveView {
            known: doc.tokens.iter().map(|tok| vocab.contains(tok)).collect(),
            tokens: doc.tokens,
            mentions,
            anaphors,
            clusters: r.clusters.clusters().to_vec(),
        })
    }

    /// Quantizes the trained model to int8, and separately prunes it to
    /// `target_sparsity` with an optional masked fine-tune.
    pub fn compress(&self, target_sparsity: f64, finetune_epochs: usize) -> Result<CompressView> {
        if !(0.0..1.0).contains(&target_sparsity) {
            return Err(Error::Config(format!("sparsity must be in [0, 1), got {target_sparsity}")));
        }
        let t = self.trained()?;
        let rc = t.config.resolve_config();
        let f1 = |m: &ModelParams| evaluate(m, &self.test, &rc).map(|r| r.link_f1);

        let q = quantize(&t.model)?;
        let deq = dequantize(&q);
        let mut worst: f64 = 0.0;
        for (p, (_, qt)) in t.model.params().into_iter().zip(&q.tensors) {
            for (w, d) in p.value.as_slice().iter().zip(qt.dequantize().as_slice()) {
                worst = worst.max((w - d).abs() / qt.scale);
            }
        }

        let (mut pruned, mask) = prune(&t.model, target_sparsity)?;
        if finetune_epochs > 0 && !mask.is_empty() {
            let cfg = TrainConfig {
                epochs: finetune_epochs,
                ..t.config.clone()
            };
            pruned = train_from(pruned, &self.train, &self.dev, &cfg, Some(&mask))?.model;
        }

        Ok(CompressView {
            full_bytes: t.model.to_container().to_bytes().len(),
            full_test_f1: f1(&t.model)?,
            int8: Int8View {
                bytes: q.to_container().to_bytes().len(),
                test_f1: f1(&deq)?,
                worst_error_in_scales: worst,
            },
            pruned: PrunedView {
                sparsity: sparsity(&pruned),
                finetune_epochs,
                test_f1: f1(&pruned)?,
            },
        })
    }

    /// Text of test document `index` (wrapping), for the page's example button.
    pub fn sample(&self, index: usize) -> String {
        self.test[index % self.test.len()].tokens.join(" ")
    }

    pub fn lexicon(&self) -> Lexicon {
        Lexicon {
            pronouns: Agreement::ALL.iter().map(|a| a.pronoun()).collect(),
            titles: TITLES.to_vec(),
            names: Agreement::ALL
                .iter()
                .map(|&a| (class_name(a).to_string(), self.vocab.names(a).to_vec()))
                .collect(),
        }
    }
}
