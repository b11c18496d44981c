use std::fmt::Write as _;
use std::str::FromStr;

use log::{info, warn};
use serde::Serialize;

use super::{evaluate, EvalReport};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::textmodel::{split_corpus, Document};
use crate::training::{train, LrSchedule, TrainConfig};

/// One configuration change relative to the base run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationDelta {
    /// Refined representations are the encoder outputs themselves.
    AttentionOff,
    /// Embedding table receives no updates.
    FrozenEmbeddings,
    /// One encoder layer instead of the base depth.
    ReducedDepth,
    /// Constant learning rate of 1e-5.
    FixedLearningRate,
}

impl AblationDelta {
    pub const ALL: [AblationDelta; 4] = [
        AblationDelta::AttentionOff,
        AblationDelta::FrozenEmbeddings,
        AblationDelta::ReducedDepth,
        AblationDelta::FixedLearningRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationDelta::AttentionOff => "no-attention",
            AblationDelta::FrozenEmbeddings => "static-embeddings",
            AblationDelta::ReducedDepth => "reduced-layers",
            AblationDelta::FixedLearningRate => "fixed-lr",
        }
    }

    pub fn apply(self, model: &mut ModelConfig, train: &mut TrainConfig) {
        match self {
            AblationDelta::AttentionOff => model.attention = false,
            AblationDelta::FrozenEmbeddings => train.freeze_embeddings = true,
            AblationDelta::ReducedDepth => model.depth = 1,
            AblationDelta::FixedLearningRate => {
                train.lr_schedule = LrSchedule::Fixed;
                train.learning_rate = 1e-5;
            }
        }
    }
}

impl FromStr for AblationDelta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationDelta::ALL.into_iter().find(|d| d.name() == s).ok_or_else(|| {
            let names: Vec<&str> = AblationDelta::ALL.iter().map(|d| d.name()).collect();
            Error::Config(format!("unknown ablation {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AblationSpec {
    pub name: String,
    pub delta: AblationDelta,
}

impl From<AblationDelta> for AblationSpec {
    fn from(delta: AblationDelta) -> Self {
        Self {
            name: delta.name().to_string(),
            delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub method: String,
    pub dataset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<AblationDelta>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, method: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn f1(&self, method: &str) -> Option<f64> {
        self.row(method).and_then(|r| r.report.as_ref()).map(|r| r.link_f1)
    }
}

/// Trains the base configuration and one model per variant on the same
/// split and data order, then scores each on the held-out test split. A
/// failing variant is recorded in its row and does not stop the others.
pub fn run_ablations(
    base_model: ModelConfig,
    base_train: &TrainConfig,
    variants: &[AblationSpec],
    corpus: &[Document],
    seed: u64,
    dataset: &str,
    parallel: bool,
) -> Result<AblationTable> {
    let split = split_corpus(corpus, seed)?;
    let (train_docs, dev_docs, test_docs) = split.select(corpus);
    let owned = |v: Vec<&Document>| v.into_iter().cloned().collect::<Vec<_>>();
    let (train_docs, dev_docs, test_docs) = (owned(train_docs), owned(dev_docs), owned(test_docs));

    let mut runs: Vec<(String, Option<AblationDelta>, ModelConfig, TrainConfig)> =
        vec![("base".to_string(), None, base_model, base_train.clone())];
    for v in variants {
        let mut m = base_model;
        let mut t = base_train.clone();
        v.delta.apply(&mut m, &mut t);
        runs.push((v.name.clone(), Some(v.delta), m, t));
    }

    let run_one = |(name, delta, m, t): &(String, Option<AblationDelta>, ModelConfig, TrainConfig)| {
        info!("ablation run {name}");
        let result = train(&train_docs, &dev_docs, *m, t).and_then(|out| evaluate(&out.model, &test_docs, &t.resolve_config()));
        if let Err(e) = &result {
            warn!("ablation run {name} failed: {e}");
        }
        let (report, error) = match result {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        AblationRow {
            method: name.clone(),
            dataset: dataset.to_string(),
            delta: *delta,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            report,
            error,
        }
    };

    let rows = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = runs.iter().map(|r| s.spawn(|| run_one(r))).collect();
            handles.into_iter().map(|h| h.join().expect("ablation worker panicked")).collect()
        })
    } else {
        runs.iter().map(run_one).collect()
    };
    Ok(AblationTable { rows })
}

/// Fixed-width text table: Method, Dataset, F1, Precision, Recall, Epochs,
/// Batch Size, Learning Rate. Scores are pairwise-link percentages.
pub fn render_table(table: &AblationTable) -> String {
    let header = [
        "Method",
        "Dataset",
        "Link F1",
        "Precision",
        "Recall",
        "Epochs",
        "Batch Size",
        "Learning Rate",
    ];
    let mut rows: Vec<[String; 8]> = Vec::new();
    for r in &table.rows {
        let (f1, p, rc) = match &r.report {
            Some(rep) => (
                format!("{:.2}", rep.link_f1 * 100.0),
                format!("{:.2}", rep.link_precision * 100.0),
                format!("{:.2}", rep.link_recall * 100.0),
            ),
            None => ("error".into(), "-".into(), "-".into()),
        };
        rows.push([
            r.method.clone(),
            r.dataset.clone(),
            f1,
            p,
            rc,
            r.epochs.to_string(),
            r.batch_size.to_string(),
            format!("{:e}", r.learning_rate),
        ]);
    }
    let widths: Vec<usize> = (0..8)
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c < 2 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        writeln!(out, "{}", parts.join("  ").trim_end()).unwrap();
    };
    line(header.to_vec(), &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    writeln!(out, "{}", rule.join("  ")).unwrap();
    for r in &rows {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textmodel::generate_synthetic_corpus;

    fn tiny() -> (ModelConfig, TrainConfig) {
        (
            ModelConfig {
                dim: 4,
                att_dim: 4,
                aff_dim: 4,
                depth: 2,
                attention: true,
            },
            TrainConfig {
                epochs: 1,
                batch_size: 8,
                learning_rate: 1e-3,
                ..TrainConfig::default()
            },
        )
    }

    #[test]
    fn base_only_and_all_variants() {
        let docs = generate_synthetic_corpus(20, 1, 40, 16).unwrap();
        let (m, t) = tiny();
        let none = run_ablations(m, &t, &[], &docs, 1, "synthetic", false).unwrap();
        assert_eq!(none.rows.len(), 1);
        let specs: Vec<AblationSpec> = AblationDelta::ALL.into_iter().map(Into::into).collect();
        let all = run_ablations(m, &t, &specs, &docs, 1, "synthetic", false).unwrap();
        assert_eq!(all.rows.len(), 5);
        assert_eq!(all.row("fixed-lr").unwrap().learning_rate, 1e-5);
        assert!(all.rows.iter().all(|r| r.report.is_some()));
        let again = run_ablations(m, &t, &specs, &docs, 1, "synthetic", true).unwrap();
        assert_eq!(again, all);
        let text = render_table(&all);
        assert!(text.starts_with("Method"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn failing_variant_does_not_abort_others() {
        let docs = generate_synthetic_corpus(20, 1, 40, 16).unwrap();
        let (mut m, t) = tiny();
        m.depth = 2;
        // A bad base learning rate only breaks runs that keep it.
        let bad = TrainConfig {
            learning_rate: f64::NAN,
            ..t
        };
        let specs = vec![AblationSpec::from(AblationDelta::FixedLearningRate)];
        let table = run_ablations(m, &bad, &specs, &docs, 1, "synthetic", false).unwrap();
        assert!(table.rows[0].error.is_some());
        assert!(table.rows[1].report.is_some());
    }

    #[test]
    fn parses_names() {
        assert_eq!("no-attention".parse::<AblationDelta>().unwrap(), AblationDelta::AttentionOff);
        assert!("nope".parse::<AblationDelta>().is_err());
    }
}
