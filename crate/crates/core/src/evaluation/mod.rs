//! Pairwise-link and MUC scoring, mention detection scoring, the ablation
//! runner and the throughput benchmark.

mod ablation;
mod bench;
mod metrics;

use std::collections::BTreeMap;

use serde::Serialize;

pub use ablation::{render_table, run_ablations, AblationDelta, AblationRow, AblationSpec, AblationTable};
pub use bench::{benchmark, BenchReport};
pub use metrics::{link_counts, link_prf, muc_counts, muc_prf, LinkCounts, MucCounts, Prf};

use crate::error::Result;
use crate::model::ModelParams;
use crate::resolver::{resolve_all, MentionMode, Resolution, ResolveConfig};
use crate::textmodel::{ClusterSet, Document, MentionSpan};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub link_precision: f64,
    pub link_recall: f64,
    pub link_f1: f64,
    pub muc_precision: f64,
    pub muc_recall: f64,
    pub muc_f1: f64,
    /// Only meaningful in enumerate mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mention_f1: Option<f64>,
    pub docs_scored: usize,
    /// Left out unless timing was requested, so reports stay byte-stable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tokens_per_second: Option<f64>,
}

/// Accumulates corpus-level (micro-averaged) counts document by document.
#[derive(Debug, Clone, Default)]
pub struct Scorer {
    links: LinkCounts,
    muc: MucCounts,
    mentions: (usize, usize, usize),
    docs: usize,
    enumerate: bool,
}

impl Scorer {
    pub fn new(mode: MentionMode) -> Self {
        Self {
            enumerate: mode == MentionMode::Enumerate,
            ..Self::default()
        }
    }

    /// Scores predicted clusters over `predicted_spans` against the gold
    /// document. Both sides are mapped onto the union of their spans.
    pub fn add(&mut self, gold: &Document, predicted_spans: &[MentionSpan], predicted: &ClusterSet) -> Result<()> {
        let mut universe: BTreeMap<MentionSpan, usize> = BTreeMap::new();
        for s in gold.mentions.iter().chain(predicted_spans) {
            let next = universe.len();
            universe.entry(*s).or_insert(next);
        }
        let remap = |spans: &[MentionSpan], c: &ClusterSet| {
            ClusterSet::new(
                c.clusters()
                    .iter()
                    .map(|k| k.iter().map(|&m| universe[&spans[m]]).collect())
                    .collect(),
            )
            .expect("distinct spans stay distinct")
        };
        let g = remap(&gold.mentions, &gold.gold_clusters);
        let p = remap(predicted_spans, predicted);
        self.links.add(link_counts(&p, &g, universe.len())?);
        self.muc.add(muc_counts(&p, &g, universe.len())?);
        let common = predicted_spans.iter().filter(|s| gold.mentions.binary_search(s).is_ok()).count();
        self.mentions.0 += common;
        self.mentions.1 += predicted_spans.len();
        self.mentions.2 += gold.mentions.len();
        self.docs += 1;
        Ok(())
    }

    pub fn report(&self) -> EvalReport {
        let link = self.links.prf();
        let muc = self.muc.prf();
        let mention_f1 = self.enumerate.then(|| {
            let (c, p, g) = self.mentions;
            let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
            Prf::new(ratio(c, p), ratio(c, g)).f1
        });
        EvalReport {
            link_precision: link.precision,
            link_recall: link.recall,
            link_f1: link.f1,
            muc_precision: muc.precision,
            muc_recall: muc.recall,
            muc_f1: muc.f1,
            mention_f1,
            docs_scored: self.docs,
            tokens_per_second: None,
        }
    }
}

pub fn score_resolutions(docs: &[Document], resolutions: &[Resolution], mode: MentionMode) -> Result<EvalReport> {
    let mut scorer = Scorer::new(mode);
    for (doc, r) in docs.iter().zip(resolutions) {
        scorer.add(doc, &r.spans, &r.clusters)?;
    }
    Ok(scorer.report())
}

/// Resolves and scores `docs` against their gold clusters.
pub fn evaluate(model: &ModelParams, docs: &[Document], config: &ResolveConfig) -> Result<EvalReport> {
    evaluate_parallel(model, docs, config, 1)
}

pub fn evaluate_parallel(model: &ModelParams, docs: &[Document], config: &ResolveConfig, threads: usize) -> Result<EvalReport> {
    let resolutions = resolve_all(docs, model, config, threads)?;
    score_resolutions(docs, &resolutions, config.mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scorer_aligns_differing_span_lists() {
        let gold = Document::new(
            "d",
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            vec![MentionSpan::new(0, 0), MentionSpan::new(2, 2), MentionSpan::new(3, 3)],
            vec![vec![0, 1], vec![2]],
        )
        .unwrap();
        // predicted spans: (0,0), (1,1), (2,2); cluster {(0,0), (2,2)} is right
        let spans = [MentionSpan::new(0, 0), MentionSpan::new(1, 1), MentionSpan::new(2, 2)];
        let mut s = Scorer::new(MentionMode::Enumerate);
        s.add(&gold, &spans, &ClusterSet::new(vec![vec![0, 2]]).unwrap()).unwrap();
        let r = s.report();
        assert_eq!(r.link_f1, 1.0);
        assert!((r.mention_f1.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn report_json_omits_optional_fields() {
        let r = Scorer::new(MentionMode::Gold).report();
        let json = serde_json::to_string(&r).unwrap();
        assert!(!json.contains("tokens_per_second"));
        assert!(!json.contains("mention_f1"));
    }
}
