//! Candidate mentions, the scaled affinity matrix over antecedents, exact
//! link selection with a dummy antecedent, and clustering.

mod affinity;
mod links;
mod mentions;

use serde::Serialize;
use web_time::Instant;

pub use affinity::{affinity, AffinityForward, AffinityMatrix, AffinityParams};
pub(crate) use affinity::{affinity_backward, affinity_forward};
pub use links::{brute_force_links, clusters_from_links, select_links, CorefLinkSet, BRUTE_FORCE_LIMIT};
pub use mentions::{candidate_mentions, enumerate_spans, MentionMode, MentionScorerParams};

use crate::encoder::attend;
use crate::error::Result;
use crate::model::ModelParams;
use crate::textmodel::{ClusterSet, Document, MentionSpan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolveConfig {
    pub mode: MentionMode,
    pub max_span_width: usize,
    pub include_singletons: bool,
}

impl Default for ResolveConfig {
    fn default() -> Self {
        Self {
            mode: MentionMode::Gold,
            max_span_width: 3,
            include_singletons: false,
        }
    }
}

/// Wall time per pipeline stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub stages: Vec<(String, f64)>,
    pub tokens_per_second: f64,
}

impl StageTimings {
    pub fn total_ms(&self) -> f64 {
        self.stages.iter().map(|(_, ms)| ms).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Resolution {
    /// Mentions the clusters index into.
    pub spans: Vec<MentionSpan>,
    pub affinity: AffinityMatrix,
    pub links: CorefLinkSet,
    pub clusters: ClusterSet,
    pub timings: StageTimings,
}

impl Resolution {
    /// The input document with mentions and clusters replaced by the prediction.
    pub fn to_document(&self, doc: &Document) -> Document {
        Document {
            id: doc.id.clone(),
            tokens: doc.tokens.clone(),
            mentions: self.spans.clone(),
            gold_clusters: self.clusters.clone(),
        }
    }
}

struct Stopwatch {
    last: Instant,
    stages: Vec<(String, f64)>,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            last: Instant::now(),
            stages: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.push((stage.to_string(), (now - self.last).as_secs_f64() * 1e3));
        self.last = now;
    }
}

/// embed → encode → attend → candidates → affinity → select → cluster.
pub fn resolve(doc: &Document, model: &ModelParams, config: &ResolveConfig) -> Result<Resolution> {
    let mut clock = Stopwatch::start();
    let enc = &model.encoder;
    let e = crate::encoder::embed(doc, &enc.table)?;
    clock.lap("embed");
    let encoded = crate::encoder::encode(&e, &enc.stack)?;
    clock.lap("encode");
    let reps = attend(encoded.output(), &enc.attention)?;
    clock.lap("attend");
    let spans = candidate_mentions(doc, &reps, config.mode, &model.scorer, config.max_span_width)?;
    clock.lap("mentions");
    let affinity = affinity(&spans, &reps, &model.affinity, model.config.aff_dim)?;
    clock.lap("affinity");
    let links = select_links(&affinity);
    clock.lap("select");
    let clusters = clusters_from_links(&links, spans.len(), config.include_singletons);
    clock.lap("cluster");
    let mut timings = StageTimings {
        stages: clock.stages,
        tokens_per_second: 0.0,
    };
    let secs = timings.total_ms() / 1e3;
    timings.tokens_per_second = if secs > 0.0 { doc.len() as f64 / secs } else { f64::INFINITY };
    Ok(Resolution {
        spans,
        affinity,
        links,
        clusters,
        timings,
    })
}

/// Resolves every document, spreading them over `threads` workers. Output
/// order matches input order.
pub fn resolve_all(docs: &[Document], model: &ModelParams, config: &ResolveConfig, threads: usize) -> Result<Vec<Resolution>> {
    let threads = threads.max(1).min(docs.len().max(1));
    if threads == 1 {
        return docs.iter().map(|d| resolve(d, model, config)).collect();
    }
    let chunk = docs.len().div_ceil(threads);
    let parts: Vec<Result<Vec<Resolution>>> = std::thread::scope(|s| {
        let handles: Vec<_> = docs
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|d| resolve(d, model, config)).collect::<Result<Vec<_>>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("resolver worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(docs.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}
