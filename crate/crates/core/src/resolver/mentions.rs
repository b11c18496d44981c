use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::encoder::{span_repr, TokenRepresentations};
use crate::error::{Error, Result};
use crate::numerics::{dot_product, Matrix, ParamTensor, Rng};
use crate::textmodel::{Document, MentionSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MentionMode {
    /// Use the document's own mention list.
    #[default]
    Gold,
    /// Score every span up to a maximum width and keep the best.
    Enumerate,
}

impl fmt::Display for MentionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MentionMode::Gold => "gold",
            MentionMode::Enumerate => "enumerate",
        })
    }
}

impl FromStr for MentionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gold" => Ok(MentionMode::Gold),
            "enumerate" => Ok(MentionMode::Enumerate),
            other => Err(Error::Config(format!("unknown mention mode {other:?} (gold | enumerate)"))),
        }
    }
}

/// Linear span scorer `w·g + b` used by enumerate mode.
#[derive(Debug, Clone, PartialEq)]
pub struct MentionScorerParams {
    /// `1 × 3d`
    pub weight: ParamTensor,
    /// `1 × 1`
    pub bias: ParamTensor,
    keep_ratio: f64,
}

impl MentionScorerParams {
    pub fn new(span_dim: usize, keep_ratio: f64, rng: &mut Rng) -> Result<Self> {
        let mut s = Self {
            weight: ParamTensor::new("scorer.weight", Matrix::xavier(1, span_dim, rng)),
            bias: ParamTensor::new("scorer.bias", Matrix::zeros(1, 1)),
            keep_ratio: 1.0,
        };
        s.set_keep_ratio(keep_ratio)?;
        Ok(s)
    }

    pub fn keep_ratio(&self) -> f64 {
        self.keep_ratio
    }

    pub fn set_keep_ratio(&mut self, ratio: f64) -> Result<()> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::Config(format!("keep ratio {ratio} outside (0, 1]")));
        }
        self.keep_ratio = ratio;
        Ok(())
    }

    pub fn score(&self, g: &[f64]) -> f64 {
        dot_product(self.weight.value.as_slice(), g) + self.bias.value[(0, 0)]
    }
}

/// All spans of width `1..=max_width`, in (start, end) order.
pub fn enumerate_spans(n_tokens: usize, max_width: usize) -> Vec<MentionSpan> {
    (0..n_tokens)
        .flat_map(|s| (s..n_tokens.min(s + max_width)).map(move |e| MentionSpan::new(s, e)))
        .collect()
}

pub fn candidate_mentions(
    doc: &Document,
    reps: &TokenRepresentations,
    mode: MentionMode,
    scorer: &MentionScorerParams,
    max_width: usize,
) -> Result<Vec<MentionSpan>> {
    match mode {
        MentionMode::Gold => Ok(doc.mentions.clone()),
        MentionMode::Enumerate => {
            let spans = enumerate_spans(reps.len(), max_width);
            let mut scored = spans
                .into_iter()
                .map(|s| Ok((scorer.score(&span_repr(reps, s)?), s)))
                .collect::<Result<Vec<_>>>()?;
            let keep = ((scorer.keep_ratio * reps.len() as f64).ceil() as usize).min(scored.len());
            let rank = |a: &(f64, MentionSpan), b: &(f64, MentionSpan)| {
                b.0.partial_cmp(&a.0)
                    .unwrap_or(Ordering::Equal)
                    .then(a.1.start.cmp(&b.1.start))
                    .then(a.1.end.cmp(&b.1.end))
            };
            if keep < scored.len() {
                scored.select_nth_unstable_by(keep, rank);
                scored.truncate(keep);
            }
            let mut kept: Vec<MentionSpan> = scored.into_iter().map(|(_, s)| s).collect();
            kept.sort();
            Ok(kept)
        }
    }
}
