//! Documents, mention spans and clusters, plus the line-delimited document
//! format, the synthetic corpus generator and the 80/10/10 splitter.

mod io;
mod split;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{parse_documents, read_documents, render_documents, write_documents};
pub use split::{split_corpus, CorpusSplit};
pub use synthetic::{generate_synthetic_corpus, Agreement, SyntheticVocab};

/// Inclusive token span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "[usize; 2]", from = "[usize; 2]")]
pub struct MentionSpan {
    pub start: usize,
    pub end: usize,
}

impl MentionSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn width(&self) -> usize {
        self.end - self.start + 1
    }
}

impl From<[usize; 2]> for MentionSpan {
    fn from([start, end]: [usize; 2]) -> Self {
        Self { start, end }
    }
}

impl From<MentionSpan> for [usize; 2] {
    fn from(s: MentionSpan) -> Self {
        [s.start, s.end]
    }
}

/// Disjoint, non-empty sets of mention indices. Stored canonically: each
/// cluster sorted ascending and clusters ordered by their smallest member.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ClusterSet {
    clusters: Vec<Vec<usize>>,
}

impl ClusterSet {
    pub fn new(clusters: Vec<Vec<usize>>) -> std::result::Result<Self, String> {
        let mut seen = BTreeSet::new();
        let mut canon = Vec::with_capacity(clusters.len());
        for mut c in clusters {
            if c.is_empty() {
                return Err("empty cluster".into());
            }
            c.sort_unstable();
            for &m in &c {
                if !seen.insert(m) {
                    return Err(format!("mention {m} appears in more than one cluster"));
                }
            }
            canon.push(c);
        }
        canon.sort_unstable_by_key(|c| c[0]);
        Ok(Self { clusters: canon })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.clusters.iter().flatten().copied().max()
    }

    /// Mention index → cluster position.
    pub fn membership(&self) -> BTreeMap<usize, usize> {
        self.clusters
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| c.iter().map(move |&m| (m, ci)))
            .collect()
    }

    /// Same partition without clusters smaller than two.
    pub fn without_singletons(&self) -> ClusterSet {
        ClusterSet {
            clusters: self.clusters.iter().filter(|c| c.len() >= 2).cloned().collect(),
        }
    }

    /// Unordered within-cluster pairs `(a, b)` with `a < b`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.clusters.iter().flat_map(|c| {
            c.iter()
                .enumerate()
                .flat_map(move |(i, &a)| c[i + 1..].iter().map(move |&b| (a, b)))
        })
    }

    fn remap(&self, map: &[usize]) -> ClusterSet {
        let clusters = self.clusters.iter().map(|c| c.iter().map(|&m| map[m]).collect()).collect();
        ClusterSet::new(clusters).expect("a permutation keeps clusters disjoint")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
    pub mentions: Vec<MentionSpan>,
    pub gold_clusters: ClusterSet,
}

impl Document {
    /// Builds a document, sorting mentions (and remapping cluster indices)
    /// and checking every invariant.
    pub fn new(id: impl Into<String>, tokens: Vec<String>, mentions: Vec<MentionSpan>, clusters: Vec<Vec<usize>>) -> Result<Self> {
        let id = id.into();
        let invalid = |msg: String| Error::InvalidDocument { doc: id.clone(), msg };
        for s in &mentions {
            if s.start > s.end {
                return Err(invalid("span start exceeds end".into()));
            }
            if s.end >= tokens.len() {
                return Err(invalid(format!("span [{}, {}] outside {} tokens", s.start, s.end, tokens.len())));
            }
        }
        if let Some(&bad) = clusters.iter().flatten().find(|&&m| m >= mentions.len()) {
            return Err(invalid(format!("cluster references unknown mention {bad}")));
        }
        let gold = ClusterSet::new(clusters).map_err(invalid)?;

        let mut order: Vec<usize> = (0..mentions.len()).collect();
        order.sort_by_key(|&i| mentions[i]);
        if order.windows(2).any(|w| mentions[w[0]] == mentions[w[1]]) {
            return Err(invalid("duplicate mention span".into()));
        }
        let mut new_index = vec![0; mentions.len()];
        for (pos, &old) in order.iter().enumerate() {
            new_index[old] = pos;
        }
        let sorted = order.iter().map(|&i| mentions[i]).collect();
        Ok(Self {
            gold_clusters: gold.remap(&new_index),
            id,
            tokens,
            mentions: sorted,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Gold antecedents of mention `j`: earlier mentions in its gold cluster.
    pub fn gold_antecedents(&self) -> Vec<Vec<usize>> {
        let membership = self.gold_clusters.membership();
        (0..self.mentions.len())
            .map(|j| match membership.get(&j) {
                Some(&c) => self.gold_clusters.clusters()[c].iter().copied().filter(|&i| i < j).collect(),
                None => Vec::new(),
            })
            .collect()
    }

    /// Keeps the first `max_len` tokens, dropping mentions that no longer fit.
    pub fn truncated(&self, max_len: usize) -> Document {
        if self.tokens.len() <= max_len {
            return self.clone();
        }
        let kept: Vec<usize> = (0..self.mentions.len()).filter(|&i| self.mentions[i].end < max_len).collect();
        let mut new_index = vec![usize::MAX; self.mentions.len()];
        for (pos, &old) in kept.iter().enumerate() {
            new_index[old] = pos;
        }
        let clusters = self
            .gold_clusters
            .clusters()
            .iter()
            .map(|c| {
                c.iter()
                    .filter(|&&m| new_index[m] != usize::MAX)
                    .map(|&m| new_index[m])
                    .collect::<Vec<_>>()
            })
            .filter(|c| !c.is_empty())
            .collect();
        Document {
            id: self.id.clone(),
            tokens: self.tokens[..max_len].to_vec(),
            mentions: kept.iter().map(|&i| self.mentions[i]).collect(),
            gold_clusters: ClusterSet::new(clusters).expect("subset of a valid partition"),
        }
    }

    pub fn with_clusters(&self, clusters: ClusterSet) -> Document {
        Document {
            gold_clusters: clusters,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i}")).collect()
    }

    #[test]
    fn unsorted_mentions_are_sorted_and_clusters_follow() {
        let doc = Document::new(
            "d",
            toks(5),
            vec![MentionSpan::new(3, 3), MentionSpan::new(0, 1), MentionSpan::new(0, 0)],
            vec![vec![0, 2], vec![1]],
        )
        .unwrap();
        assert_eq!(
            doc.mentions,
            vec![MentionSpan::new(0, 0), MentionSpan::new(0, 1), MentionSpan::new(3, 3)]
        );
        // old 0 = (3,3) → new 2; old 2 = (0,0) → new 0; old 1 = (0,1) → new 1
        assert_eq!(doc.gold_clusters.clusters(), &[vec![0, 2], vec![1]]);
    }

    #[test]
    fn invariant_violations() {
        let e = Document::new("d0", toks(3), vec![MentionSpan::new(2, 1)], vec![]).unwrap_err();
        assert_eq!(e.to_string(), "span start exceeds end in d0");
        assert!(Document::new("d", toks(3), vec![MentionSpan::new(1, 3)], vec![]).is_err());
        let dup = vec![MentionSpan::new(1, 1), MentionSpan::new(1, 1)];
        assert!(Document::new("d", toks(3), dup, vec![]).is_err());
        let m = vec![MentionSpan::new(0, 0), MentionSpan::new(1, 1)];
        assert!(Document::new("d", toks(3), m.clone(), vec![vec![0], vec![0, 1]]).is_err());
        assert!(Document::new("d", toks(3), m.clone(), vec![vec![]]).is_err());
        assert!(Document::new("d", toks(3), m, vec![vec![2]]).is_err());
    }

    #[test]
    fn cluster_pairs_and_singletons() {
        let c = ClusterSet::new(vec![vec![4, 1, 2], vec![3]]).unwrap();
        assert_eq!(c.pairs().collect::<Vec<_>>(), vec![(1, 2), (1, 4), (2, 4)]);
        assert_eq!(c.without_singletons().len(), 1);
    }

    #[test]
    fn truncation_drops_trailing_mentions() {
        let doc = Document::new(
            "d",
            toks(6),
            vec![MentionSpan::new(0, 0), MentionSpan::new(2, 3), MentionSpan::new(5, 5)],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let t = doc.truncated(4);
        assert_eq!(t.tokens.len(), 4);
        assert_eq!(t.mentions.len(), 2);
        assert_eq!(t.gold_clusters.clusters(), &[vec![0, 1]]);
        assert_eq!(doc.truncated(10), doc);
    }
}
