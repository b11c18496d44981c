use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::textmodel::ClusterSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { precision, recall, f1 }
    }
}

fn check_universe(c: &ClusterSet, universe: usize) -> Result<()> {
    match c.max_index() {
        Some(m) if m >= universe => Err(Error::Universe { index: m, universe }),
        _ => Ok(()),
    }
}

/// Pair counts behind pairwise-link scoring.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LinkCounts {
    pub common: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl LinkCounts {
    pub fn add(&mut self, other: LinkCounts) {
        self.common += other.common;
        self.predicted += other.predicted;
        self.gold += other.gold;
    }

    /// `P = 1` with no predicted pairs, `R = 1` with no gold pairs.
    pub fn prf(&self) -> Prf {
        let p = if self.predicted == 0 {
            1.0
        } else {
            self.common as f64 / self.predicted as f64
        };
        let r = if self.gold == 0 {
            1.0
        } else {
            self.common as f64 / self.gold as f64
        };
        Prf::new(p, r)
    }
}

pub fn link_counts(predicted: &ClusterSet, gold: &ClusterSet, universe: usize) -> Result<LinkCounts> {
    check_universe(predicted, universe)?;
    check_universe(gold, universe)?;
    let gold_pairs: BTreeSet<(usize, usize)> = gold.pairs().collect();
    let mut counts = LinkCounts {
        gold: gold_pairs.len(),
        ..LinkCounts::default()
    };
    for pair in predicted.pairs() {
        counts.predicted += 1;
        if gold_pairs.contains(&pair) {
            counts.common += 1;
        }
    }
    Ok(counts)
}

/// Precision/recall/F1 over unordered within-cluster mention pairs.
pub fn link_prf(predicted: &ClusterSet, gold: &ClusterSet, universe: usize) -> Result<Prf> {
    Ok(link_counts(predicted, gold, universe)?.prf())
}

/// Numerators and denominators of the MUC score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MucCounts {
    pub recall_num: usize,
    pub recall_den: usize,
    pub precision_num: usize,
    pub precision_den: usize,
}

impl MucCounts {
    pub fn add(&mut self, o: MucCounts) {
        self.recall_num += o.recall_num;
        self.recall_den += o.recall_den;
        self.precision_num += o.precision_num;
        self.precision_den += o.precision_den;
    }

    /// `0/0` scores as 0.
    pub fn prf(&self) -> Prf {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        Prf::new(
            ratio(self.precision_num, self.precision_den),
            ratio(self.recall_num, self.recall_den),
        )
    }
}

/// `Σ_k (|k| - |partitions of k by other|)` and `Σ_k (|k| - 1)` over the key clusters.
fn muc_side(key: &ClusterSet, response: &ClusterSet) -> (usize, usize) {
    let owner: BTreeMap<usize, usize> = response.membership();
    let mut num = 0;
    let mut den = 0;
    for c in key.clusters() {
        let mut parts = BTreeSet::new();
        let mut loose = 0;
        for m in c {
            match owner.get(m) {
                Some(&r) => {
                    parts.insert(r);
                }
                None => loose += 1,
            }
        }
        num += c.len() - (parts.len() + loose);
        den += c.len() - 1;
    }
    (num, den)
}

pub fn muc_counts(predicted: &ClusterSet, gold: &ClusterSet, universe: usize) -> Result<MucCounts> {
    check_universe(predicted, universe)?;
    check_universe(gold, universe)?;
    let (recall_num, recall_den) = muc_side(gold, predicted);
    let (precision_num, precision_den) = muc_side(predicted, gold);
    Ok(MucCounts {
        recall_num,
        recall_den,
        precision_num,
        precision_den,
    })
}

pub fn muc_prf(predicted: &ClusterSet, gold: &ClusterSet, universe: usize) -> Result<Prf> {
    Ok(muc_counts(predicted, gold, universe)?.prf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn cs(v: Vec<Vec<usize>>) -> ClusterSet {
        ClusterSet::new(v).unwrap()
    }

    pub(crate) fn random_partition(rng: &mut Rng, n: usize) -> ClusterSet {
        let k = rng.range(1, n.max(1));
        let mut groups = vec![Vec::new(); k];
        for m in 0..n {
            if rng.chance(0.85) {
                groups[rng.range(0, k - 1)].push(m);
            }
        }
        cs(groups.into_iter().filter(|g| !g.is_empty()).collect())
    }

    #[test]
    fn perfect_and_empty_prediction() {
        let g = cs(vec![vec![0, 1, 2]]);
        for prf in [link_prf(&g, &g, 3).unwrap(), muc_prf(&g, &g, 3).unwrap()] {
            assert_eq!((prf.precision, prf.recall, prf.f1), (1.0, 1.0, 1.0));
        }
        let l = link_prf(&ClusterSet::empty(), &g, 3).unwrap();
        assert_eq!((l.precision, l.recall, l.f1), (1.0, 0.0, 0.0));
    }

    #[test]
    fn disjoint_pairs_score_zero() {
        let g = cs(vec![vec![0, 1], vec![2, 3]]);
        let p = cs(vec![vec![0, 2], vec![1, 3]]);
        assert_eq!(link_prf(&p, &g, 4).unwrap().f1, 0.0);
        assert_eq!(muc_prf(&p, &g, 4).unwrap().f1, 0.0);
    }

    #[test]
    fn all_singleton_gold_scores_zero_muc() {
        let g = cs(vec![vec![0], vec![1]]);
        let m = muc_prf(&g, &g, 2).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn universe_mismatch() {
        let g = cs(vec![vec![0, 5]]);
        assert!(matches!(link_prf(&g, &g, 3), Err(Error::Universe { index: 5, universe: 3 })));
        assert!(muc_prf(&g, &g, 3).is_err());
    }

    #[test]
    fn textbook_muc_example() {
        // gold {A B C D}, response {A B} {C D}: recall (4 - 2) / 3, precision 2 / 2
        let g = cs(vec![vec![0, 1, 2, 3]]);
        let p = cs(vec![vec![0, 1], vec![2, 3]]);
        let m = muc_prf(&p, &g, 4).unwrap();
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.precision, 1.0);
    }

    #[test]
    fn pair_counts_match_enumeration() {
        let mut rng = Rng::new(8);
        for _ in 0..500 {
            let n = rng.range(1, 14);
            let p = random_partition(&mut rng, n);
            let g = random_partition(&mut rng, n);
            let same = |c: &ClusterSet, a: usize, b: usize| c.clusters().iter().any(|k| k.contains(&a) && k.contains(&b));
            let (mut common, mut pp, mut gp) = (0, 0, 0);
            for a in 0..n {
                for b in a + 1..n {
                    let (x, y) = (same(&p, a, b), same(&g, a, b));
                    pp += x as usize;
                    gp += y as usize;
                    common += (x && y) as usize;
                }
            }
            let c = link_counts(&p, &g, n).unwrap();
            assert_eq!((c.common, c.predicted, c.gold), (common, pp, gp));
        }
    }

    /// MUC written out from its definition as minimum spanning-link counts:
    /// a key cluster of size s needs s - 1 links; the response keeps every
    /// link inside one of its clusters and must add one per extra piece.
    fn muc_reference(key: &ClusterSet, resp: &ClusterSet) -> (usize, usize) {
        let mut kept = 0;
        let mut needed = 0;
        for k in key.clusters() {
            needed += k.len() - 1;
            let mut pieces: Vec<Vec<usize>> = Vec::new();
            for &m in k {
                let home = resp.clusters().iter().position(|r| r.contains(&m));
                match home.and_then(|h| pieces.iter().position(|p| resp.clusters()[h].contains(&p[0]))) {
                    Some(pi) => pieces[pi].push(m),
                    None => pieces.push(vec![m]),
                }
            }
            kept += k.len() - pieces.len();
        }
        (kept, needed)
    }

    #[test]
    fn muc_matches_reference_transcription() {
        let mut rng = Rng::new(13);
        for _ in 0..200 {
            let n = rng.range(1, 12);
            let p = random_partition(&mut rng, n);
            let g = random_partition(&mut rng, n);
            let c = muc_counts(&p, &g, n).unwrap();
            assert_eq!((c.recall_num, c.recall_den), muc_reference(&g, &p));
            assert_eq!((c.precision_num, c.precision_den), muc_reference(&p, &g));
        }
    }

    #[test]
    fn bounded_and_symmetric() {
        let mut rng = Rng::new(21);
        for _ in 0..10_000 {
            let n = rng.range(1, 10);
            let p = random_partition(&mut rng, n);
            let g = random_partition(&mut rng, n);
            for (a, b) in [
                (link_prf(&p, &g, n).unwrap(), link_prf(&g, &p, n).unwrap()),
                (muc_prf(&p, &g, n).unwrap(), muc_prf(&g, &p, n).unwrap()),
            ] {
                for x in [a.precision, a.recall, a.f1] {
                    assert!((0.0..=1.0).contains(&x));
                }
                assert_eq!(a.precision, b.recall);
                assert_eq!(a.recall, b.precision);
                assert!((a.f1 - b.f1).abs() < 1e-15);
            }
        }
    }
}
