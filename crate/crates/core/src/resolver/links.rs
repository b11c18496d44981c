use crate::error::{Error, Result};
use crate::resolver::AffinityMatrix;
use crate::textmodel::ClusterSet;

/// Selected antecedent per anaphor: `links[j] = Some(i)` with `i < j`, or
/// `None` when the dummy antecedent won.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorefLinkSet {
    links: Vec<Option<usize>>,
}

impl CorefLinkSet {
    pub fn new(links: Vec<Option<usize>>) -> Result<Self> {
        for (j, l) in links.iter().enumerate() {
            if let Some(i) = *l {
                if i >= j {
                    return Err(Error::Config(format!("link {j} -> {i} does not point backwards")));
                }
            }
        }
        Ok(Self { links })
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn antecedent(&self, anaphor: usize) -> Option<usize> {
        self.links.get(anaphor).copied().flatten()
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.links
    }

    /// Real links as `(antecedent, anaphor)` pairs.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.links.iter().enumerate().filter_map(|(j, l)| l.map(|i| (i, j)))
    }

    /// Summed attention of the chosen candidates, dummy choices included.
    pub fn objective(&self, a: &AffinityMatrix) -> f64 {
        self.links.iter().enumerate().map(|(j, l)| a.attn(j)[slot(*l)]).sum()
    }
}

fn slot(link: Option<usize>) -> usize {
    link.map_or(0, |i| i + 1)
}

fn from_slot(s: usize) -> Option<usize> {
    s.checked_sub(1)
}

/// Per-anaphor argmax. The at-most-one-antecedent constraint only couples
/// choices of the same anaphor, so this attains the global optimum. Ties go
/// to the dummy, then to the lowest antecedent index.
pub fn select_links(a: &AffinityMatrix) -> CorefLinkSet {
    let links = a
        .attn_rows()
        .iter()
        .map(|row| {
            let mut best = 0;
            for (s, &p) in row.iter().enumerate().skip(1) {
                if p > row[best] {
                    best = s;
                }
            }
            from_slot(best)
        })
        .collect();
    CorefLinkSet { links }
}

pub const BRUTE_FORCE_LIMIT: usize = 10;

/// Exhaustive search over every feasible assignment. Assignments are visited
/// in lexicographic candidate order and only a strictly better objective
/// replaces the incumbent, which reproduces the tie rule of [`select_links`].
pub fn brute_force_links(a: &AffinityMatrix) -> Result<CorefLinkSet> {
    let n = a.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::InstanceTooLarge { n, max: BRUTE_FORCE_LIMIT });
    }
    let mut choice = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let value: f64 = choice.iter().enumerate().map(|(j, &s)| a.attn(j)[s]).sum();
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, choice.clone()));
        }
        // odometer increment, last anaphor fastest
        let mut j = n;
        loop {
            if j == 0 {
                let (_, slots) = best.expect("at least one assignment exists");
                return Ok(CorefLinkSet {
                    links: slots.into_iter().map(from_slot).collect(),
                });
            }
            j -= 1;
            if choice[j] < j {
                choice[j] += 1;
                break;
            }
            choice[j] = 0;
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Connected components of the link graph over `n` mentions.
pub fn clusters_from_links(links: &CorefLinkSet, n: usize, include_singletons: bool) -> ClusterSet {
    let mut uf = UnionFind::new(n);
    for (i, j) in links.edges() {
        if i < n && j < n {
            uf.union(i, j);
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for m in 0..n {
        let root = uf.find(m);
        groups[root].push(m);
    }
    let clusters = groups
        .into_iter()
        .filter(|g| g.len() >= 2 || (include_singletons && g.len() == 1))
        .collect();
    ClusterSet::new(clusters).expect("components are disjoint")
}

#[cfg(test)]
mod tests {
    use std::collections::VecDeque;

    use super::*;
    use crate::numerics::Rng;

    pub(crate) fn random_instance(rng: &mut Rng, n: usize) -> AffinityMatrix {
        let coarse = rng.chance(0.5);
        let raw = (0..n)
            .map(|j| {
                std::iter::once(0.0)
                    .chain((0..j).map(|_| {
                        let x = rng.uniform(-3.0, 3.0);
                        // Coarse values create exact ties, including with the dummy.
                        if coarse {
                            x.round()
                        } else {
                            x
                        }
                    }))
                    .collect()
            })
            .collect();
        AffinityMatrix::from_raw(raw).unwrap()
    }

    #[test]
    fn empty_and_direct() {
        let empty = AffinityMatrix::from_raw(vec![]).unwrap();
        assert!(select_links(&empty).is_empty());
        assert!(brute_force_links(&empty).unwrap().is_empty());

        // attn_1 = [0.2, 0.8] ⇔ raw_1[0] = ln 4
        let a = AffinityMatrix::from_raw(vec![vec![0.0], vec![0.0, 4f64.ln()]]).unwrap();
        assert!((a.attn(1)[1] - 0.8).abs() < 1e-12);
        let l = select_links(&a);
        assert_eq!(l.as_slice(), &[None, Some(0)]);

        let one = AffinityMatrix::from_raw(vec![vec![0.0]]).unwrap();
        assert_eq!(brute_force_links(&one).unwrap().as_slice(), &[None]);
    }

    #[test]
    fn ties_prefer_dummy_then_lowest_index() {
        let a = AffinityMatrix::from_raw(vec![vec![0.0], vec![0.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap();
        assert_eq!(select_links(&a).as_slice(), &[None, None, Some(0)]);
        assert_eq!(brute_force_links(&a).unwrap(), select_links(&a));
    }

    #[test]
    fn agrees_with_exhaustive_search() {
        let mut rng = Rng::new(2024);
        for _ in 0..1000 {
            let n = rng.range(0, 7);
            let a = random_instance(&mut rng, n);
            let fast = select_links(&a);
            let slow = brute_force_links(&a).unwrap();
            assert_eq!(fast, slow);
            assert_eq!(fast.objective(&a), slow.objective(&a));
        }
    }

    #[test]
    fn too_large_for_brute_force() {
        let mut rng = Rng::new(1);
        let a = random_instance(&mut rng, 11);
        assert!(matches!(brute_force_links(&a), Err(Error::InstanceTooLarge { n: 11, .. })));
    }

    #[test]
    fn scaling_a_row_keeps_a_unique_real_argmax() {
        let mut rng = Rng::new(5);
        let mut checked = 0;
        for _ in 0..500 {
            let n = rng.range(2, 7);
            let a = random_instance(&mut rng, n);
            let links = select_links(&a);
            for j in 0..n {
                let row = a.raw(j);
                let Some(i) = links.antecedent(j) else { continue };
                let best = row[i + 1];
                if row.iter().filter(|&&x| x == best).count() != 1 {
                    continue;
                }
                let t = rng.uniform(1.01, 5.0);
                let mut raw: Vec<Vec<f64>> = (0..n).map(|k| a.raw(k).to_vec()).collect();
                raw[j].iter_mut().for_each(|x| *x *= t);
                let scaled = AffinityMatrix::from_raw(raw).unwrap();
                assert_eq!(select_links(&scaled).antecedent(j), Some(i));
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn cluster_basics() {
        let none = CorefLinkSet::new(vec![None, None, None]).unwrap();
        assert!(clusters_from_links(&none, 3, false).is_empty());
        assert_eq!(clusters_from_links(&none, 3, true).len(), 3);
        let chain = CorefLinkSet::new(vec![None, Some(0), Some(1)]).unwrap();
        assert_eq!(clusters_from_links(&chain, 3, false).clusters(), &[vec![0, 1, 2]]);
        assert!(CorefLinkSet::new(vec![Some(0)]).is_err());
    }

    #[test]
    fn components_match_bfs() {
        let mut rng = Rng::new(9);
        for _ in 0..500 {
            let n = rng.range(0, 15);
            let links: Vec<Option<usize>> = (0..n)
                .map(|j| {
                    if j > 0 && rng.chance(0.5) {
                        Some(rng.range(0, j - 1))
                    } else {
                        None
                    }
                })
                .collect();
            let set = CorefLinkSet::new(links.clone()).unwrap();
            let got = clusters_from_links(&set, n, true);

            let mut adj = vec![Vec::new(); n];
            for (j, l) in links.iter().enumerate() {
                if let Some(i) = *l {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
            let mut seen = vec![false; n];
            let mut comps = Vec::new();
            for s in 0..n {
                if seen[s] {
                    continue;
                }
                let mut comp = vec![];
                let mut q = VecDeque::from([s]);
                seen[s] = true;
                while let Some(x) = q.pop_front() {
                    comp.push(x);
                    for &y in &adj[x] {
                        if !seen[y] {
                            seen[y] = true;
                            q.push_back(y);
                        }
                    }
                }
                comps.push(comp);
            }
            assert_eq!(got, ClusterSet::new(comps).unwrap());
        }
    }
}
