//! Templated corpus with deterministic agreement-based coreference.
//!
//! Each document introduces up to four entities, at most one per agreement
//! class (masculine, feminine, neuter, plural). An entity is introduced by
//! name and later referred to either by repeating the name or by the
//! pronoun of its class, so every pronoun has exactly one compatible entity
//! and that entity is always named earlier in the document.

use super::{Document, MentionSpan};
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Agreement {
    Masculine,
    Feminine,
    Neuter,
    Plural,
}

impl Agreement {
    pub const ALL: [Agreement; 4] = [Agreement::Masculine, Agreement::Feminine, Agreement::Neuter, Agreement::Plural];

    pub fn pronoun(self) -> &'static str {
        match self {
            Agreement::Masculine => "he",
            Agreement::Feminine => "she",
            Agreement::Neuter => "it",
            Agreement::Plural => "they",
        }
    }

    fn title(self) -> Option<&'static str> {
        match self {
            Agreement::Masculine => Some("mr"),
            Agreement::Feminine => Some("ms"),
            _ => None,
        }
    }

    fn base_names(self) -> &'static [&'static str] {
        match self {
            Agreement::Masculine => &["john", "peter", "david", "mark", "paul", "james", "tom", "henry"],
            Agreement::Feminine => &["mary", "anna", "susan", "linda", "emma", "kate", "laura", "julia"],
            Agreement::Neuter => &["acme", "globex", "initech", "umbrella", "hooli", "vandelay", "tyrell", "wonka"],
            Agreement::Plural => &["smiths", "rangers", "giants", "pirates", "wolves", "tigers", "eagles", "bears"],
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

const FILLERS: &[&str] = &[
    "the",
    "a",
    "said",
    "went",
    "to",
    "and",
    "saw",
    "met",
    "with",
    "because",
    "was",
    "happy",
    "city",
    "yesterday",
    "then",
    "after",
    "called",
    "home",
    "work",
    "market",
    "later",
    "again",
    "story",
    "about",
    "new",
    "plan",
    "today",
    "morning",
    "quickly",
    "river",
    "train",
    "letter",
    "old",
    "big",
    "small",
    "house",
    "door",
    "road",
    "meeting",
    "news",
];

/// The token inventory a corpus is drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVocab {
    names: [Vec<String>; 4],
    fillers: Vec<String>,
}

impl SyntheticVocab {
    /// Splits `vocab_size` tokens into 4 pronouns, 2 titles, names and fillers.
    pub fn new(vocab_size: usize) -> Self {
        let rest = vocab_size.saturating_sub(6);
        let per_class = (rest / 10).max(2);
        let n_fillers = rest.saturating_sub(4 * per_class).max(1);
        let names = Agreement::ALL.map(|a| expand(a.base_names(), per_class));
        Self {
            names,
            fillers: expand(FILLERS, n_fillers),
        }
    }

    pub fn names(&self, class: Agreement) -> &[String] {
        &self.names[class.index()]
    }

    pub fn fillers(&self) -> &[String] {
        &self.fillers
    }

    /// Every distinct token the generator can emit.
    pub fn tokens(&self) -> Vec<String> {
        let mut out: Vec<String> = Agreement::ALL.iter().map(|a| a.pronoun().to_string()).collect();
        out.extend(["mr".to_string(), "ms".to_string()]);
        out.extend(self.names.iter().flatten().cloned());
        out.extend(self.fillers.iter().cloned());
        out
    }
}

fn expand(base: &[&str], n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            let word = base[i % base.len()];
            match i / base.len() {
                0 => word.to_string(),
                round => format!("{word}{round}"),
            }
        })
        .collect()
}

struct Entity {
    class: Agreement,
    name: String,
    mentions: Vec<usize>,
}

/// Deterministic corpus of `n_docs` documents of at most `max_len` tokens.
pub fn generate_synthetic_corpus(n_docs: usize, seed: u64, vocab_size: usize, max_len: usize) -> Result<Vec<Document>> {
    if n_docs < 1 {
        return Err(Error::Config("n_docs must be at least 1".into()));
    }
    if vocab_size < 20 {
        return Err(Error::Config("vocab_size must be at least 20".into()));
    }
    if max_len < 8 {
        return Err(Error::Config("max_len must be at least 8".into()));
    }
    let vocab = SyntheticVocab::new(vocab_size);
    let mut rng = Rng::new(seed);
    let width = n_docs.to_string().len().max(4);
    (0..n_docs)
        .map(|i| generate_document(format!("doc{i:0width$}"), &vocab, max_len, &mut rng))
        .collect()
}

fn generate_document(id: String, vocab: &SyntheticVocab, max_len: usize, rng: &mut Rng) -> Result<Document> {
    let target_len = rng.range(max_len / 2, max_len).max(8);
    let mut classes = Agreement::ALL;
    rng.shuffle(&mut classes);
    let n_entities = rng.range(1, 4);
    let mut entities: Vec<Entity> = classes[..n_entities]
        .iter()
        .map(|&class| Entity {
            class,
            name: rng.pick(vocab.names(class)).clone(),
            mentions: Vec::new(),
        })
        .collect();

    let mut tokens: Vec<String> = Vec::new();
    let mut spans: Vec<MentionSpan> = Vec::new();
    let mut introduced = 0;
    loop {
        let pre = rng.range(0, 2);
        let post = rng.range(1, 3);
        let introduce = introduced < entities.len() && (introduced == 0 || rng.chance(0.4));
        let (entity, mention_tokens) = if introduce {
            let e = &entities[introduced];
            introduced += 1;
            (introduced - 1, name_tokens(e, rng))
        } else {
            let k = rng.range(0, introduced - 1);
            let e = &entities[k];
            let toks = if rng.chance(0.65) {
                vec![e.class.pronoun().to_string()]
            } else {
                name_tokens(e, rng)
            };
            (k, toks)
        };
        if tokens.len() + pre + mention_tokens.len() + post > target_len && !spans.is_empty() {
            break;
        }
        for _ in 0..pre {
            tokens.push(rng.pick(vocab.fillers()).clone());
        }
        let start = tokens.len();
        tokens.extend(mention_tokens);
        spans.push(MentionSpan::new(start, tokens.len() - 1));
        entities[entity].mentions.push(spans.len() - 1);
        for _ in 0..post {
            tokens.push(rng.pick(vocab.fillers()).clone());
        }
    }
    let clusters = entities
        .into_iter()
        .filter(|e| !e.mentions.is_empty())
        .map(|e| e.mentions)
        .collect();
    Document::new(id, tokens, spans, clusters)
}

fn name_tokens(entity: &Entity, rng: &mut Rng) -> Vec<String> {
    match entity.class.title() {
        Some(title) if rng.chance(0.3) => vec![title.to_string(), entity.name.clone()],
        _ => vec![entity.name.clone()],
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    fn is_pronoun(tok: &str) -> bool {
        Agreement::ALL.iter().any(|a| a.pronoun() == tok)
    }

    #[test]
    fn preconditions() {
        assert!(generate_synthetic_corpus(0, 1, 60, 40).is_err());
        assert!(generate_synthetic_corpus(1, 1, 19, 40).is_err());
        assert!(generate_synthetic_corpus(1, 1, 60, 7).is_err());
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate_synthetic_corpus(50, 7, 60, 40).unwrap();
        assert_eq!(a, generate_synthetic_corpus(50, 7, 60, 40).unwrap());
        assert_ne!(a, generate_synthetic_corpus(50, 8, 60, 40).unwrap());
    }

    #[test]
    fn vocab_size_is_respected() {
        for v in [20, 37, 60, 200] {
            let vocab = SyntheticVocab::new(v);
            let toks = vocab.tokens();
            let distinct: HashSet<_> = toks.iter().collect();
            assert_eq!(distinct.len(), toks.len());
            assert!(toks.len() <= v.max(20), "{v}: {}", toks.len());
        }
    }

    #[test]
    fn ten_thousand_documents_are_valid_and_resolvable() {
        let docs = generate_synthetic_corpus(10_000, 3, 60, 40).unwrap();
        for d in &docs {
            assert!(!d.mentions.is_empty());
            assert!(d.tokens.len() <= 40);
            // Re-validating through the checked constructor covers every invariant.
            let again = Document::new(
                d.id.clone(),
                d.tokens.clone(),
                d.mentions.clone(),
                d.gold_clusters.clusters().to_vec(),
            )
            .unwrap();
            assert_eq!(&again, d);
            let membership = d.gold_clusters.membership();
            assert_eq!(membership.len(), d.mentions.len());
            for (j, span) in d.mentions.iter().enumerate() {
                if span.width() == 1 && is_pronoun(&d.tokens[span.start]) {
                    let cluster = &d.gold_clusters.clusters()[membership[&j]];
                    assert!(cluster.iter().any(|&i| {
                        let s = d.mentions[i];
                        i < j && !(s.width() == 1 && is_pronoun(&d.tokens[s.start]))
                    }));
                }
            }
        }
    }
}
