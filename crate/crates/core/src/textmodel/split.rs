use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Document;
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Disjoint train/dev/test document-id lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl CorpusSplit {
    /// Documents of each part, in split order.
    pub fn select<'a>(&self, docs: &'a [Document]) -> (Vec<&'a Document>, Vec<&'a Document>, Vec<&'a Document>) {
        let pick = |ids: &[String]| ids.iter().filter_map(|id| docs.iter().find(|d| &d.id == id)).collect::<Vec<_>>();
        (pick(&self.train), pick(&self.dev), pick(&self.test))
    }
}

/// Seeded shuffle, then `floor(n/10)` documents each for dev and test and the
/// remainder for train.
pub fn split_corpus(docs: &[Document], seed: u64) -> Result<CorpusSplit> {
    if docs.len() < 10 {
        return Err(Error::TooFewDocuments {
            needed: 10,
            got: docs.len(),
        });
    }
    let mut seen = BTreeSet::new();
    if let Some(dup) = docs.iter().find(|d| !seen.insert(d.id.as_str())) {
        return Err(Error::InvalidDocument {
            doc: dup.id.clone(),
            msg: "duplicate document id".into(),
        });
    }
    let mut ids: Vec<String> = docs.iter().map(|d| d.id.clone()).collect();
    Rng::new(seed).shuffle(&mut ids);
    let held_out = docs.len() / 10;
    let test = ids.split_off(ids.len() - held_out);
    let dev = ids.split_off(ids.len() - held_out);
    Ok(CorpusSplit { train: ids, dev, test })
}
