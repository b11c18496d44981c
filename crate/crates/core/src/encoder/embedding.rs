use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParamTensor, Rng};
use crate::textmodel::Document;

pub const UNKNOWN_TOKEN: &str = "<unk>";

/// Token → row lookup. Row 0 is always the unknown token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    pub table: ParamTensor,
}

impl EmbeddingTable {
    /// Vocabulary is deduplicated and sorted so construction order never matters.
    pub fn new(vocab: impl IntoIterator<Item = String>, dim: usize, rng: &mut Rng) -> Self {
        let sorted: BTreeSet<String> = vocab.into_iter().filter(|t| t != UNKNOWN_TOKEN).collect();
        let tokens: Vec<String> = std::iter::once(UNKNOWN_TOKEN.to_string()).chain(sorted).collect();
        let table = Matrix::xavier(tokens.len(), dim, rng);
        Self::from_parts(tokens, table).expect("freshly built table is consistent")
    }

    pub fn from_parts(tokens: Vec<String>, table: Matrix) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(UNKNOWN_TOKEN) || tokens.len() != table.rows() {
            return Err(Error::Format("embedding vocabulary does not match table".into()));
        }
        let index: HashMap<String, usize> = tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        if index.len() != tokens.len() {
            return Err(Error::Format("duplicate token in vocabulary".into()));
        }
        Ok(Self {
            tokens,
            index,
            table: ParamTensor::new("embedding", table),
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn dim(&self) -> usize {
        self.table.value.cols()
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn lookup(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.index_of(t)).collect()
    }

    pub fn rows(&self, ids: &[usize]) -> Matrix {
        let d = self.dim();
        let mut out = Matrix::zeros(ids.len(), d);
        for (i, &id) in ids.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.table.value.row(id));
        }
        out
    }

    pub(crate) fn accumulate(&mut self, ids: &[usize], d_e: &Matrix) {
        for (i, &id) in ids.iter().enumerate() {
            for (g, &x) in self.table.grad.row_mut(id).iter_mut().zip(d_e.row(i)) {
                *g += x;
            }
        }
    }
}

/// Row `i` of the result is the table row of token `i`.
pub fn embed(doc: &Document, table: &EmbeddingTable) -> Result<Matrix> {
    if doc.tokens.is_empty() {
        return Err(Error::Empty("embed: document has no tokens"));
    }
    Ok(table.rows(&table.lookup(&doc.tokens)))
}
