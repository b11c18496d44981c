use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Document, MentionSpan};
use crate::error::{Error, Result};

/// On-disk record. Field order here is the serialized order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocRecord {
    id: String,
    tokens: Vec<String>,
    mentions: Vec<MentionSpan>,
    #[serde(default)]
    clusters: Vec<Vec<usize>>,
}

impl From<&Document> for DocRecord {
    fn from(doc: &Document) -> Self {
        DocRecord {
            id: doc.id.clone(),
            tokens: doc.tokens.clone(),
            mentions: doc.mentions.clone(),
            clusters: doc.gold_clusters.clusters().to_vec(),
        }
    }
}

/// Parses newline-delimited document records. Blank lines are skipped.
pub fn parse_documents(text: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        docs.push(Document::new(rec.id, rec.tokens, rec.mentions, rec.clusters)?);
    }
    Ok(docs)
}

pub fn read_documents(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_documents(&text)
}

/// One record per line, each terminated by `\n`.
pub fn render_documents(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&serde_json::to_string(&DocRecord::from(doc)).expect("records always serialize"));
        out.push('\n');
    }
    out
}

pub fn write_documents(docs: &[Document], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(render_documents(docs).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
