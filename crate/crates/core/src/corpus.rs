//! Bundled golden-design corpus: loading and validation.
//!
//! A corpus directory holds `.v` files plus a `corpus.json` manifest:
//! `[{"file": "adder4.v", "top": "adder4", "family": "adder", "spec": "..."}]`.

use crate::errgen::GoldenEntry;
use crate::source::SourceFile;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusEntryMeta {
    pub file: String,
    pub top: String,
    pub family: String,
    pub spec: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus manifest: {0}")]
    Manifest(String),
    #[error("corpus module '{0}' is invalid: {1:?}")]
    InvalidModule(String, Vec<crate::source::Diagnostic>),
}

pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Vec<GoldenEntry>, CorpusError> {
    let dir = dir.as_ref();
    let manifest_text = std::fs::read_to_string(dir.join("corpus.json"))?;
    let metas: Vec<CorpusEntryMeta> =
        serde_json::from_str(&manifest_text).map_err(|e| CorpusError::Manifest(e.to_string()))?;
    let mut entries = Vec::with_capacity(metas.len());
    for meta in metas {
        let path = dir.join(&meta.file);
        let source = SourceFile::read(&path)?;
        entries.push(GoldenEntry { name: meta.top, family: meta.family, spec: meta.spec, source });
    }
    Ok(entries)
}

/// Parse and elaborate every corpus entry, failing on the first invalid one.
pub fn validate_corpus(entries: &[GoldenEntry]) -> Result<(), CorpusError> {
    for e in entries {
        crate::elaborate::parse_and_elaborate(&e.source)
            .map_err(|d| CorpusError::InvalidModule(e.name.clone(), d))?;
    }
    Ok(())
}

/// Workspace-relative corpus directory, for tests and local runs.
pub fn default_corpus_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}
