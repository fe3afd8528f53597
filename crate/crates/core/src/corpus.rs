//! Clip corpus: records, JSONL ingestion and validation.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingVector;
use crate::jsonfmt::to_json_line;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: embedding dimension {found} does not match corpus dimension {expected}")]
    DimMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: clip {id:?}: {message}")]
    InvalidRecord {
        line: usize,
        id: String,
        message: String,
    },
    #[error("empty corpus")]
    Empty,
    #[error("corpus failed validation: {0}")]
    Invalid(ValidationReport),
}

/// One source clip: caption, length and caption embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipRecord {
    pub id: String,
    pub caption: String,
    pub duration_s: f64,
    pub embedding: EmbeddingVector,
}

impl ClipRecord {
    pub fn new(
        id: impl Into<String>,
        caption: impl Into<String>,
        duration_s: f64,
        embedding: impl Into<EmbeddingVector>,
    ) -> Self {
        Self {
            id: id.into(),
            caption: caption.into(),
            duration_s,
            embedding: embedding.into(),
        }
    }

    /// Record-local invariant violations (everything except uniqueness and
    /// corpus-wide dimension).
    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.id.is_empty() {
            out.push("empty id".to_string());
        }
        if self.caption.trim().is_empty() {
            out.push("empty caption".to_string());
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            out.push(format!(
                "duration_s must be finite and positive, got {}",
                self.duration_s
            ));
        }
        if let Err(e) = self.embedding.check() {
            out.push(format!("embedding: {e}"));
        }
        out
    }
}

/// An ordered clip collection sharing one embedding dimension.
#[derive(Debug, Clone)]
pub struct ClipCorpus {
    clips: Vec<ClipRecord>,
    dim: usize,
    metadata: BTreeMap<String, serde_json::Value>,
    index: HashMap<String, usize>,
}

impl ClipCorpus {
    /// Builds a corpus, rejecting any invariant violation.
    pub fn new(
        clips: Vec<ClipRecord>,
        metadata: BTreeMap<String, serde_json::Value>,
    ) -> Result<Self, CorpusError> {
        if clips.is_empty() {
            return Err(CorpusError::Empty);
        }
        let corpus = Self::from_clips_unchecked(clips, metadata);
        let report = validate_corpus(&corpus);
        if report.ok {
            Ok(corpus)
        } else {
            Err(CorpusError::Invalid(report))
        }
    }

    /// Builds a corpus without checking invariants. Intended for inspecting
    /// suspect data with [`validate_corpus`].
    pub fn from_clips_unchecked(
        clips: Vec<ClipRecord>,
        metadata: BTreeMap<String, serde_json::Value>,
    ) -> Self {
        let dim = clips.first().map_or(0, |c| c.embedding.dim());
        let mut index = HashMap::with_capacity(clips.len());
        for (i, c) in clips.iter().enumerate() {
            index.entry(c.id.clone()).or_insert(i);
        }
        Self {
            clips,
            dim,
            metadata,
            index,
        }
    }

    pub fn clips(&self) -> &[ClipRecord] {
        &self.clips
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metadata(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.metadata
    }

    pub fn get(&self, id: &str) -> Option<&ClipRecord> {
        self.index.get(id).map(|&i| &self.clips[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<ValidationIssue>,
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self
            .issues
            .iter()
            .map(|i| format!("{:?}: {}", i.id, i.message))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Lists every invariant violation in `corpus`. Never fails.
pub fn validate_corpus(corpus: &ClipCorpus) -> ValidationReport {
    let mut issues = Vec::new();
    if corpus.clips.is_empty() {
        issues.push(ValidationIssue {
            id: String::new(),
            message: "empty corpus".to_string(),
        });
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, clip) in corpus.clips.iter().enumerate() {
        if let Some(first) = seen.insert(clip.id.as_str(), i) {
            issues.push(ValidationIssue {
                id: clip.id.clone(),
                message: format!("duplicate id (first seen at record {})", first + 1),
            });
            seen.insert(clip.id.as_str(), first);
        }
        for message in clip.problems() {
            issues.push(ValidationIssue {
                id: clip.id.clone(),
                message,
            });
        }
        if clip.embedding.dim() != corpus.dim {
            issues.push(ValidationIssue {
                id: clip.id.clone(),
                message: format!(
                    "embedding dimension {} does not match corpus dimension {}",
                    clip.embedding.dim(),
                    corpus.dim
                ),
            });
        }
    }
    ValidationReport {
        ok: issues.is_empty(),
        issues,
    }
}

#[derive(Deserialize)]
struct MetadataLine {
    metadata: BTreeMap<String, serde_json::Value>,
}

/// Reads a clip corpus from JSONL.
///
/// Blank lines are skipped. The first non-blank line may instead be a
/// `{"metadata": {...}}` object carrying free-form corpus metadata.
pub fn read_clip_corpus<R: BufRead>(reader: R) -> Result<ClipCorpus, CorpusError> {
    let mut clips: Vec<ClipRecord> = Vec::new();
    let mut metadata = BTreeMap::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut dim = None;
    let mut first_content = true;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        if std::mem::take(&mut first_content) {
            if let Ok(meta) = serde_json::from_str::<MetadataLine>(&line) {
                metadata = meta.metadata;
                continue;
            }
        }
        let record: ClipRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        if ids.contains_key(&record.id) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: record.id,
            });
        }
        let expected = *dim.get_or_insert(record.embedding.dim());
        if record.embedding.dim() != expected {
            return Err(CorpusError::DimMismatch {
                line: line_no,
                expected,
                found: record.embedding.dim(),
            });
        }
        if let Some(message) = record.problems().into_iter().next() {
            return Err(CorpusError::InvalidRecord {
                line: line_no,
                id: record.id,
                message,
            });
        }
        ids.insert(record.id.clone(), clips.len());
        clips.push(record);
    }
    if clips.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(ClipCorpus::from_clips_unchecked(clips, metadata))
}

pub fn load_clip_corpus(path: impl AsRef<Path>) -> Result<ClipCorpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_clip_corpus(BufReader::new(file))
}

/// Writes the corpus as JSONL, one clip per line, floats at 17 significant
/// digits. Metadata, when present, goes on a leading line.
pub fn write_clip_corpus<W: Write>(corpus: &ClipCorpus, mut out: W) -> io::Result<()> {
    if !corpus.metadata.is_empty() {
        let line = to_json_line(&serde_json::json!({ "metadata": corpus.metadata }))?;
        writeln!(out, "{line}")?;
    }
    for clip in &corpus.clips {
        writeln!(out, "{}", to_json_line(clip)?)?;
    }
    Ok(())
}
