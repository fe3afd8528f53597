//! File formats read and written by the commands.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tempocap_core::captionfmt::parse_caption;
use tempocap_core::jsonfmt::to_json_line;
use tempocap_core::{EmbeddingVector, SegmentedCaption};

use crate::CliError;

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub(crate) fn input_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

/// Non-blank lines of a JSONL file, each decoded as `T`, with 1-based line
/// numbers.
pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, CliError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| input_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push((i + 1, value));
    }
    Ok(out)
}

/// Where data goes: a file or standard output. The file is created on the
/// first write, so a command that fails early leaves nothing behind.
pub(crate) struct Output {
    path: Option<PathBuf>,
    inner: Option<Box<dyn Write>>,
}

impl Output {
    pub(crate) fn new(path: Option<&PathBuf>) -> Self {
        Self {
            path: path.cloned(),
            inner: None,
        }
    }

    fn writer(&mut self) -> Result<&mut Box<dyn Write>, CliError> {
        if self.inner.is_none() {
            let w: Box<dyn Write> = match &self.path {
                Some(p) => Box::new(BufWriter::new(
                    File::create(p).map_err(|e| input_error(p, e))?,
                )),
                None => Box::new(BufWriter::new(io::stdout().lock())),
            };
            self.inner = Some(w);
        }
        Ok(self.inner.as_mut().expect("just set"))
    }

    /// One compact JSON value plus a newline.
    pub(crate) fn json_line<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<(), CliError> {
        let line = to_json_line(value).map_err(|e| CliError::Input(e.to_string()))?;
        let w = self.writer()?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub(crate) fn text(&mut self, text: &str) -> Result<(), CliError> {
        self.writer()?.write_all(text.as_bytes())?;
        Ok(())
    }

    pub(crate) fn finish(mut self) -> Result<(), CliError> {
        self.writer()?.flush()?;
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CaptionRecord {
    id: String,
    caption: String,
}

/// `{id, caption}` JSONL; captions are parsed from the text format. Ids may
/// repeat.
pub(crate) fn read_captions(path: &Path) -> Result<Vec<(String, SegmentedCaption)>, CliError> {
    read_jsonl::<CaptionRecord>(path)?
        .into_iter()
        .map(|(line, r)| {
            let cap = parse_caption(&r.caption).map_err(|e| {
                CliError::Input(format!(
                    "{}:{line}: caption {:?}, {e}",
                    path.display(),
                    r.id
                ))
            })?;
            Ok((r.id, cap))
        })
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenEmbeddingRecord {
    id: String,
    tokens: Vec<String>,
    embeddings: Vec<Vec<f64>>,
}

/// `{id, tokens, embeddings}` JSONL keyed by id.
pub(crate) fn read_token_embeddings(
    path: &Path,
) -> Result<BTreeMap<String, Vec<EmbeddingVector>>, CliError> {
    let mut out = BTreeMap::new();
    for (line, r) in read_jsonl::<TokenEmbeddingRecord>(path)? {
        let at = |m: String| CliError::Input(format!("{}:{line}: {m}", path.display()));
        if r.tokens.len() != r.embeddings.len() {
            return Err(at(format!(
                "{} tokens but {} embeddings",
                r.tokens.len(),
                r.embeddings.len()
            )));
        }
        let vectors: Vec<EmbeddingVector> =
            r.embeddings.into_iter().map(EmbeddingVector::new).collect();
        if out.insert(r.id.clone(), vectors).is_some() {
            return Err(at(format!("duplicate id {:?}", r.id)));
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorRecord {
    id: String,
    embedding: Vec<f64>,
}

/// `{id, embedding}` JSONL keyed by id.
pub(crate) fn read_vectors(path: &Path) -> Result<BTreeMap<String, EmbeddingVector>, CliError> {
    let mut out = BTreeMap::new();
    for (line, r) in read_jsonl::<VectorRecord>(path)? {
        if out
            .insert(r.id.clone(), EmbeddingVector::new(r.embedding))
            .is_some()
        {
            return Err(CliError::Input(format!(
                "{}:{line}: duplicate id {:?}",
                path.display(),
                r.id
            )));
        }
    }
    Ok(out)
}

/// A JSON object mapping query ids to item ids.
pub(crate) fn read_truth(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    serde_json::from_str(&read_to_string(path)?).map_err(|e| input_error(path, e))
}

/// Sorted, de-duplicated, positive cut-offs.
pub(crate) fn normalize_ks(ks: &[usize]) -> Result<Vec<usize>, CliError> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(CliError::Usage(
            "--k values must be positive integers".into(),
        ));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    Ok(ks)
}

pub(crate) fn check_unique<'a>(
    what: &str,
    ids: impl IntoIterator<Item = &'a str>,
) -> Result<(), CliError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(CliError::Input(format!("duplicate {what} id {id:?}")));
        }
    }
    Ok(())
}
