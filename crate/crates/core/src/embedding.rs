//! Dense embedding vectors and cosine similarity.
//!
//! Vectors are immutable once built. The L2 norm is computed once at
//! construction so repeated cosine evaluations against the same vector
//! (importance weights, score matrices) only pay for the dot product.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Dimension of the sentence embeddings the sampler was designed around
/// (MiniLM-L12). Any uniform dimension is accepted.
pub const DEFAULT_EMBEDDING_DIM: usize = 384;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("zero-norm embedding vector")]
    ZeroNorm,
    #[error("empty embedding vector")]
    Empty,
    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },
}

/// An embedding vector with its cached L2 norm.
///
/// Construction never fails so that corpora holding bad data can still be
/// built and inspected by validation; use [`EmbeddingVector::check`] to
/// enforce the invariants (non-empty, finite, nonzero norm).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        let norm = dot(&values, &values).sqrt();
        Self { values, norm }
    }

    /// Builds a vector and rejects empty, non-finite or zero-norm input.
    pub fn try_new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        let v = Self::new(values);
        v.check()?;
        Ok(v)
    }

    pub fn check(&self) -> Result<(), EmbeddingError> {
        if self.values.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if let Some(index) = self.values.iter().position(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite { index });
        }
        if self.norm == 0.0 || !self.norm.is_finite() {
            return Err(EmbeddingError::ZeroNorm);
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl From<Vec<f64>> for EmbeddingVector {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

impl Serialize for EmbeddingVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.values.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EmbeddingVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Vec::<f64>::deserialize(deserializer).map(Self::new)
    }
}

/// Dot product with a fixed summation order (four interleaved lanes, then
/// the tail), so results are reproducible for a given input.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        sum += a[i] * b[i];
    }
    sum
}

/// Cosine similarity `a·b / (‖a‖‖b‖)`, clamped to `[-1, 1]`.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    if a.norm == 0.0 || b.norm == 0.0 || !a.norm.is_finite() || !b.norm.is_finite() {
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok(cosine_unchecked(a, b))
}

/// Cosine for vectors already known to share a dimension and have a
/// nonzero finite norm.
#[inline]
pub(crate) fn cosine_unchecked(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    if std::ptr::eq(a, b) || a == b {
        return 1.0;
    }
    (dot(&a.values, &b.values) / (a.norm * b.norm)).clamp(-1.0, 1.0)
}
