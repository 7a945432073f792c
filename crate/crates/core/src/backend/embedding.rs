use sha2::{Digest, Sha256};
use thiserror::Error;

use super::BackendError;

pub const DEFAULT_DIMENSION: usize = 768;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimilarityError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroNorm,
}

/// A finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, BackendError> {
        if values.is_empty() {
            return Err(BackendError::Decode("embedding has no components".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BackendError::Decode(
                "embedding has non-finite components".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * alpha).collect(),
        }
    }

    /// Component-wise mean of two vectors of equal dimension.
    pub fn mean(a: &Self, b: &Self) -> Result<Self, SimilarityError> {
        if a.dimension() != b.dimension() {
            return Err(SimilarityError::DimensionMismatch(
                a.dimension(),
                b.dimension(),
            ));
        }
        Ok(Self {
            values: a
                .values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| (x + y) / 2.0)
                .collect(),
        })
    }
}

/// `dot(u, v) / (|u| |v|)`, clamped into [-1, 1] against rounding.
pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, SimilarityError> {
    if u.dimension() != v.dimension() {
        return Err(SimilarityError::DimensionMismatch(
            u.dimension(),
            v.dimension(),
        ));
    }
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 {
        return Err(SimilarityError::ZeroNorm);
    }
    let dot: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError>;

    /// Identifies the provider configuration; part of embedding cache keys.
    fn id(&self) -> String;
}

/// Deterministic offline embedder: SHA-256 in counter mode seeded by the
/// text, mapped to [-1, 1) and normalized to unit length. Equal texts give
/// equal vectors; it carries no semantic signal.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIMENSION)
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        if text.is_empty() {
            return Err(BackendError::EmptyInput);
        }
        let mut values = Vec::with_capacity(self.dimension);
        let mut block = 0u32;
        while values.len() < self.dimension {
            let mut hasher = Sha256::new();
            hasher.update(b"famlens-hash-embed");
            hasher.update(block.to_le_bytes());
            hasher.update(text.as_bytes());
            let digest = hasher.finalize();
            for chunk in digest.chunks_exact(4) {
                if values.len() == self.dimension {
                    break;
                }
                let word = u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
                values.push(word as f64 / 2f64.powi(31) - 1.0);
            }
            block += 1;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        EmbeddingVector::new(values)
    }

    fn id(&self) -> String {
        format!("hash-{}", self.dimension)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn cosine_identities() {
        let u = v(&[0.3, -1.2, 4.0]);
        assert!((cosine_similarity(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(),
            0.0
        );
        assert!((cosine_similarity(&u, &u.scaled(-1.0)).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(
            cosine_similarity(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(SimilarityError::DimensionMismatch(1, 2))
        );
        assert_eq!(
            cosine_similarity(&v(&[0.0, 0.0]), &v(&[1.0, 2.0])),
            Err(SimilarityError::ZeroNorm)
        );
        assert!(EmbeddingVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn hash_embedder_is_deterministic_unit_and_sized() {
        let e = HashEmbedder::default();
        let a = e.embed("こんにちは").unwrap();
        assert_eq!(a, e.embed("こんにちは").unwrap());
        assert_eq!(a.dimension(), 768);
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert!(a.values().iter().all(|x| x.is_finite()));
        assert_eq!(e.embed(""), Err(BackendError::EmptyInput));
        assert_eq!(HashEmbedder::new(5).embed("x").unwrap().dimension(), 5);
    }

    #[test]
    fn distinct_texts_give_distinct_vectors() {
        let e = HashEmbedder::default();
        let corpus = [
            "psychology",
            "education",
            "social work",
            "caregiving",
            "a",
            "b",
            "ab",
            "ba",
            "child report",
            "adult report",
            "親",
            "子",
        ];
        let vectors: Vec<_> = corpus.iter().map(|t| e.embed(t).unwrap()).collect();
        for i in 0..vectors.len() {
            for j in i + 1..vectors.len() {
                assert_ne!(vectors[i], vectors[j], "{} vs {}", corpus[i], corpus[j]);
            }
        }
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            a in proptest::collection::vec(-10.0f64..10.0, 8),
            b in proptest::collection::vec(-10.0f64..10.0, 8),
            alpha in 0.001f64..1000.0,
        ) {
            let u = v(&a);
            let w = v(&b);
            prop_assume!(u.norm() > 1e-6 && w.norm() > 1e-6);
            let c = cosine_similarity(&u, &w).unwrap();
            prop_assert!((-1.0..=1.0).contains(&c));
            prop_assert!((c - cosine_similarity(&w, &u).unwrap()).abs() < 1e-12);
            prop_assert!((c - cosine_similarity(&u.scaled(alpha), &w).unwrap()).abs() < 1e-9);
        }
    }
}
