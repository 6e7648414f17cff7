//! Greedy-matching embedding similarity (BERTScore without IDF weighting or
//! baseline rescaling).

use std::collections::HashMap;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::EvalError;
use crate::llm::{ChatClient, ClientConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEmbedding {
    pub token: String,
    pub vector: Vec<f64>,
}

/// Source of per-token contextual embeddings.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<TokenEmbedding>, EvalError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn embed(&self, text: &str) -> Result<Vec<TokenEmbedding>, EvalError> {
        (**self).embed(text)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn embed(&self, text: &str) -> Result<Vec<TokenEmbedding>, EvalError> {
        (**self).embed(text)
    }
}

pub fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Word and punctuation tokens, case preserved.
pub fn simple_tokens(text: &str) -> Vec<&str> {
    static TOKEN: OnceLock<Regex> = OnceLock::new();
    TOKEN
        .get_or_init(|| Regex::new(r"\w+|[^\w\s]").unwrap())
        .find_iter(text)
        .map(|m| m.as_str())
        .collect()
}

/// Deterministic offline provider: each token maps to a unit vector drawn
/// from a generator seeded with the SHA-256 of the token.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    pub dimension: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dimension: 64 }
    }
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        HashEmbedder { dimension: dimension.max(1) }
    }

    pub fn vector(&self, token: &str) -> Vec<f64> {
        let digest = Sha256::digest(token.as_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(seed);
        let mut v: Vec<f64> = (0..self.dimension).map(|_| StandardNormal.sample(&mut rng)).collect();
        l2_normalize(&mut v);
        v
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<TokenEmbedding>, EvalError> {
        Ok(simple_tokens(text)
            .into_iter()
            .map(|t| TokenEmbedding { token: t.to_string(), vector: self.vector(t) })
            .collect())
    }
}

/// Fixed token → vector table; tokens are whitespace-separated and unknown
/// tokens are an error.
#[derive(Debug, Clone, Default)]
pub struct TableEmbedder {
    table: HashMap<String, Vec<f64>>,
}

impl TableEmbedder {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        TableEmbedder {
            table: entries
                .into_iter()
                .map(|(k, mut v)| {
                    l2_normalize(&mut v);
                    (k.into(), v)
                })
                .collect(),
        }
    }
}

impl EmbeddingProvider for TableEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<TokenEmbedding>, EvalError> {
        text.split_whitespace()
            .map(|t| {
                self.table
                    .get(t)
                    .map(|v| TokenEmbedding { token: t.to_string(), vector: v.clone() })
                    .ok_or_else(|| EvalError::Provider(format!("no embedding for token {t:?}")))
            })
            .collect()
    }
}

/// Remote provider: `POST {base_url}/embeddings` with `{model, input}`.
///
/// The response must carry per-token vectors as
/// `data[0].token_embeddings: [[f64]]`, optionally with `data[0].tokens`.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    client: ChatClient,
}

impl HttpEmbedder {
    pub fn new(cfg: ClientConfig) -> Result<Self, EvalError> {
        Ok(HttpEmbedder { client: ChatClient::new(cfg).map_err(|e| EvalError::Provider(e.to_string()))? })
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<TokenEmbedding>, EvalError> {
        let body = json!({ "model": self.client.config().model_name, "input": text });
        let reply = self
            .client
            .post_json("embeddings", &body)
            .map_err(|e| EvalError::Provider(e.to_string()))?;
        let item = &reply["data"][0];
        let vectors: Vec<Vec<f64>> = serde_json::from_value(item["token_embeddings"].clone())
            .map_err(|e| EvalError::Provider(format!("missing per-token vectors: {e}")))?;
        let tokens: Vec<String> = serde_json::from_value(item["tokens"].clone()).unwrap_or_default();
        Ok(vectors
            .into_iter()
            .enumerate()
            .map(|(i, mut vector)| {
                l2_normalize(&mut vector);
                TokenEmbedding { token: tokens.get(i).cloned().unwrap_or_default(), vector }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Scores already-embedded token sequences.
pub fn bertscore_embedded(candidate: &[TokenEmbedding], reference: &[TokenEmbedding]) -> Result<BertScore, EvalError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(EvalError::EmptyText);
    }
    let sim: Vec<Vec<f64>> = candidate
        .iter()
        .map(|c| reference.iter().map(|r| cosine(&c.vector, &r.vector)).collect())
        .collect();
    let precision = sim.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).sum::<f64>()
        / candidate.len() as f64;
    let recall = (0..reference.len())
        .map(|j| sim.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / reference.len() as f64;
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(BertScore { precision, recall, f1 })
}

pub fn bertscore(candidate: &str, reference: &str, provider: &dyn EmbeddingProvider) -> Result<BertScore, EvalError> {
    bertscore_embedded(&provider.embed(candidate)?, &provider.embed(reference)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_similarity() {
        let p = HashEmbedder::default();
        let s = bertscore("Acme Instruments Pte Ltd", "Acme Instruments Pte Ltd", &p).unwrap();
        assert!((s.f1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn partial_match() {
        let p = TableEmbedder::new([("x", vec![1.0, 0.0]), ("y", vec![0.0, 1.0])]);
        let s = bertscore("x", "x y", &p).unwrap();
        assert!((s.precision - 1.0).abs() < 1e-12);
        assert!((s.recall - 0.5).abs() < 1e-12);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal() {
        let p = TableEmbedder::new([("x", vec![1.0, 0.0]), ("y", vec![0.0, 1.0])]);
        let s = bertscore("x x", "y", &p).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_text() {
        let p = HashEmbedder::default();
        assert!(matches!(bertscore("", "a", &p), Err(EvalError::EmptyText)));
        assert!(matches!(bertscore("a", " \n\t ", &p), Err(EvalError::EmptyText)));
    }

    #[test]
    fn hash_vectors_unit_and_stable() {
        let p = HashEmbedder::new(16);
        let a = p.vector("Acme");
        assert_eq!(a.len(), 16);
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(a, p.vector("Acme"));
        assert_ne!(a, p.vector("acme"));
    }

    #[test]
    fn tokens() {
        assert_eq!(simple_tokens("Acme, Pte. Ltd"), ["Acme", ",", "Pte", ".", "Ltd"]);
    }
}
