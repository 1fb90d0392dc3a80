//! Word embeddings with a deterministic subword fallback.
//!
//! Known words come from a loadable table ("word v1 .. vd" text lines, so
//! pretrained vectors drop in unchanged). Unknown words fall back to the
//! mean of hashed character-trigram vectors, which gives every possible
//! token a stable embedding and keeps near-identical words near each
//! other.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dim: usize,
    /// Case-folded word -> vector.
    vectors: BTreeMap<String, Vec<f64>>,
    /// Seed mixed into trigram hashing so fallback vectors are stable per
    /// table.
    fallback_seed: u64,
}

impl EmbeddingTable {
    /// A table with no known words: every token takes the trigram
    /// fallback.
    pub fn fallback_only(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: BTreeMap::new(),
            fallback_seed: 0x7261_6d62_6c65_u64,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "vector for {word:?} has dimension {} (table is {})",
                vector.len(),
                self.dim
            )));
        }
        self.vectors.insert(word.to_lowercase(), vector);
        Ok(())
    }

    /// Embedding for a token: table lookup on the case-folded form, or the
    /// trigram fallback.
    pub fn lookup(&self, token: &str) -> Array1<f64> {
        let folded = token.to_lowercase();
        if let Some(v) = self.vectors.get(&folded) {
            return Array1::from_vec(v.clone());
        }
        self.fallback(&folded)
    }

    fn fallback(&self, folded: &str) -> Array1<f64> {
        // Boundary-marked trigrams, as in subword embedding models.
        let marked: Vec<char> = std::iter::once('<')
            .chain(folded.chars())
            .chain(std::iter::once('>'))
            .collect();
        let mut sum = Array1::<f64>::zeros(self.dim);
        let mut count = 0usize;
        for window in marked.windows(3) {
            let trigram: String = window.iter().collect();
            sum += &trigram_vector(&trigram, self.fallback_seed, self.dim);
            count += 1;
        }
        if count == 0 {
            // Tokens are non-empty, so the marked form has at least one
            // trigram; keep a defined result anyway.
            return trigram_vector("<>", self.fallback_seed, self.dim);
        }
        sum / count as f64
    }

    /// Load "word v1 .. vd" lines. The dimension comes from the first
    /// line; later lines must agree.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table: Option<EmbeddingTable> = None;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts
                .next()
                .ok_or_else(|| Error::parse(path, line_no, "empty embedding line"))?;
            let values: Vec<f64> = parts
                .map(|p| {
                    p.parse::<f64>()
                        .map_err(|e| Error::parse(path, line_no, format!("bad value {p:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if values.is_empty() {
                return Err(Error::parse(path, line_no, "embedding line has no values"));
            }
            let table = table.get_or_insert_with(|| EmbeddingTable::fallback_only(values.len()));
            if values.len() != table.dim {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("dimension {} does not match first line {}", values.len(), table.dim),
                ));
            }
            table.vectors.insert(word.to_lowercase(), values);
        }
        table.ok_or_else(|| Error::parse(path, 1, "embedding file has no vectors"))
    }
}

/// Deterministic pseudo-random unit-scale vector for one trigram.
fn trigram_vector(trigram: &str, seed: u64, dim: usize) -> Array1<f64> {
    let mut hasher = Sha256::new();
    hasher.update(b"g");
    hasher.update(seed.to_le_bytes());
    hasher.update(trigram.as_bytes());
    let digest = hasher.finalize();
    let mut state = u64::from_le_bytes(digest[..8].try_into().expect("digest long enough"));
    let scale = 1.0 / (dim as f64).sqrt();
    let mut out = Array1::<f64>::zeros(dim);
    for v in out.iter_mut() {
        state = splitmix64(state);
        // Map to (-scale, scale).
        let unit = (state >> 11) as f64 / (1u64 << 53) as f64;
        *v = (2.0 * unit - 1.0) * scale;
    }
    out
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_is_deterministic_and_case_folded() {
        let table = EmbeddingTable::fallback_only(16);
        let a = table.lookup("Shipped");
        let b = table.lookup("shipped");
        assert_eq!(a, b);
        assert_eq!(a, table.lookup("Shipped"));
    }

    #[test]
    fn close_words_differ_but_share_structure() {
        let table = EmbeddingTable::fallback_only(32);
        let a = table.lookup("shipped");
        let b = table.lookup("shippes");
        assert_ne!(a, b);
        // Single character tokens still embed.
        let c = table.lookup("x");
        assert_eq!(c.len(), 32);
    }

    #[test]
    fn table_entries_override_fallback() {
        let mut table = EmbeddingTable::fallback_only(4);
        table.insert("Order", vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(
            table.lookup("ORDER"),
            Array1::from_vec(vec![1.0, 2.0, 3.0, 4.0])
        );
        assert!(table.insert("bad", vec![1.0]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        std::fs::write(&path, "order 0.5 -1.25 3\nShipped 1 2 3.5\n").unwrap();
        let table = EmbeddingTable::load(&path).unwrap();
        assert_eq!(table.dim(), 3);
        assert_eq!(table.len(), 2);
        assert_eq!(
            table.lookup("shipped"),
            Array1::from_vec(vec![1.0, 2.0, 3.5])
        );

        std::fs::write(&path, "order 0.5 1.0\nbad 1 2 3\n").unwrap();
        assert!(EmbeddingTable::load(&path).is_err());
    }
}
