//! Salted word and sentence hashing.
//!
//! Words and whole sentences are hashed on the client before upload so the
//! server can count contributors without seeing text. Hashes are computed
//! over case-folded tokens with a corpus-wide salt, so identical tokens on
//! different clients collide (that is the point) while cross-run lookup
//! tables do not transfer.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::text::TokenSeq;

/// Corpus-wide hashing salt, fixed for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Salt(pub u64);

/// 64-bit salted hash of one case-folded word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordHash(pub u64);

/// 64-bit salted hash of a full case-folded token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SentenceHash(pub u64);

const DOMAIN_WORD: u8 = b'w';
const DOMAIN_SENTENCE: u8 = b's';

fn digest64(domain: u8, salt: Salt, payload: &[u8]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update([domain]);
    hasher.update(salt.0.to_le_bytes());
    hasher.update(payload);
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Hash one token. Case-folds first, so `hash_word("Alice", s) ==
/// hash_word("alice", s)`.
pub fn hash_word(token: &str, salt: Salt) -> WordHash {
    WordHash(digest64(DOMAIN_WORD, salt, token.to_lowercase().as_bytes()))
}

/// Hash a full token sequence. Tokens are case-folded and joined with an
/// unprintable separator so distinct sequences cannot alias by
/// concatenation.
pub fn hash_sentence(tokens: &TokenSeq, salt: Salt) -> SentenceHash {
    let mut payload = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            payload.push(0x1f);
        }
        payload.extend_from_slice(tok.to_lowercase().as_bytes());
    }
    SentenceHash(digest64(DOMAIN_SENTENCE, salt, &payload))
}

// Hashes travel through JSON as fixed-width hex strings.
macro_rules! hex_serde {
    ($ty:ident) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:016x}", self.0)
            }
        }

        impl std::str::FromStr for $ty {
            type Err = std::num::ParseIntError;
            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                u64::from_str_radix(s, 16).map($ty)
            }
        }

        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(
                &self,
                serializer: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(
                deserializer: D,
            ) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_serde!(WordHash);
hex_serde!(SentenceHash);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    const SALT: Salt = Salt(0x5eed);

    #[test]
    fn case_folded_tokens_hash_equally() {
        assert_eq!(hash_word("Alice", SALT), hash_word("alice", SALT));
        assert_eq!(hash_word("ALICE", SALT), hash_word("alice", SALT));
    }

    #[test]
    fn distinct_tokens_hash_differently() {
        // Spot-check over a fixed vocabulary; a collision here would mean a
        // broken digest, not bad luck.
        let vocab = [
            "Alice", "Alicia", "order", "orders", "shipped", "delivered", "flight", "fight",
            "Tokyo", "Kyoto", "a", "b",
        ];
        for (i, a) in vocab.iter().enumerate() {
            for b in &vocab[i + 1..] {
                assert_ne!(hash_word(a, SALT), hash_word(b, SALT), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn same_input_same_hash_across_calls() {
        // Simulates two clients hashing independently in one run.
        assert_eq!(hash_word("battery", SALT), hash_word("battery", SALT));
        let seq = tokenize("Low battery");
        assert_eq!(hash_sentence(&seq, SALT), hash_sentence(&seq, SALT));
    }

    #[test]
    fn salt_changes_hashes() {
        assert_ne!(hash_word("Alice", Salt(1)), hash_word("Alice", Salt(2)));
    }

    #[test]
    fn sentence_hash_ignores_case_but_not_order() {
        let a = tokenize("Best sales!");
        let b = tokenize("best SALES!");
        assert_eq!(hash_sentence(&a, SALT), hash_sentence(&b, SALT));
        let c = tokenize("sales! Best");
        assert_ne!(hash_sentence(&a, SALT), hash_sentence(&c, SALT));
    }

    #[test]
    fn word_and_sentence_domains_are_separate() {
        let seq = tokenize("battery");
        assert_ne!(hash_word("battery", SALT).0, hash_sentence(&seq, SALT).0);
    }

    #[test]
    fn hex_round_trip() {
        let h = hash_word("Alice", SALT);
        let s = serde_json::to_string(&h).unwrap();
        let back: WordHash = serde_json::from_str(&s).unwrap();
        assert_eq!(h, back);
    }
}
