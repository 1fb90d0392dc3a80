//! Tokenization of notification text.
//!
//! Notifications are compared, clustered and mined at word granularity, so
//! the tokenizer splits on whitespace, makes each ASCII punctuation mark a
//! standalone token, and collapses every maximal digit run into the number
//! placeholder. Case is preserved; hashing and frequency lookups case-fold
//! separately (see [`crate::hash`]).

use std::fmt;

use serde::{Deserialize, Serialize};

/// Placeholder substituted for every maximal run of ASCII digits.
///
/// The brackets are non-ASCII on purpose: the placeholder must survive
/// re-tokenization of rendered token text unchanged.
pub const NUM_TOKEN: &str = "\u{27e8}NUM\u{27e9}";

/// One token: a word, a standalone punctuation mark, or text containing the
/// number placeholder. Never empty, never contains whitespace.
pub type Token = String;

/// An ordered, immutable-by-convention sequence of tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(pub Vec<Token>);

impl TokenSeq {
    pub fn new(tokens: Vec<Token>) -> Self {
        TokenSeq(tokens)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Token] {
        &self.0
    }

    /// Render as text. `tokenize(seq.render())` returns `seq` unchanged.
    pub fn render(&self) -> String {
        self.0.join(" ")
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl From<Vec<String>> for TokenSeq {
    fn from(tokens: Vec<String>) -> Self {
        TokenSeq(tokens)
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a Token;
    type IntoIter = std::slice::Iter<'a, Token>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Split `text` into tokens.
///
/// Whitespace separates tokens, each ASCII punctuation character becomes its
/// own token, and maximal digit runs are replaced by [`NUM_TOKEN`] with any
/// alphabetic prefix/suffix kept attached ("CU1234" becomes "CU⟨NUM⟩").
/// Empty input yields an empty sequence.
pub fn tokenize(text: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    let mut current = String::new();

    let flush = |current: &mut String, tokens: &mut Vec<Token>| {
        if !current.is_empty() {
            tokens.push(elide_digits(current));
            current.clear();
        }
    };

    for ch in text.chars() {
        if ch.is_whitespace() {
            flush(&mut current, &mut tokens);
        } else if ch.is_ascii_punctuation() {
            flush(&mut current, &mut tokens);
            tokens.push(ch.to_string());
        } else {
            current.push(ch);
        }
    }
    flush(&mut current, &mut tokens);

    TokenSeq(tokens)
}

/// Replace each maximal ASCII digit run with [`NUM_TOKEN`].
fn elide_digits(word: &str) -> String {
    if !word.chars().any(|c| c.is_ascii_digit()) {
        return word.to_string();
    }
    let mut out = String::with_capacity(word.len());
    let mut in_run = false;
    for ch in word.chars() {
        if ch.is_ascii_digit() {
            if !in_run {
                out.push_str(NUM_TOKEN);
                in_run = true;
            }
        } else {
            out.push(ch);
            in_run = false;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s).0
    }

    #[test]
    fn splits_words_and_punctuation() {
        assert_eq!(
            toks("Hi Alice, your order iPhone X has been shipped"),
            vec!["Hi", "Alice", ",", "your", "order", "iPhone", "X", "has", "been", "shipped"]
        );
    }

    #[test]
    fn embedded_digit_run_keeps_affixes() {
        assert_eq!(
            toks("Flight CU1234 is delayed."),
            vec!["Flight", &format!("CU{NUM_TOKEN}"), "is", "delayed", "."]
        );
    }

    #[test]
    fn empty_input_yields_empty_seq() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t\n").is_empty());
    }

    #[test]
    fn standalone_number_becomes_placeholder() {
        assert_eq!(toks("42 items"), vec![NUM_TOKEN, "items"]);
        assert_eq!(toks("3.5"), vec![NUM_TOKEN, ".", NUM_TOKEN]);
    }

    #[test]
    fn multiple_digit_runs_in_one_word() {
        assert_eq!(toks("a1b2c"), vec![format!("a{NUM_TOKEN}b{NUM_TOKEN}c")]);
    }

    #[test]
    fn case_is_preserved() {
        assert_eq!(toks("iPhone X"), vec!["iPhone", "X"]);
    }

    #[test]
    fn idempotent_on_rendered_output() {
        for text in [
            "Dear Alice, your order [iPhone X] has been delivered!",
            "Flight CU1234 from Beijing to Tokyo is going to take off.",
            "[NEW MAIL] hello there",
            "@realDonaldTrump posted 3 photos",
        ] {
            let once = tokenize(text);
            let twice = tokenize(&once.render());
            assert_eq!(once, twice, "not idempotent for {text:?}");
        }
    }
}
