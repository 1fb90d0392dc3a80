//! Message templates: literal tokens interleaved with numbered parameter
//! slots.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::notification::AppId;
use crate::text::{Token, TokenSeq};

/// Stable content hash identifying a template. Two clients that mine the
/// same element sequence for the same app derive the same id independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TemplateId(pub u64);

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl std::str::FromStr for TemplateId {
    type Err = std::num::ParseIntError;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        u64::from_str_radix(s, 16).map(TemplateId)
    }
}

impl Serialize for TemplateId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TemplateId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// One template position: a fixed token or a parameter slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    #[serde(rename = "lit")]
    Literal(Token),
    #[serde(rename = "slot")]
    Slot(u32),
}

impl Element {
    pub fn is_slot(&self) -> bool {
        matches!(self, Element::Slot(_))
    }
}

/// A per-app template. Slot indices run 1..=n_slots left to right, no two
/// slots are adjacent, and at least one element is a literal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Template {
    pub template_id: TemplateId,
    pub app_id: AppId,
    pub elements: Vec<Element>,
    pub n_slots: u32,
}

impl Template {
    /// Validate `elements` and derive the content id.
    pub fn new(app_id: AppId, elements: Vec<Element>) -> Result<Self> {
        let mut n_slots = 0u32;
        let mut prev_was_slot = false;
        let mut has_literal = false;
        for el in &elements {
            match el {
                Element::Slot(idx) => {
                    if prev_was_slot {
                        return Err(Error::InvalidInput("adjacent slots in template".into()));
                    }
                    n_slots += 1;
                    if *idx != n_slots {
                        return Err(Error::InvalidInput(format!(
                            "slot index {idx} out of order, expected {n_slots}"
                        )));
                    }
                    prev_was_slot = true;
                }
                Element::Literal(tok) => {
                    if tok.is_empty() {
                        return Err(Error::InvalidInput("empty literal token".into()));
                    }
                    has_literal = true;
                    prev_was_slot = false;
                }
            }
        }
        if !has_literal {
            return Err(Error::InvalidInput("template has no literal".into()));
        }
        let template_id = content_id(&app_id, &elements);
        Ok(Template {
            template_id,
            app_id,
            elements,
            n_slots,
        })
    }

    /// Count of literal elements (words and punctuation alike).
    pub fn literal_token_count(&self) -> usize {
        self.elements.iter().filter(|e| !e.is_slot()).count()
    }

    /// Count of literal *words*: standalone punctuation marks are excluded.
    pub fn literal_word_count(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| match e {
                Element::Literal(tok) => !is_punctuation_token(tok),
                Element::Slot(_) => false,
            })
            .count()
    }

    /// Substitute `bindings[i]` for slot i+1 and flatten to a token
    /// sequence.
    pub fn instantiate(&self, bindings: &[Vec<Token>]) -> Result<TokenSeq> {
        let mut out = Vec::new();
        for el in &self.elements {
            match el {
                Element::Literal(tok) => out.push(tok.clone()),
                Element::Slot(idx) => {
                    let filler = bindings.get(*idx as usize - 1).ok_or_else(|| {
                        Error::InvalidInput(format!("no binding for slot {idx}"))
                    })?;
                    out.extend(filler.iter().cloned());
                }
            }
        }
        Ok(TokenSeq::new(out))
    }

    /// Human-readable form, e.g. `Dear ⟨slot1⟩ , your order ⟨slot2⟩ ...`.
    pub fn render(&self) -> String {
        self.elements
            .iter()
            .map(|el| match el {
                Element::Literal(tok) => tok.clone(),
                Element::Slot(idx) => format!("\u{27e8}slot{idx}\u{27e9}"),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Structural identity: same app and same element sequence.
    pub fn same_structure(&self, other: &Template) -> bool {
        self.app_id == other.app_id && self.elements == other.elements
    }
}

/// True for tokens that are pure ASCII punctuation (the tokenizer emits
/// them as single characters).
pub fn is_punctuation_token(tok: &str) -> bool {
    !tok.is_empty() && tok.chars().all(|c| c.is_ascii_punctuation())
}

/// Merge runs of adjacent slots and renumber left to right. Used by mining
/// and refinement before validation.
pub fn normalize_elements(elements: Vec<Element>) -> Vec<Element> {
    let mut out: Vec<Element> = Vec::with_capacity(elements.len());
    for el in elements {
        match el {
            Element::Slot(_) => {
                if !matches!(out.last(), Some(Element::Slot(_))) {
                    out.push(Element::Slot(0));
                }
            }
            lit => out.push(lit),
        }
    }
    let mut next = 0u32;
    for el in &mut out {
        if let Element::Slot(idx) = el {
            next += 1;
            *idx = next;
        }
    }
    out
}

fn content_id(app_id: &AppId, elements: &[Element]) -> TemplateId {
    let mut hasher = Sha256::new();
    hasher.update(b"t");
    hasher.update((app_id.0.len() as u64).to_le_bytes());
    hasher.update(app_id.0.as_bytes());
    for el in elements {
        match el {
            Element::Literal(tok) => {
                hasher.update([0u8]);
                hasher.update((tok.len() as u64).to_le_bytes());
                hasher.update(tok.as_bytes());
            }
            Element::Slot(idx) => {
                hasher.update([1u8]);
                hasher.update(idx.to_le_bytes());
            }
        }
    }
    let digest = hasher.finalize();
    TemplateId(u64::from_le_bytes(
        digest[..8].try_into().expect("digest is 32 bytes"),
    ))
}

// Deserialization re-validates so template files cannot smuggle malformed
// structures into the bank.
impl<'de> Deserialize<'de> for Template {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            template_id: TemplateId,
            app_id: AppId,
            elements: Vec<Element>,
            #[allow(dead_code)]
            n_slots: u32,
        }
        let raw = Raw::deserialize(d)?;
        let rebuilt = Template::new(raw.app_id, raw.elements).map_err(serde::de::Error::custom)?;
        if rebuilt.template_id != raw.template_id {
            return Err(serde::de::Error::custom(format!(
                "template_id {} does not match content (expected {})",
                raw.template_id, rebuilt.template_id
            )));
        }
        Ok(rebuilt)
    }
}

/// Convenience constructor used by generators and tests: parses a pattern
/// where `{}` marks a slot, e.g. `"Hi {} , your order {} has been shipped"`.
pub fn template_from_pattern(app_id: impl Into<AppId>, pattern: &str) -> Result<Template> {
    let mut elements = Vec::new();
    for part in pattern.split_whitespace() {
        if part == "{}" {
            elements.push(Element::Slot(0));
        } else {
            for tok in crate::text::tokenize(part).0 {
                elements.push(Element::Literal(tok));
            }
        }
    }
    Template::new(app_id.into(), normalize_elements(elements))
}
