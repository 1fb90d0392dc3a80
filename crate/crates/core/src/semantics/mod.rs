//! Template semantics: knowledge-triple templates, semantic rules, and the
//! learned rule predictor.

pub mod embedding;
pub mod encoder;
pub mod train;

pub use embedding::EmbeddingTable;
pub use encoder::{encode, featurize, EncoderModel, Encoded};
pub use train::{train, TrainConfig};

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregator::TemplateBank;
use crate::discovery::template::{Template, TemplateId};
use crate::error::{Error, Result};
use crate::relation::Relation;

/// The entity side of a knowledge-triple template: either a fixed value
/// (0-parameter) or a reference to a template slot (1-parameter).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KttEntity {
    #[serde(rename = "fixed")]
    Fixed(String),
    #[serde(rename = "slot")]
    FromSlot(u32),
}

/// A knowledge-triple template `<user, relation, entity>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Ktt {
    pub relation: Relation,
    #[serde(flatten)]
    pub entity: KttEntity,
}

impl Ktt {
    pub fn fixed(relation: Relation, value: impl Into<String>) -> Self {
        Ktt {
            relation,
            entity: KttEntity::Fixed(value.into()),
        }
    }

    pub fn from_slot(relation: Relation, slot: u32) -> Self {
        Ktt {
            relation,
            entity: KttEntity::FromSlot(slot),
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.entity {
            KttEntity::Fixed(v) if v.is_empty() => {
                Err(Error::InvalidInput("fixed KTT entity is empty".into()))
            }
            KttEntity::FromSlot(0) => {
                Err(Error::InvalidInput("KTT slot indices start at 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// The list of knowledge-triple templates one notification template
/// expresses. May be empty (non-personal template).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticRule {
    pub template_id: TemplateId,
    pub ktts: Vec<Ktt>,
}

impl SemanticRule {
    pub fn new(template_id: TemplateId, ktts: Vec<Ktt>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for ktt in &ktts {
            ktt.validate()?;
            if let KttEntity::FromSlot(slot) = ktt.entity {
                if !seen.insert((slot, ktt.relation)) {
                    return Err(Error::InvalidInput(format!(
                        "duplicate KTT for slot {slot} relation {}",
                        ktt.relation
                    )));
                }
            }
        }
        Ok(SemanticRule { template_id, ktts })
    }

    pub fn is_empty(&self) -> bool {
        self.ktts.is_empty()
    }

    /// Check slot references against the template the rule claims to
    /// describe.
    pub fn validate_against(&self, template: &Template) -> Result<()> {
        for ktt in &self.ktts {
            if let KttEntity::FromSlot(slot) = ktt.entity {
                if slot > template.n_slots {
                    return Err(Error::InvalidInput(format!(
                        "rule for {} references slot {slot} but template has {} slots",
                        self.template_id, template.n_slots
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The label inventory the classifier is trained over: 0-parameter labels
/// are (relation, fixed entity) pairs predicted per template, 1-parameter
/// labels are relations predicted per slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub zero_param: Vec<(Relation, String)>,
    pub one_param: Vec<Relation>,
}

impl Default for LabelSpace {
    fn default() -> Self {
        LabelSpace {
            zero_param: vec![
                (Relation::Status, "job_hunt".to_string()),
                (Relation::Status, "car_hunt".to_string()),
            ],
            one_param: vec![
                Relation::Name,
                Relation::Follows,
                Relation::IsFriendOf,
                Relation::LivesNear,
                Relation::TravelsTo,
                Relation::Purchases,
                Relation::WantsToBuy,
            ],
        }
    }
}

impl LabelSpace {
    pub fn validate(&self) -> Result<()> {
        if self.zero_param.is_empty() && self.one_param.is_empty() {
            return Err(Error::InvalidInput("empty label space".into()));
        }
        Ok(())
    }

    pub fn n_zero(&self) -> usize {
        self.zero_param.len()
    }

    pub fn n_one(&self) -> usize {
        self.one_param.len()
    }

    /// Indicator vector over zero-param labels for a rule.
    pub fn zero_targets(&self, rule: &SemanticRule) -> Vec<f64> {
        self.zero_param
            .iter()
            .map(|(rel, value)| {
                let hit = rule.ktts.iter().any(|k| {
                    k.relation == *rel && k.entity == KttEntity::Fixed(value.clone())
                });
                f64::from(hit)
            })
            .collect()
    }

    /// Indicator vector over one-param labels for one slot of a rule.
    pub fn one_targets(&self, rule: &SemanticRule, slot: u32) -> Vec<f64> {
        self.one_param
            .iter()
            .map(|rel| {
                let hit = rule
                    .ktts
                    .iter()
                    .any(|k| k.relation == *rel && k.entity == KttEntity::FromSlot(slot));
                f64::from(hit)
            })
            .collect()
    }

    /// True when every KTT of the rule is expressible in this space.
    pub fn covers(&self, rule: &SemanticRule) -> bool {
        rule.ktts.iter().all(|k| match &k.entity {
            KttEntity::Fixed(value) => self
                .zero_param
                .iter()
                .any(|(rel, v)| *rel == k.relation && v == value),
            KttEntity::FromSlot(_) => self.one_param.contains(&k.relation),
        })
    }
}

/// A template paired with its (manual or predicted) semantic rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTemplate {
    pub template: Template,
    pub rule: SemanticRule,
}

/// Load manually labeled rules and resolve them against the bank.
pub fn load_manual_rules(path: &Path, bank: &TemplateBank) -> Result<Vec<LabeledTemplate>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rule: SemanticRule = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        let rule = SemanticRule::new(rule.template_id, rule.ktts)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        let pooled = bank.get(rule.template_id).ok_or_else(|| Error::UnknownTemplate {
            template_id: rule.template_id.to_string(),
            line: line_no,
        })?;
        for ktt in &rule.ktts {
            if let KttEntity::FromSlot(slot) = ktt.entity {
                if slot > pooled.template.n_slots {
                    return Err(Error::SlotOutOfRange {
                        line: line_no,
                        slot,
                        template_id: rule.template_id.to_string(),
                        n_slots: pooled.template.n_slots,
                    });
                }
            }
        }
        out.push(LabeledTemplate {
            template: pooled.template.clone(),
            rule,
        });
    }
    Ok(out)
}

/// Write rules as JSON Lines.
pub fn save_rules<'a>(
    path: &Path,
    rules: impl IntoIterator<Item = &'a SemanticRule>,
) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for rule in rules {
        let line = serde_json::to_string(rule).expect("rules serialize");
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
