//! Template matching, rule application, and the per-user triple store.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregator::TemplateBank;
use crate::discovery::template::{Element, Template, TemplateId};
use crate::error::{Error, Result};
use crate::ingest::Corpus;
use crate::notification::{Notification, UserId};
use crate::relation::Relation;
use crate::semantics::{KttEntity, SemanticRule};
use crate::text::Token;

/// Maximum tokens one slot may consume while matching.
pub const DEFAULT_MAX_SLOT_TOKENS: usize = 10;

/// A successful alignment of a notification against a template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match {
    pub template_id: TemplateId,
    /// Slot index -> bound tokens (each slot binds 1..=l_max tokens).
    pub bindings: BTreeMap<u32, Vec<Token>>,
}

/// Try to align `tokens` against one template: literals must match exactly
/// in order, each slot consumes 1..=l_max tokens, and the whole sequence
/// must be covered. Among valid alignments slots bind leftmost-shortest.
fn align(template: &Template, tokens: &[Token], l_max: usize) -> Option<BTreeMap<u32, Vec<Token>>> {
    let elements = &template.elements;
    let n = tokens.len();
    let m = elements.len();

    // feasible[e][p]: elements[e..] can consume exactly tokens[p..].
    let mut feasible = vec![vec![false; n + 1]; m + 1];
    feasible[m][n] = true;
    for e in (0..m).rev() {
        match &elements[e] {
            Element::Literal(lit) => {
                for p in 0..n {
                    feasible[e][p] = tokens[p] == *lit && feasible[e + 1][p + 1];
                }
            }
            Element::Slot(_) => {
                for p in 0..n {
                    let max_len = l_max.min(n - p);
                    feasible[e][p] = (1..=max_len).any(|len| feasible[e + 1][p + len]);
                }
            }
        }
    }
    if !feasible[0][0] {
        return None;
    }

    // Walk forward taking the shortest feasible binding at each slot.
    let mut bindings = BTreeMap::new();
    let mut p = 0;
    for (e, el) in elements.iter().enumerate() {
        match el {
            Element::Literal(_) => p += 1,
            Element::Slot(idx) => {
                let len = (1..=l_max.min(n - p))
                    .find(|len| feasible[e + 1][p + len])
                    .expect("feasible alignment exists");
                bindings.insert(*idx, tokens[p..p + len].to_vec());
                p += len;
            }
        }
    }
    debug_assert_eq!(p, n);
    Some(bindings)
}

/// Match a notification against the bank. Only templates of the
/// notification's app are considered; among matches, the template with the
/// most literal tokens wins, ties broken by fewest slots, then lowest
/// template id.
pub fn match_template(
    notification: &Notification,
    bank: &TemplateBank,
    l_max: usize,
) -> Option<Match> {
    let mut best: Option<(&Template, BTreeMap<u32, Vec<Token>>)> = None;
    for pooled in bank.templates_for_app(&notification.app_id) {
        let template = &pooled.template;
        let Some(bindings) = align(template, notification.tokens.as_slice(), l_max) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((current, _)) => {
                let a = (
                    template.literal_token_count(),
                    std::cmp::Reverse(template.n_slots),
                    std::cmp::Reverse(template.template_id),
                );
                let b = (
                    current.literal_token_count(),
                    std::cmp::Reverse(current.n_slots),
                    std::cmp::Reverse(current.template_id),
                );
                a > b
            }
        };
        if better {
            best = Some((template, bindings));
        }
    }
    best.map(|(template, bindings)| {
        debug_assert_eq!(
            template
                .instantiate(
                    &(1..=template.n_slots)
                        .map(|s| bindings.get(&s).cloned().unwrap_or_default())
                        .collect::<Vec<_>>()
                )
                .expect("bindings cover slots"),
            notification.tokens,
            "match must regenerate the notification"
        );
        Match {
            template_id: template.template_id,
            bindings,
        }
    })
}

/// One extracted `<user, relation, entity>` fact with provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeTriple {
    pub user_id: UserId,
    pub relation: Relation,
    pub entity: String,
    pub template_id: TemplateId,
    pub timestamp: i64,
}

impl KnowledgeTriple {
    /// Deduplication key: provenance is ignored.
    pub fn key(&self) -> (UserId, Relation, String) {
        (self.user_id.clone(), self.relation, self.entity.clone())
    }
}

/// Fill a rule's knowledge-triple templates from a match.
pub fn apply_rule(
    m: &Match,
    rule: &SemanticRule,
    user_id: &UserId,
    timestamp: i64,
) -> Result<Vec<KnowledgeTriple>> {
    if rule.template_id != m.template_id {
        return Err(Error::InvalidInput(format!(
            "rule is for template {} but match is against {}",
            rule.template_id, m.template_id
        )));
    }
    rule.ktts
        .iter()
        .map(|ktt| {
            let entity = match &ktt.entity {
                KttEntity::Fixed(value) => value.clone(),
                KttEntity::FromSlot(slot) => m
                    .bindings
                    .get(slot)
                    .map(|toks| toks.join(" "))
                    .ok_or_else(|| {
                        Error::InvalidInput(format!("rule references unbound slot {slot}"))
                    })?,
            };
            Ok(KnowledgeTriple {
                user_id: user_id.clone(),
                relation: ktt.relation,
                entity,
                template_id: m.template_id,
                timestamp,
            })
        })
        .collect()
}

/// Append-only triple log with an in-memory index. Deduplicates on
/// (user, relation, entity); queries return stable (relation, entity)
/// order.
pub struct KnowledgeBase {
    triples: Vec<KnowledgeTriple>,
    seen: HashSet<(UserId, Relation, String)>,
    by_user: HashMap<UserId, Vec<usize>>,
    log: Option<(PathBuf, BufWriter<fs::File>)>,
}

impl KnowledgeBase {
    /// In-memory store without persistence.
    pub fn in_memory() -> Self {
        KnowledgeBase {
            triples: Vec::new(),
            seen: HashSet::new(),
            by_user: HashMap::new(),
            log: None,
        }
    }

    /// Open a persistent store: existing log lines are replayed into the
    /// index, inserts append to the file.
    pub fn open(path: &Path) -> Result<Self> {
        let mut kb = KnowledgeBase::in_memory();
        if path.exists() {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let triple: KnowledgeTriple = serde_json::from_str(&line)
                    .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
                kb.insert_in_memory(triple);
            }
        }
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        kb.log = Some((path.to_path_buf(), BufWriter::new(file)));
        Ok(kb)
    }

    fn insert_in_memory(&mut self, triple: KnowledgeTriple) -> bool {
        if !self.seen.insert(triple.key()) {
            return false;
        }
        self.by_user
            .entry(triple.user_id.clone())
            .or_default()
            .push(self.triples.len());
        self.triples.push(triple);
        true
    }

    /// Insert a triple; returns whether it was new. New triples are
    /// appended to the log.
    pub fn insert(&mut self, triple: KnowledgeTriple) -> Result<bool> {
        let line = serde_json::to_string(&triple).expect("triples serialize");
        let new = self.insert_in_memory(triple);
        if new {
            if let Some((path, writer)) = &mut self.log {
                writeln!(writer, "{line}").map_err(|e| Error::io(path.clone(), e))?;
            }
        }
        Ok(new)
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some((path, writer)) = &mut self.log {
            writer.flush().map_err(|e| Error::io(path.clone(), e))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &KnowledgeTriple> {
        self.triples.iter()
    }

    /// Distinct triples for a user, optionally restricted to one relation,
    /// ordered by (relation, entity).
    pub fn query(&self, user_id: &UserId, relation: Option<Relation>) -> Vec<&KnowledgeTriple> {
        let mut out: Vec<&KnowledgeTriple> = self
            .by_user
            .get(user_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.triples[i])
            .filter(|t| relation.map_or(true, |r| t.relation == r))
            .collect();
        out.sort_by(|a, b| (a.relation, &a.entity).cmp(&(b.relation, &b.entity)));
        out
    }
}

/// Counts from one extraction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub n_notifications: usize,
    /// Notifications that matched some bank template.
    pub n_matched: usize,
    /// Matched notifications whose template has no rule.
    pub n_matched_unruled: usize,
    /// Total triple emissions (duplicates counted per emission).
    pub n_triples: usize,
    /// Distinct triples newly stored.
    pub n_distinct_triples: usize,
    /// Fraction of notifications that produced at least one triple.
    pub personal_fraction: f64,
}

/// Match every notification, apply the matched template's rule when one
/// exists, and store deduplicated triples.
pub fn extract_all(
    corpus: &Corpus,
    bank: &TemplateBank,
    rules: &BTreeMap<TemplateId, SemanticRule>,
    kb: &mut KnowledgeBase,
    l_max: usize,
) -> Result<ExtractionReport> {
    let mut report = ExtractionReport {
        n_notifications: corpus.len(),
        n_matched: 0,
        n_matched_unruled: 0,
        n_triples: 0,
        n_distinct_triples: 0,
        personal_fraction: 0.0,
    };
    let mut n_personal = 0usize;
    for notification in corpus.notifications() {
        let Some(m) = match_template(notification, bank, l_max) else {
            continue;
        };
        report.n_matched += 1;
        let Some(rule) = rules.get(&m.template_id) else {
            report.n_matched_unruled += 1;
            continue;
        };
        let triples = apply_rule(&m, rule, &notification.user_id, notification.timestamp)?;
        report.n_triples += triples.len();
        if !triples.is_empty() {
            n_personal += 1;
        }
        for triple in triples {
            if kb.insert(triple)? {
                report.n_distinct_triples += 1;
            }
        }
    }
    kb.flush()?;
    report.personal_fraction = if corpus.len() == 0 {
        0.0
    } else {
        n_personal as f64 / corpus.len() as f64
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregator::PooledTemplate;
    use crate::discovery::template::template_from_pattern;
    use crate::ingest::Corpus;
    use crate::semantics::Ktt;
    use crate::text::tokenize;

    fn bank(patterns: &[(&str, &str)]) -> TemplateBank {
        TemplateBank::new(
            patterns
                .iter()
                .map(|(app, p)| PooledTemplate {
                    template: template_from_pattern(*app, p).unwrap(),
                    support_users: 2,
                })
                .collect(),
        )
    }

    fn notif(user: &str, app: &str, t: i64, text: &str) -> Notification {
        Notification::new(user.into(), app.into(), t, tokenize(text)).unwrap()
    }

    #[test]
    fn binds_name_and_multi_token_product() {
        let bank = bank(&[("shop", "Hi {} , your order {} has been shipped")]);
        let n = notif("u1", "shop", 5, "Hi Alice , your order iPhone X has been shipped");
        let m = match_template(&n, &bank, DEFAULT_MAX_SLOT_TOKENS).unwrap();
        assert_eq!(m.bindings[&1], vec!["Alice".to_string()]);
        assert_eq!(m.bindings[&2], vec!["iPhone".to_string(), "X".to_string()]);
    }

    #[test]
    fn all_literal_template_matches_with_empty_bindings() {
        let bank = bank(&[("news", "Daily digest is ready now")]);
        let n = notif("u1", "news", 1, "Daily digest is ready now");
        let m = match_template(&n, &bank, DEFAULT_MAX_SLOT_TOKENS).unwrap();
        assert!(m.bindings.is_empty());
    }

    #[test]
    fn slot_requires_at_least_one_token() {
        let bank = bank(&[("shop", "Your order {} has been shipped")]);
        let n = notif("u1", "shop", 1, "Your order has been shipped");
        assert!(match_template(&n, &bank, DEFAULT_MAX_SLOT_TOKENS).is_none());
    }

    #[test]
    fn slot_cap_limits_binding_length() {
        let bank = bank(&[("shop", "Your order {} has been shipped")]);
        let long = format!(
            "Your order {} has been shipped",
            (0..11).map(|_| "very").collect::<Vec<_>>().join(" ")
        );
        let n = notif("u1", "shop", 1, &long);
        assert!(match_template(&n, &bank, 10).is_none());
        assert!(match_template(&n, &bank, 11).is_some());
    }

    #[test]
    fn wrong_app_does_not_match() {
        let bank = bank(&[("shop", "Your order {} has been shipped")]);
        let n = notif("u1", "other", 1, "Your order iPhone has been shipped");
        assert!(match_template(&n, &bank, DEFAULT_MAX_SLOT_TOKENS).is_none());
    }

    #[test]
    fn most_specific_template_wins() {
        // The split variant (more literals) must beat its general
        // ancestor.
        let bank = bank(&[
            ("shop", "Your order {} has been {}"),
            ("shop", "Your order {} has been shipped"),
        ]);
        let n = notif("u1", "shop", 1, "Your order iPhone X has been shipped");
        let m = match_template(&n, &bank, DEFAULT_MAX_SLOT_TOKENS).unwrap();
        let specific = template_from_pattern("shop", "Your order {} has been shipped").unwrap();
        assert_eq!(m.template_id, specific.template_id);
    }

    #[test]
    fn leftmost_shortest_binding() {
        let bank = bank(&[("app", "start {} mid {} end")]);
        // "mid" appears twice: leftmost-shortest must bind slot 1 to the
        // minimal prefix.
        let n = notif("u1", "app", 1, "start a mid b mid c end");
        let m = match_template(&n, &bank, DEFAULT_MAX_SLOT_TOKENS).unwrap();
        assert_eq!(m.bindings[&1], vec!["a".to_string()]);
        assert_eq!(m.bindings[&2], vec!["b".to_string(), "mid".to_string(), "c".to_string()]);
    }

    #[test]
    fn apply_rule_emits_triples_in_rule_order() {
        let bank = bank(&[("shop", "Hi {} , your order {} has been shipped")]);
        let n = notif("u1", "shop", 9, "Hi Alice , your order iPhone X has been shipped");
        let m = match_template(&n, &bank, DEFAULT_MAX_SLOT_TOKENS).unwrap();
        let rule = SemanticRule::new(
            m.template_id,
            vec![
                Ktt::from_slot(Relation::Name, 1),
                Ktt::from_slot(Relation::Purchases, 2),
            ],
        )
        .unwrap();
        let triples = apply_rule(&m, &rule, &n.user_id, n.timestamp).unwrap();
        assert_eq!(triples.len(), 2);
        assert_eq!(triples[0].relation, Relation::Name);
        assert_eq!(triples[0].entity, "Alice");
        assert_eq!(triples[1].relation, Relation::Purchases);
        assert_eq!(triples[1].entity, "iPhone X");
        assert_eq!(triples[0].timestamp, 9);

        // Empty rule emits nothing.
        let empty = SemanticRule::new(m.template_id, vec![]).unwrap();
        assert!(apply_rule(&m, &empty, &n.user_id, 0).unwrap().is_empty());

        // Fixed-entity rules ignore bindings.
        let fixed = SemanticRule::new(m.template_id, vec![Ktt::fixed(Relation::Gender, "male")])
            .unwrap();
        let t = apply_rule(&m, &fixed, &n.user_id, 0).unwrap();
        assert_eq!(t[0].entity, "male");
    }

    #[test]
    fn kb_dedup_query_and_persistence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("triples.jsonl");
        let mk = |rel: Relation, entity: &str| KnowledgeTriple {
            user_id: "u1".into(),
            relation: rel,
            entity: entity.to_string(),
            template_id: TemplateId(7),
            timestamp: 1,
        };
        {
            let mut kb = KnowledgeBase::open(&path).unwrap();
            assert!(kb.insert(mk(Relation::Name, "Alice")).unwrap());
            assert!(kb.insert(mk(Relation::Purchases, "iPhone X")).unwrap());
            assert!(!kb.insert(mk(Relation::Purchases, "iPhone X")).unwrap());
            kb.flush().unwrap();
        }
        let kb = KnowledgeBase::open(&path).unwrap();
        assert_eq!(kb.len(), 2);
        let purchases = kb.query(&"u1".into(), Some(Relation::Purchases));
        assert_eq!(purchases.len(), 1);
        assert_eq!(purchases[0].entity, "iPhone X");
        let all = kb.query(&"u1".into(), None);
        assert_eq!(all.len(), 2);
        // Unknown user: empty.
        assert!(kb.query(&"nobody".into(), None).is_empty());
    }

    #[test]
    fn extract_all_counts_and_dedups() {
        let bank = bank(&[("shop", "Your order {} has been shipped")]);
        let template_id = bank.templates[0].template.template_id;
        let mut rules = BTreeMap::new();
        rules.insert(
            template_id,
            SemanticRule::new(template_id, vec![Ktt::from_slot(Relation::Purchases, 1)]).unwrap(),
        );
        let corpus = Corpus::from_notifications(vec![
            notif("u1", "shop", 1, "Your order iPhone X has been shipped"),
            notif("u1", "shop", 2, "Your order iPhone X has been shipped"),
            notif("u1", "noise", 3, "completely unrelated text"),
        ]);
        let mut kb = KnowledgeBase::in_memory();
        let report = extract_all(&corpus, &bank, &rules, &mut kb, DEFAULT_MAX_SLOT_TOKENS).unwrap();
        assert_eq!(report.n_notifications, 3);
        assert_eq!(report.n_matched, 2);
        assert_eq!(report.n_triples, 2); // both emissions counted
        assert_eq!(report.n_distinct_triples, 1); // stored once
        assert_eq!(kb.len(), 1);
        assert!((report.personal_fraction - 2.0 / 3.0).abs() < 1e-12);

        // Pure noise corpus: nothing extracted.
        let noise = Corpus::from_notifications(vec![notif("u2", "x", 1, "hello there friend")]);
        let mut kb2 = KnowledgeBase::in_memory();
        let r2 = extract_all(&noise, &bank, &rules, &mut kb2, DEFAULT_MAX_SLOT_TOKENS).unwrap();
        assert_eq!(r2.n_matched, 0);
        assert_eq!(kb2.len(), 0);
    }
}
