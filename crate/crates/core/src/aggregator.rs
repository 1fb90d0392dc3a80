//! Simulated aggregation server.
//!
//! Clients upload salted hashes and candidate templates; the server derives
//! global word frequencies, flags broadcast duplicates, and pools templates
//! into the final bank. Everything counts *distinct contributing clients*,
//! never raw occurrences, so thresholds are scale-free.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::discovery::template::{Element, Template, TemplateId};
use crate::error::{Error, Result};
use crate::hash::{hash_sentence, hash_word, Salt, SentenceHash, WordHash};
use crate::notification::{AppId, Notification};

/// Everything one client sends to the server. Contains no notification
/// text: only hashes, plus literal tokens of candidate templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientUpload {
    pub client_id: String,
    /// Per-app salted hashes of every token used in the client's
    /// notifications (punctuation included: refinement needs its frequency
    /// too).
    pub word_hashes: BTreeMap<AppId, BTreeSet<WordHash>>,
    pub sentence_hashes: BTreeSet<SentenceHash>,
    pub templates: Vec<Template>,
}

impl ClientUpload {
    /// Assemble the hash portion of an upload from one client's filtered
    /// notifications.
    pub fn from_notifications(
        client_id: String,
        notifications: &[&Notification],
        salt: Salt,
    ) -> Self {
        let mut word_hashes: BTreeMap<AppId, BTreeSet<WordHash>> = BTreeMap::new();
        let mut sentence_hashes = BTreeSet::new();
        for n in notifications {
            let per_app = word_hashes.entry(n.app_id.clone()).or_default();
            for tok in n.tokens.iter() {
                per_app.insert(hash_word(tok, salt));
            }
            sentence_hashes.insert(hash_sentence(&n.tokens, salt));
        }
        ClientUpload {
            client_id,
            word_hashes,
            sentence_hashes,
            templates: Vec::new(),
        }
    }
}

/// Fraction of uploading clients that used each word, keyed by salted hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFrequencyTable {
    pub salt: Salt,
    /// Clients that uploaded at least one word hash.
    pub n_contributors: u64,
    /// Distinct-client counts per word hash.
    pub counts: BTreeMap<WordHash, u64>,
}

impl GlobalFrequencyTable {
    /// Frequency of a word hash; absent hashes have frequency 0.
    pub fn frequency_of_hash(&self, hash: WordHash) -> f64 {
        if self.n_contributors == 0 {
            return 0.0;
        }
        *self.counts.get(&hash).unwrap_or(&0) as f64 / self.n_contributors as f64
    }

    /// Frequency of a token (hashed with the table's salt).
    pub fn frequency(&self, token: &str) -> f64 {
        self.frequency_of_hash(hash_word(token, self.salt))
    }

    /// Merge with a table computed over a disjoint client set.
    pub fn merge(mut self, other: &GlobalFrequencyTable) -> GlobalFrequencyTable {
        assert_eq!(self.salt, other.salt, "cannot merge tables with different salts");
        self.n_contributors += other.n_contributors;
        for (hash, count) in &other.counts {
            *self.counts.entry(*hash).or_insert(0) += count;
        }
        self
    }
}

/// Count distinct clients per word hash.
pub fn aggregate_word_hashes(uploads: &[ClientUpload], salt: Salt) -> Result<GlobalFrequencyTable> {
    if uploads.is_empty() {
        return Err(Error::NoUploads);
    }
    let mut counts: BTreeMap<WordHash, u64> = BTreeMap::new();
    let mut n_contributors = 0u64;
    for upload in uploads {
        let client_hashes: BTreeSet<WordHash> = upload
            .word_hashes
            .values()
            .flat_map(|set| set.iter().copied())
            .collect();
        if client_hashes.is_empty() {
            continue;
        }
        n_contributors += 1;
        for hash in client_hashes {
            *counts.entry(hash).or_insert(0) += 1;
        }
    }
    Ok(GlobalFrequencyTable {
        salt,
        n_contributors,
        counts,
    })
}

/// Sentence hashes contributed by strictly more than
/// `threshold * uploading_clients` distinct clients.
pub fn detect_common_hashes(
    uploads: &[ClientUpload],
    threshold: f64,
) -> Result<BTreeSet<SentenceHash>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "global duplicate threshold must be in (0,1], got {threshold}"
        )));
    }
    let mut counts: HashMap<SentenceHash, u64> = HashMap::new();
    let mut n_uploading = 0u64;
    for upload in uploads {
        if upload.sentence_hashes.is_empty() {
            continue;
        }
        n_uploading += 1;
        for hash in &upload.sentence_hashes {
            *counts.entry(*hash).or_insert(0) += 1;
        }
    }
    let cutoff = threshold * n_uploading as f64;
    Ok(counts
        .into_iter()
        .filter(|(_, count)| *count as f64 > cutoff)
        .map(|(hash, _)| hash)
        .collect())
}

/// Server-side template acceptance thresholds.
pub const MIN_LITERAL_WORDS: usize = 5;
pub const MAX_SLOTS: u32 = 3;
pub const MIN_SUPPORT_USERS: u64 = 2;

/// A pooled template with its distinct-client support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledTemplate {
    #[serde(flatten)]
    pub template: Template,
    pub support_users: u64,
}

/// The server's deduplicated, heuristically filtered template set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemplateBank {
    pub templates: Vec<PooledTemplate>,
    by_app: HashMap<AppId, Vec<usize>>,
    by_id: HashMap<TemplateId, usize>,
}

impl TemplateBank {
    pub fn new(mut templates: Vec<PooledTemplate>) -> Self {
        templates.sort_by(|a, b| {
            (&a.template.app_id, a.template.template_id)
                .cmp(&(&b.template.app_id, b.template.template_id))
        });
        let mut by_app: HashMap<AppId, Vec<usize>> = HashMap::new();
        let mut by_id = HashMap::new();
        for (i, t) in templates.iter().enumerate() {
            by_app.entry(t.template.app_id.clone()).or_default().push(i);
            by_id.insert(t.template.template_id, i);
        }
        TemplateBank {
            templates,
            by_app,
            by_id,
        }
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn get(&self, id: TemplateId) -> Option<&PooledTemplate> {
        self.by_id.get(&id).map(|&i| &self.templates[i])
    }

    pub fn templates_for_app(&self, app_id: &AppId) -> impl Iterator<Item = &PooledTemplate> {
        self.by_app
            .get(app_id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.templates[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &PooledTemplate> {
        self.templates.iter()
    }
}

impl Serialize for TemplateBank {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.templates.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TemplateBank {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(TemplateBank::new(Vec::<PooledTemplate>::deserialize(d)?))
    }
}

/// Deduplicate structurally identical templates across uploads, count
/// distinct supporting clients, and drop templates that fail the
/// acceptance heuristics (too few literal words, too many slots, too few
/// supporters).
pub fn pool_templates(uploads: &[ClientUpload]) -> TemplateBank {
    // Structural key: app id plus element sequence. Ids are content
    // hashes, so equal structure implies equal id, but dedup on structure
    // keeps the contract independent of the id scheme.
    let mut support: BTreeMap<(AppId, Vec<Element>), BTreeSet<&str>> = BTreeMap::new();
    for upload in uploads {
        for t in &upload.templates {
            support
                .entry((t.app_id.clone(), t.elements.clone()))
                .or_default()
                .insert(upload.client_id.as_str());
        }
    }
    let templates = support
        .into_iter()
        .filter_map(|((app_id, elements), clients)| {
            let template = Template::new(app_id, elements).ok()?;
            let support_users = clients.len() as u64;
            if template.literal_word_count() < MIN_LITERAL_WORDS
                || template.n_slots > MAX_SLOTS
                || support_users < MIN_SUPPORT_USERS
            {
                return None;
            }
            Some(PooledTemplate {
                template,
                support_users,
            })
        })
        .collect();
    TemplateBank::new(templates)
}

/// Result of scanning serialized uploads for planted entity strings.
#[derive(Debug, Clone, Default, Serialize)]
pub struct UploadAudit {
    /// (client_id, entity) pairs where an entity leaked into an upload and
    /// is not explained by a surviving template literal.
    pub violations: Vec<(String, String)>,
    /// Entities that appear in uploads but coincide with literal text that
    /// legitimately survived pooling.
    pub coincidences: BTreeSet<String>,
}

impl UploadAudit {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Scan every serialized upload for occurrences of the given entity
/// strings. An occurrence is a violation unless the entity coincides with
/// a contiguous literal run of a template that survived pooling.
pub fn audit_uploads(
    uploads: &[ClientUpload],
    entities: &[String],
    bank: &TemplateBank,
) -> UploadAudit {
    let mut surviving_literal_runs: BTreeSet<String> = BTreeSet::new();
    for pooled in bank.iter() {
        let mut run: Vec<&str> = Vec::new();
        let flush = |run: &mut Vec<&str>, set: &mut BTreeSet<String>| {
            for start in 0..run.len() {
                for end in start + 1..=run.len() {
                    set.insert(run[start..end].join(" "));
                }
            }
            run.clear();
        };
        for el in &pooled.template.elements {
            match el {
                Element::Literal(tok) => run.push(tok),
                Element::Slot(_) => flush(&mut run, &mut surviving_literal_runs),
            }
        }
        flush(&mut run, &mut surviving_literal_runs);
    }

    let mut audit = UploadAudit::default();
    for upload in uploads {
        let bytes = serde_json::to_string(upload).expect("uploads serialize");
        for entity in entities {
            if entity.is_empty() || !bytes.contains(entity.as_str()) {
                continue;
            }
            if surviving_literal_runs.contains(entity) {
                audit.coincidences.insert(entity.clone());
            } else {
                audit
                    .violations
                    .push((upload.client_id.clone(), entity.clone()));
            }
        }
    }
    audit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::template::template_from_pattern;
    use crate::text::tokenize;

    fn upload_with_words(client: &str, words: &[&str], salt: Salt) -> ClientUpload {
        let mut per_app = BTreeSet::new();
        for w in words {
            per_app.insert(hash_word(w, salt));
        }
        let mut word_hashes = BTreeMap::new();
        word_hashes.insert(AppId("app".into()), per_app);
        ClientUpload {
            client_id: client.to_string(),
            word_hashes,
            sentence_hashes: BTreeSet::new(),
            templates: Vec::new(),
        }
    }

    #[test]
    fn frequency_is_contributing_client_fraction() {
        let salt = Salt(1);
        let mut uploads = Vec::new();
        for i in 0..10 {
            let words: &[&str] = if i < 7 { &["order", "hello"] } else { &["hello"] };
            uploads.push(upload_with_words(&format!("c{i}"), words, salt));
        }
        let table = aggregate_word_hashes(&uploads, salt).unwrap();
        assert_eq!(table.n_contributors, 10);
        assert!((table.frequency("order") - 0.7).abs() < 1e-12);
        assert!((table.frequency("ORDER") - 0.7).abs() < 1e-12);
        assert_eq!(table.frequency("absent"), 0.0);
    }

    #[test]
    fn duplicate_apps_count_once_per_client() {
        let salt = Salt(1);
        let mut upload = upload_with_words("c0", &["order"], salt);
        upload
            .word_hashes
            .entry(AppId("other".into()))
            .or_default()
            .insert(hash_word("order", salt));
        let others: Vec<ClientUpload> = (1..4)
            .map(|i| upload_with_words(&format!("c{i}"), &["misc"], salt))
            .collect();
        let mut uploads = vec![upload];
        uploads.extend(others);
        let table = aggregate_word_hashes(&uploads, salt).unwrap();
        assert!((table.frequency("order") - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_uploads_error() {
        assert!(matches!(
            aggregate_word_hashes(&[], Salt(1)),
            Err(Error::NoUploads)
        ));
    }

    #[test]
    fn merge_matches_joint_aggregation() {
        let salt = Salt(3);
        let a: Vec<ClientUpload> = (0..4)
            .map(|i| upload_with_words(&format!("a{i}"), &["x", "y"], salt))
            .collect();
        let b: Vec<ClientUpload> = (0..6)
            .map(|i| upload_with_words(&format!("b{i}"), &["y", "z"], salt))
            .collect();
        let merged = aggregate_word_hashes(&a, salt)
            .unwrap()
            .merge(&aggregate_word_hashes(&b, salt).unwrap());
        let joint_uploads: Vec<ClientUpload> = a.into_iter().chain(b).collect();
        let joint = aggregate_word_hashes(&joint_uploads, salt).unwrap();
        assert_eq!(merged, joint);
    }

    fn upload_with_sentences(client: &str, texts: &[&str], salt: Salt) -> ClientUpload {
        let sentence_hashes = texts
            .iter()
            .map(|t| hash_sentence(&tokenize(t), salt))
            .collect();
        ClientUpload {
            client_id: client.to_string(),
            word_hashes: BTreeMap::new(),
            sentence_hashes,
            templates: Vec::new(),
        }
    }

    #[test]
    fn broadcast_hash_detected() {
        let salt = Salt(5);
        // Digit-free unique tags: digit runs collapse under tokenization.
        let tag = |mut n: usize| -> String {
            let mut s = String::new();
            loop {
                s.push((b'a' + (n % 26) as u8) as char);
                n /= 26;
                if n == 0 {
                    break s;
                }
            }
        };
        let mut uploads = Vec::new();
        for i in 0..100 {
            let unique = format!("personal message {} here", tag(i));
            let mut texts = vec![unique.as_str()];
            if i < 60 {
                texts.push("Best sales!");
            }
            uploads.push(upload_with_sentences(&format!("c{i}"), &texts, salt));
        }
        let common = detect_common_hashes(&uploads, 0.01).unwrap();
        assert!(common.contains(&hash_sentence(&tokenize("Best sales!"), salt)));
        // Per-user unique sentences stay out.
        assert_eq!(common.len(), 1);
    }

    #[test]
    fn threshold_one_matches_nothing() {
        let salt = Salt(5);
        let uploads: Vec<ClientUpload> = (0..10)
            .map(|i| upload_with_sentences(&format!("c{i}"), &["Best sales!"], salt))
            .collect();
        let common = detect_common_hashes(&uploads, 1.0).unwrap();
        assert!(common.is_empty());
    }

    fn upload_with_templates(client: &str, templates: Vec<Template>) -> ClientUpload {
        ClientUpload {
            client_id: client.to_string(),
            word_hashes: BTreeMap::new(),
            sentence_hashes: BTreeSet::new(),
            templates,
        }
    }

    #[test]
    fn pooling_dedups_and_filters() {
        let keep = template_from_pattern("shop", "Your order {} has been shipped !").unwrap();
        let few_words = template_from_pattern("shop", "Order {} shipped now !").unwrap();
        let many_slots = template_from_pattern(
            "shop",
            "From {} your order {} has been moved to {} until {} arrives",
        )
        .unwrap();
        let uploads = vec![
            upload_with_templates("c0", vec![keep.clone(), few_words.clone(), many_slots.clone()]),
            upload_with_templates("c1", vec![keep.clone(), few_words.clone(), many_slots.clone()]),
            upload_with_templates("c2", vec![keep.clone()]),
        ];
        let bank = pool_templates(&uploads);
        assert_eq!(bank.len(), 1);
        let pooled = bank.get(keep.template_id).unwrap();
        assert_eq!(pooled.support_users, 3);
        assert!(few_words.literal_word_count() < MIN_LITERAL_WORDS);
        assert!(many_slots.n_slots > MAX_SLOTS);
    }

    #[test]
    fn single_supporter_dropped() {
        let t = template_from_pattern("shop", "Your order {} has been shipped !").unwrap();
        let uploads = vec![upload_with_templates("c0", vec![t])];
        assert!(pool_templates(&uploads).is_empty());
    }

    #[test]
    fn audit_flags_leaks_and_reports_coincidences() {
        let leaky = template_from_pattern("shop", "Dear Zanvelia your order {} has been shipped")
            .unwrap();
        let clean = template_from_pattern("shop", "Your order {} has been shipped !").unwrap();
        let uploads = vec![
            upload_with_templates("c0", vec![leaky.clone(), clean.clone()]),
            upload_with_templates("c1", vec![clean.clone()]),
        ];
        // Bank where the leaky template did NOT survive pooling.
        let bank = pool_templates(&uploads);
        let audit = audit_uploads(
            &uploads,
            &["Zanvelia".to_string(), "iPhone X".to_string()],
            &bank,
        );
        assert_eq!(audit.violations.len(), 1);
        assert_eq!(audit.violations[0].1, "Zanvelia");
        assert!(audit.coincidences.is_empty());

        // If the name survives pooling as a literal it is a coincidence.
        let uploads2 = vec![
            upload_with_templates("c0", vec![leaky.clone()]),
            upload_with_templates("c1", vec![leaky.clone()]),
        ];
        let bank2 = pool_templates(&uploads2);
        let audit2 = audit_uploads(&uploads2, &["Zanvelia".to_string()], &bank2);
        assert!(audit2.clean());
        assert!(audit2.coincidences.contains("Zanvelia"));
    }
}
