//! Client-side notification filtering: local duplicates, global
//! (broadcast) duplicates, and unstructured person-to-person messages are
//! removed before clustering.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::{hash_sentence, Salt, SentenceHash};
use crate::notification::{AppId, Notification};
use crate::text::{tokenize, TokenSeq};

/// Configuration for the unstructured-message and global-duplicate
/// filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Apps whose notifications are person-to-person messages.
    pub messenger_app_ids: BTreeSet<AppId>,
    /// Anchored token-prefix patterns, e.g. `"[NEW MAIL]"`. A notification
    /// matches when its token sequence starts with the pattern's tokens.
    pub unstructured_patterns: Vec<String>,
    /// A sentence hash contributed by more than this fraction of uploading
    /// clients is a global duplicate.
    pub global_dup_user_fraction: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            messenger_app_ids: BTreeSet::new(),
            unstructured_patterns: Vec::new(),
            global_dup_user_fraction: 0.01,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.global_dup_user_fraction > 0.0 && self.global_dup_user_fraction <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "global_dup_user_fraction must be in (0,1], got {}",
                self.global_dup_user_fraction
            )));
        }
        self.compiled_patterns().map(|_| ())
    }

    /// Tokenize the prefix patterns; empty patterns do not compile.
    pub fn compiled_patterns(&self) -> Result<Vec<TokenSeq>> {
        self.unstructured_patterns
            .iter()
            .map(|p| {
                let toks = tokenize(p);
                if toks.is_empty() {
                    Err(Error::InvalidInput(format!("pattern {p:?} has no tokens")))
                } else {
                    Ok(toks)
                }
            })
            .collect()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: FilterConfig =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, 1, e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Keep only the earliest instance of each (app, token sequence) pair for
/// one user. Output preserves input order of the retained instances; a
/// timestamp tie keeps the instance seen first.
pub fn drop_local_duplicates(notifications: &[Notification]) -> Vec<Notification> {
    debug_assert!(
        notifications
            .windows(2)
            .all(|w| w[0].user_id == w[1].user_id),
        "local duplicate filtering expects one user's notifications"
    );
    let mut best: HashMap<(&AppId, &TokenSeq), usize> = HashMap::new();
    for (i, n) in notifications.iter().enumerate() {
        match best.entry((&n.app_id, &n.tokens)) {
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(i);
            }
            std::collections::hash_map::Entry::Occupied(mut e) => {
                if n.timestamp < notifications[*e.get()].timestamp {
                    e.insert(i);
                }
            }
        }
    }
    let mut keep: Vec<usize> = best.into_values().collect();
    keep.sort_unstable();
    keep.into_iter().map(|i| notifications[i].clone()).collect()
}

/// Drop every notification whose sentence hash is in the downloaded
/// common-hash set.
pub fn drop_global_duplicates(
    notifications: &[Notification],
    common_hashes: &BTreeSet<SentenceHash>,
    salt: Salt,
) -> Vec<Notification> {
    notifications
        .iter()
        .filter(|n| !common_hashes.contains(&hash_sentence(&n.tokens, salt)))
        .cloned()
        .collect()
}

/// Drop notifications from messenger apps or matching an unstructured
/// pattern prefix.
pub fn drop_unstructured(
    notifications: &[Notification],
    config: &FilterConfig,
) -> Result<Vec<Notification>> {
    let patterns = config.compiled_patterns()?;
    Ok(notifications
        .iter()
        .filter(|n| {
            if config.messenger_app_ids.contains(&n.app_id) {
                return false;
            }
            !patterns
                .iter()
                .any(|p| n.tokens.as_slice().starts_with(p.as_slice()))
        })
        .cloned()
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn notif(user: &str, app: &str, t: i64, text: &str) -> Notification {
        Notification::new(user.into(), app.into(), t, tokenize(text)).unwrap()
    }

    #[test]
    fn local_duplicates_keep_earliest() {
        let ns = vec![
            notif("u1", "sys", 2, "Low battery"),
            notif("u1", "sys", 1, "Low battery"),
            notif("u1", "sys", 3, "Low battery"),
            notif("u1", "sys", 5, "Searching for GPS"),
        ];
        let kept = drop_local_duplicates(&ns);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].timestamp, 1);
        assert_eq!(kept[1].timestamp, 5);
    }

    #[test]
    fn same_text_different_app_both_kept() {
        let ns = vec![
            notif("u1", "a", 1, "Update available"),
            notif("u1", "b", 2, "Update available"),
        ];
        assert_eq!(drop_local_duplicates(&ns).len(), 2);
    }

    #[test]
    fn all_distinct_unchanged() {
        let ns = vec![
            notif("u1", "a", 1, "first message here"),
            notif("u1", "a", 2, "second message here"),
        ];
        assert_eq!(drop_local_duplicates(&ns), ns);
    }

    #[test]
    fn global_duplicates_removed_by_hash() {
        let salt = Salt(9);
        let ns = vec![
            notif("u1", "promo", 1, "Best sales!"),
            notif("u1", "shop", 2, "Your order iPhone X has been shipped"),
        ];
        let mut common = BTreeSet::new();
        common.insert(hash_sentence(&tokenize("Best sales!"), salt));
        let kept = drop_global_duplicates(&ns, &common, salt);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].app_id, AppId("shop".into()));

        // Empty common set: unchanged.
        assert_eq!(drop_global_duplicates(&ns, &BTreeSet::new(), salt), ns);
    }

    #[test]
    fn unstructured_by_app_and_pattern() {
        let config = FilterConfig {
            messenger_app_ids: [AppId("chat".into())].into_iter().collect(),
            unstructured_patterns: vec!["[NEW MAIL]".into()],
            global_dup_user_fraction: 0.01,
        };
        let ns = vec![
            notif("u1", "chat", 1, "see you at eight"),
            notif("u1", "mail", 2, "[NEW MAIL] hello there"),
            notif("u1", "shop", 3, "Your order has been shipped"),
        ];
        let kept = drop_unstructured(&ns, &config).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].app_id, AppId("shop".into()));

        // No rule matches: unchanged.
        let empty = FilterConfig::default();
        assert_eq!(drop_unstructured(&ns, &empty).unwrap(), ns);
    }

    #[test]
    fn pattern_matches_tokenwise_prefix_only() {
        let config = FilterConfig {
            messenger_app_ids: BTreeSet::new(),
            unstructured_patterns: vec!["[NEW MAIL]".into()],
            global_dup_user_fraction: 0.01,
        };
        // Pattern tokens appear but not as a prefix.
        let ns = vec![notif("u1", "mail", 1, "forwarded [NEW MAIL] hello")];
        assert_eq!(drop_unstructured(&ns, &config).unwrap().len(), 1);
    }

    #[test]
    fn empty_pattern_fails_validation() {
        let config = FilterConfig {
            messenger_app_ids: BTreeSet::new(),
            unstructured_patterns: vec!["   ".into()],
            global_dup_user_fraction: 0.01,
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn filters_are_contractions_and_order_insensitive() {
        let salt = Salt(4);
        let config = FilterConfig {
            messenger_app_ids: [AppId("chat".into())].into_iter().collect(),
            unstructured_patterns: vec!["[NEW MAIL]".into()],
            global_dup_user_fraction: 0.5,
        };
        let ns = vec![
            notif("u1", "sys", 3, "Low battery"),
            notif("u1", "sys", 1, "Low battery"),
            notif("u1", "chat", 2, "hey are you there"),
            notif("u1", "promo", 4, "Best sales!"),
            notif("u1", "shop", 5, "Your order arrived today"),
            notif("u1", "mail", 6, "[NEW MAIL] meeting notes"),
        ];
        let mut common = BTreeSet::new();
        common.insert(hash_sentence(&tokenize("Best sales!"), salt));

        let local = |v: &[Notification]| drop_local_duplicates(v);
        let global = |v: &[Notification]| drop_global_duplicates(v, &common, salt);
        let unstructured = |v: &[Notification]| drop_unstructured(v, &config).unwrap();

        let composed: Vec<Box<dyn Fn(&[Notification]) -> Vec<Notification>>> = vec![
            Box::new(move |v| unstructured(&global(&local(v)))),
            Box::new(move |v| global(&unstructured(&local(v)))),
            Box::new(move |v| local(&global(&unstructured(v)))),
        ];
        let mut results: Vec<Vec<Notification>> =
            composed.iter().map(|f| f(&ns)).collect();
        for r in &mut results {
            r.sort_by_key(|n| n.timestamp);
        }
        assert_eq!(results[0], results[1]);
        assert_eq!(results[1], results[2]);
        // Contraction: output is a subset of input.
        for n in &results[0] {
            assert!(ns.contains(n));
        }
        assert_eq!(results[0].len(), 2); // battery (t=1) + shop order
    }
}
