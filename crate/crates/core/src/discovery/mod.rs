//! Client-side template discovery: distance metric, density clustering,
//! common-subsequence mining and frequency-based correction.

pub mod dbscan;
pub mod distance;
pub mod lcs;
pub mod refine;
pub mod template;

use std::collections::BTreeMap;

pub use dbscan::{cluster_token_seqs, ClusterConfig, Clustering};
pub use distance::{
    calibrate_delta, levenshtein, relative_edit_distance, DistanceHistogram, DEFAULT_BUCKET_WIDTH,
};
pub use lcs::{lcs_pair, mine_lcs_template, MinedTemplate};
pub use refine::{refine_template, RefineConfig};
pub use template::{
    is_punctuation_token, normalize_elements, template_from_pattern, Element, Template, TemplateId,
};

use crate::aggregator::GlobalFrequencyTable;
use crate::error::{Error, Result};
use crate::notification::{AppId, Notification};
use crate::text::TokenSeq;

/// Cluster one (user, app) notification group.
pub fn cluster_notifications(
    notifications: &[&Notification],
    config: &ClusterConfig,
) -> Result<Clustering> {
    let seqs: Vec<&TokenSeq> = notifications.iter().map(|n| &n.tokens).collect();
    cluster_token_seqs(&seqs, config)
}

/// Run the full on-device discovery for one client: per app, cluster the
/// notifications, mine a raw template from each cluster, and refine it
/// against the global frequency table. Returns the deduplicated refined
/// templates in deterministic order.
pub fn discover_client_templates(
    notifications: &[&Notification],
    freq: &GlobalFrequencyTable,
    cluster_config: &ClusterConfig,
    refine_config: &RefineConfig,
) -> Result<Vec<Template>> {
    cluster_config.validate()?;
    refine_config.validate()?;

    let mut by_app: BTreeMap<&AppId, Vec<&Notification>> = BTreeMap::new();
    for n in notifications {
        by_app.entry(&n.app_id).or_default().push(n);
    }

    let mut out: Vec<Template> = Vec::new();
    for (app_id, group) in by_app {
        let seqs: Vec<&TokenSeq> = group.iter().map(|n| &n.tokens).collect();
        let clustering = cluster_token_seqs(&seqs, cluster_config)?;
        for cluster in &clustering.clusters {
            let members: Vec<&TokenSeq> = cluster.iter().map(|&i| seqs[i]).collect();
            let mined = match mine_lcs_template(app_id, &members) {
                Ok(m) => m,
                // A cluster with no common token yields no template.
                Err(Error::NoCommonTemplate) => continue,
                Err(e) => return Err(e),
            };
            for refined in refine_template(&mined, freq, refine_config)? {
                if !out.iter().any(|t| t.same_structure(&refined.template)) {
                    out.push(refined.template);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregator::{aggregate_word_hashes, ClientUpload};
    use crate::hash::Salt;
    use crate::text::tokenize;

    #[test]
    fn end_to_end_single_client_discovery() {
        let salt = Salt(11);
        // Notifications for one user across two apps.
        let texts_shop = [
            "Your order iPhone X has been shipped to you !",
            "Your order milk powder has been shipped to you !",
            "Your order running shoes has been shipped to you !",
        ];
        let texts_news = [
            "Daily digest is ready for reading now",
            "Daily digest is ready for reading now",
        ];
        let mut notifications = Vec::new();
        for (i, t) in texts_shop.iter().enumerate() {
            notifications
                .push(Notification::new("u1".into(), "shop".into(), i as i64, tokenize(t)).unwrap());
        }
        for (i, t) in texts_news.iter().enumerate() {
            notifications.push(
                Notification::new("u1".into(), "news".into(), 10 + i as i64, tokenize(t)).unwrap(),
            );
        }
        let refs: Vec<&Notification> = notifications.iter().collect();

        // Frequency table from 50 simulated clients that all share the
        // template words; product words appear for few clients.
        let mut uploads = Vec::new();
        for c in 0..50 {
            let mut upload = ClientUpload::from_notifications(format!("c{c}"), &refs, salt);
            if c > 2 {
                // Most clients do not have the product words.
                for set in upload.word_hashes.values_mut() {
                    for w in ["iphone", "x", "milk", "powder", "running", "shoes"] {
                        set.remove(&crate::hash::hash_word(w, salt));
                    }
                }
            }
            uploads.push(upload);
        }
        let freq = aggregate_word_hashes(&uploads, salt).unwrap();

        let templates = discover_client_templates(
            &refs,
            &freq,
            &ClusterConfig::default(),
            &RefineConfig::default(),
        )
        .unwrap();
        let rendered: Vec<String> = templates.iter().map(|t| t.render()).collect();
        assert!(
            rendered.contains(
                &"Your order \u{27e8}slot1\u{27e9} has been shipped to you !".to_string()
            ),
            "got {rendered:?}"
        );
        assert!(rendered.contains(&"Daily digest is ready for reading now".to_string()));
        assert_eq!(templates.len(), 2);
    }
}
