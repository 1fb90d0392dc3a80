//! Corpus container and JSON Lines persistence.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::notification::{AppId, Notification, UserId};
use crate::text::tokenize;

/// An in-memory notification corpus with user and app indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    notifications: Vec<Notification>,
    user_index: BTreeMap<UserId, Vec<usize>>,
    app_index: BTreeMap<AppId, Vec<usize>>,
}

impl Corpus {
    pub fn from_notifications(notifications: Vec<Notification>) -> Self {
        let mut user_index: BTreeMap<UserId, Vec<usize>> = BTreeMap::new();
        let mut app_index: BTreeMap<AppId, Vec<usize>> = BTreeMap::new();
        for (i, n) in notifications.iter().enumerate() {
            user_index.entry(n.user_id.clone()).or_default().push(i);
            app_index.entry(n.app_id.clone()).or_default().push(i);
        }
        Corpus {
            notifications,
            user_index,
            app_index,
        }
    }

    pub fn len(&self) -> usize {
        self.notifications.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notifications.is_empty()
    }

    pub fn notifications(&self) -> &[Notification] {
        &self.notifications
    }

    pub fn get(&self, ordinal: usize) -> Option<&Notification> {
        self.notifications.get(ordinal)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserId> {
        self.user_index.keys()
    }

    pub fn apps(&self) -> impl Iterator<Item = &AppId> {
        self.app_index.keys()
    }

    pub fn n_users(&self) -> usize {
        self.user_index.len()
    }

    pub fn of_user(&self, user: &UserId) -> Vec<&Notification> {
        self.user_index
            .get(user)
            .into_iter()
            .flatten()
            .map(|&i| &self.notifications[i])
            .collect()
    }

    pub fn of_app(&self, app: &AppId) -> Vec<&Notification> {
        self.app_index
            .get(app)
            .into_iter()
            .flatten()
            .map(|&i| &self.notifications[i])
            .collect()
    }
}

/// Write a corpus as JSON Lines (`user_id`, `app_id`, `timestamp`, `text`).
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for n in corpus.notifications() {
        let line = serde_json::json!({
            "user_id": n.user_id,
            "app_id": n.app_id,
            "timestamp": n.timestamp,
            "text": n.tokens.render(),
        });
        writeln!(writer, "{line}").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Read a JSON Lines corpus. Text is tokenized on load; `save` renders
/// token sequences back to text, and tokenization is idempotent on that
/// rendering, so save/load round-trips exactly.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut notifications = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        let field = |name: &str| -> Result<&serde_json::Value> {
            value.get(name).ok_or_else(|| Error::MissingField {
                field: name.to_string(),
                line: line_no,
            })
        };
        let user_id = field("user_id")?
            .as_str()
            .ok_or_else(|| Error::parse(path, line_no, "user_id must be a string"))?;
        let app_id = field("app_id")?
            .as_str()
            .ok_or_else(|| Error::parse(path, line_no, "app_id must be a string"))?;
        let timestamp = field("timestamp")?
            .as_i64()
            .ok_or_else(|| Error::parse(path, line_no, "timestamp must be an integer"))?;
        let text = field("text")?
            .as_str()
            .ok_or_else(|| Error::parse(path, line_no, "text must be a string"))?;
        let notification =
            Notification::new(user_id.into(), app_id.into(), timestamp, tokenize(text))
                .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        notifications.push(notification);
    }
    Ok(Corpus::from_notifications(notifications))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Corpus {
        let mk = |u: &str, a: &str, t: i64, text: &str| {
            Notification::new(u.into(), a.into(), t, tokenize(text)).unwrap()
        };
        Corpus::from_notifications(vec![
            mk("u1", "shop", 10, "Your order iPhone X has been shipped"),
            mk("u2", "shop", 11, "Your order milk powder has been shipped"),
            mk("u1", "news", 12, "Daily digest is ready"),
        ])
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let corpus = sample();
        save_corpus(&corpus, &path).unwrap();
        let loaded = load_corpus(&path).unwrap();
        assert_eq!(loaded, corpus);
    }

    #[test]
    fn missing_field_names_field_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(
            &path,
            "{\"user_id\":\"u1\",\"app_id\":\"a\",\"timestamp\":1,\"text\":\"hi there\"}\n{\"app_id\":\"a\",\"timestamp\":2,\"text\":\"hi\"}\n",
        )
        .unwrap();
        let err = load_corpus(&path).unwrap_err();
        assert_eq!(err.to_string(), "missing field user_id at line 2");
    }

    #[test]
    fn malformed_line_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(&path, "not json\n").unwrap();
        match load_corpus(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_corpus(&path).unwrap().is_empty());
    }

    #[test]
    fn indices_cover_all_notifications() {
        let corpus = sample();
        let by_user: usize = corpus.users().map(|u| corpus.of_user(u).len()).sum();
        let by_app: usize = corpus.apps().map(|a| corpus.of_app(a).len()).sum();
        assert_eq!(by_user, corpus.len());
        assert_eq!(by_app, corpus.len());
    }
}
