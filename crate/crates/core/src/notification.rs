//! The notification record shared by every stage.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::TokenSeq;

/// Opaque user identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub String);

/// Opaque app identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AppId(pub String);

impl UserId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl AppId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UserId {
    fn from(s: &str) -> Self {
        UserId(s.to_string())
    }
}

impl From<&str> for AppId {
    fn from(s: &str) -> Self {
        AppId(s.to_string())
    }
}

impl From<String> for UserId {
    fn from(s: String) -> Self {
        UserId(s)
    }
}

impl From<String> for AppId {
    fn from(s: String) -> Self {
        AppId(s)
    }
}

/// One delivered message: title and body tokens concatenated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub user_id: UserId,
    pub app_id: AppId,
    /// Epoch seconds.
    pub timestamp: i64,
    pub tokens: TokenSeq,
}

impl Notification {
    /// Build a notification, enforcing non-empty ids and tokens.
    pub fn new(user_id: UserId, app_id: AppId, timestamp: i64, tokens: TokenSeq) -> Result<Self> {
        if user_id.0.is_empty() {
            return Err(Error::InvalidInput("empty user_id".into()));
        }
        if app_id.0.is_empty() {
            return Err(Error::InvalidInput("empty app_id".into()));
        }
        if tokens.is_empty() {
            return Err(Error::InvalidInput("empty token sequence".into()));
        }
        Ok(Notification {
            user_id,
            app_id,
            timestamp,
            tokens,
        })
    }
}
