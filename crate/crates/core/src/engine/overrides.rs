//! Remembered user decisions, keyed by origin and policy version.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;

use crate::error::ParseError;
use crate::hash::ContentHash;
use crate::origin::Origin;
use crate::syntax::{quote, Cursor, Tok};
use crate::vocab::Action;

/// Only standing decisions can be remembered; `inform` and `warn` are
/// moments, not answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverrideAction {
    Accept,
    Block,
}

impl From<OverrideAction> for Action {
    fn from(a: OverrideAction) -> Action {
        match a {
            OverrideAction::Accept => Action::Accept,
            OverrideAction::Block => Action::Block,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("'{0}' cannot be stored as an override (only accept or block)")]
pub struct InvalidAction(pub Action);

impl TryFrom<Action> for OverrideAction {
    type Error = InvalidAction;

    fn try_from(a: Action) -> Result<Self, Self::Error> {
        match a {
            Action::Accept => Ok(OverrideAction::Accept),
            Action::Block => Ok(OverrideAction::Block),
            other => Err(InvalidAction(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    /// Forgotten when the agent restarts.
    Session,
    Persistent,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Session => "session",
            Scope::Persistent => "persistent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverrideEntry {
    pub action: OverrideAction,
    pub scope: Scope,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OverrideStore {
    entries: BTreeMap<(Origin, ContentHash), OverrideEntry>,
}

impl OverrideStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, origin: &Origin, policy_hash: &ContentHash) -> Option<&OverrideEntry> {
        self.entries.get(&(origin.clone(), policy_hash.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Origin, &ContentHash, &OverrideEntry)> {
        self.entries.iter().map(|((o, h), e)| (o, h, e))
    }

    /// Upserts an override. `inform` and `warn` are rejected.
    pub fn record(
        &mut self,
        origin: Origin,
        policy_hash: ContentHash,
        action: Action,
        scope: Scope,
    ) -> Result<(), InvalidAction> {
        self.record_at(origin, policy_hash, action, scope, Utc::now())
    }

    pub fn record_at(
        &mut self,
        origin: Origin,
        policy_hash: ContentHash,
        action: Action,
        scope: Scope,
        created_at: DateTime<Utc>,
    ) -> Result<(), InvalidAction> {
        let action = OverrideAction::try_from(action)?;
        self.entries.insert(
            (origin, policy_hash),
            OverrideEntry {
                action,
                scope,
                created_at,
            },
        );
        Ok(())
    }

    pub fn remove(&mut self, origin: &Origin, policy_hash: &ContentHash) -> Option<OverrideEntry> {
        self.entries.remove(&(origin.clone(), policy_hash.clone()))
    }

    /// Persistent entries only, in key order.
    pub fn to_text(&self) -> String {
        let mut out = String::from("overrides {\n");
        for ((origin, hash), e) in &self.entries {
            if e.scope != Scope::Persistent {
                continue;
            }
            let action = match e.action {
                OverrideAction::Accept => "accept",
                OverrideAction::Block => "block",
            };
            out.push_str(&format!(
                "  entry {} {} {action} persistent {}\n",
                quote(&origin.to_string()),
                quote(hash.as_str()),
                quote(&e.created_at.to_rfc3339_opts(SecondsFormat::AutoSi, true)),
            ));
        }
        out.push_str("}\n");
        out
    }

    pub fn parse(text: &str) -> Result<OverrideStore, ParseError> {
        let mut c = Cursor::new(text);
        c.expect_keyword("overrides")?;
        c.expect(Tok::LBrace)?;
        let mut store = OverrideStore::new();
        while !c.peek_is(&Tok::RBrace)? {
            c.expect_keyword("entry")?;
            let (o, pos) = c.expect_string()?;
            let origin: Origin = o
                .parse()
                .map_err(|e: crate::origin::InvalidOrigin| ParseError::at(pos, e.to_string()))?;
            let (h, pos) = c.expect_string()?;
            let hash: ContentHash = h.parse().map_err(|e: String| ParseError::at(pos, e))?;
            let (a, pos) = c.expect_ident()?;
            let action = Action::parse_at(&a, pos)?;
            let action = OverrideAction::try_from(action).map_err(|e| ParseError::at(pos, e.to_string()))?;
            let (scope, pos) = c.expect_ident()?;
            if scope != "persistent" {
                return Err(ParseError::at(
                    pos,
                    format!("expected 'persistent', found '{scope}' (session overrides are never stored)"),
                ));
            }
            let (ts, pos) = c.expect_string()?;
            let created_at = DateTime::parse_from_rfc3339(&ts)
                .map_err(|_| ParseError::at(pos, format!("invalid timestamp {}", quote(&ts))))?
                .with_timezone(&Utc);
            store.entries.insert(
                (origin, hash),
                OverrideEntry {
                    action,
                    scope: Scope::Persistent,
                    created_at,
                },
            );
        }
        c.expect(Tok::RBrace)?;
        c.expect_eof()?;
        Ok(store)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OverrideFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
}

/// Loads the store; a missing file is an empty store.
pub fn load_overrides(path: &Path) -> Result<OverrideStore, OverrideFileError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(OverrideStore::new()),
        Err(source) => {
            return Err(OverrideFileError::Io {
                path: path.display().to_string(),
                source,
            })
        }
    };
    OverrideStore::parse(&text).map_err(|source| OverrideFileError::Parse {
        path: path.display().to_string(),
        source,
    })
}

pub fn save_overrides(store: &OverrideStore, path: &Path) -> Result<(), OverrideFileError> {
    let tmp = path.with_extension("ovr.tmp");
    std::fs::write(&tmp, store.to_text())
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|source| OverrideFileError::Io {
            path: path.display().to_string(),
            source,
        })
}
