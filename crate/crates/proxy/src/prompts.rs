//! Warn decisions waiting for the user.

use std::collections::HashMap;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use consentry_core::engine::Decision;
use consentry_core::Origin;
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resolution {
    Allow,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Remember {
    #[default]
    None,
    Session,
    Persistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "state", content = "outcome")]
pub enum PromptState {
    Pending,
    Resolved(Outcome),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Allow,
    Block,
    TimedOut,
}

impl From<Resolution> for Outcome {
    fn from(r: Resolution) -> Self {
        match r {
            Resolution::Allow => Outcome::Allow,
            Resolution::Block => Outcome::Block,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PendingPrompt {
    pub id: String,
    pub origin: Origin,
    pub decision: Decision,
    /// English rendering of the site's policy.
    pub summary: String,
    pub disclosure_uri: Option<String>,
    pub created_at: DateTime<Utc>,
    #[serde(flatten)]
    pub state: PromptState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptError {
    #[error("unknown prompt")]
    UnknownId,
    #[error("prompt already resolved")]
    AlreadyResolved,
}

struct Slot {
    prompt: PendingPrompt,
    waiter: Option<oneshot::Sender<Outcome>>,
}

/// Resolve-once registry. The first transition out of `pending` wins; later
/// attempts get `AlreadyResolved`.
#[derive(Default)]
pub struct PromptRegistry {
    slots: Mutex<HashMap<String, Slot>>,
}

impl PromptRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a prompt; the receiver yields its outcome.
    pub fn open(
        &self,
        origin: Origin,
        decision: Decision,
        summary: String,
        disclosure_uri: Option<String>,
    ) -> (PendingPrompt, oneshot::Receiver<Outcome>) {
        let (tx, rx) = oneshot::channel();
        let prompt = PendingPrompt {
            id: uuid::Uuid::new_v4().simple().to_string(),
            origin,
            decision,
            summary,
            disclosure_uri,
            created_at: Utc::now(),
            state: PromptState::Pending,
        };
        self.slots.lock().unwrap().insert(
            prompt.id.clone(),
            Slot {
                prompt: prompt.clone(),
                waiter: Some(tx),
            },
        );
        (prompt, rx)
    }

    pub fn get(&self, id: &str) -> Option<PendingPrompt> {
        self.slots.lock().unwrap().get(id).map(|s| s.prompt.clone())
    }

    /// Pending prompts, oldest first.
    pub fn pending(&self) -> Vec<PendingPrompt> {
        let mut out: Vec<PendingPrompt> = self
            .slots
            .lock()
            .unwrap()
            .values()
            .filter(|s| s.prompt.state == PromptState::Pending)
            .map(|s| s.prompt.clone())
            .collect();
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        out
    }

    /// Moves a pending prompt to `outcome` and wakes the held request.
    pub fn settle(&self, id: &str, outcome: Outcome) -> Result<PendingPrompt, PromptError> {
        let mut slots = self.slots.lock().unwrap();
        let slot = slots.get_mut(id).ok_or(PromptError::UnknownId)?;
        if slot.prompt.state != PromptState::Pending {
            return Err(PromptError::AlreadyResolved);
        }
        slot.prompt.state = PromptState::Resolved(outcome);
        if let Some(tx) = slot.waiter.take() {
            // the request may already have gone away
            let _ = tx.send(outcome);
        }
        Ok(slot.prompt.clone())
    }
}
