use consentry_core::engine::Decision;
use consentry_core::Origin;
use serde::Serialize;

use crate::prompts::PendingPrompt;
use crate::status::SiteStatus;

/// Everything pushed to `/api/events`. The SSE event name is the `kind`.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Event {
    PromptCreated { prompt: PendingPrompt },
    PromptResolved { prompt: PendingPrompt },
    Notice { origin: Origin, decision: Decision },
    StatusChanged { status: SiteStatus },
    Decision { origin: Origin, decision: Decision },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::PromptCreated { .. } => "prompt-created",
            Event::PromptResolved { .. } => "prompt-resolved",
            Event::Notice { .. } => "notice",
            Event::StatusChanged { .. } => "status-changed",
            Event::Decision { .. } => "decision",
        }
    }
}
