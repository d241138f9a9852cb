use consentry_core::engine::Decision;
use consentry_core::Origin;
use serde::Serialize;

use crate::discovery::{FetchOutcome, PolicyFetchResult};

/// The per-site indicators: policy present, cookies in use, seals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SiteStatus {
    pub origin: Origin,
    pub policy_enabled: bool,
    pub cookies_seen: bool,
    pub seals: Vec<String>,
    pub last_decision: Option<Decision>,
    /// The site's human-readable policy page.
    pub disclosure_uri: Option<String>,
    /// `found`, `not-found` or `fetch-error`; `None` before any fetch.
    pub fetch: Option<&'static str>,
    pub fetch_error: Option<String>,
}

impl SiteStatus {
    pub fn new(origin: Origin) -> Self {
        SiteStatus {
            origin,
            policy_enabled: false,
            cookies_seen: false,
            seals: Vec::new(),
            last_decision: None,
            disclosure_uri: None,
            fetch: None,
            fetch_error: None,
        }
    }

    /// Replaces the policy-derived fields with the latest fetch.
    pub fn apply_fetch(&mut self, fetch: &PolicyFetchResult) {
        self.fetch_error = None;
        match &fetch.outcome {
            FetchOutcome::Found { policy, .. } => {
                self.policy_enabled = true;
                self.seals = policy.seals.iter().cloned().collect();
                self.disclosure_uri = Some(policy.disclosure_uri.clone());
                self.fetch = Some("found");
            }
            FetchOutcome::NotFound => {
                self.clear_policy();
                self.fetch = Some("not-found");
            }
            FetchOutcome::FetchError { reason } => {
                self.clear_policy();
                self.fetch = Some("fetch-error");
                self.fetch_error = Some(reason.clone());
            }
        }
    }

    fn clear_policy(&mut self) {
        self.policy_enabled = false;
        self.seals.clear();
        self.disclosure_uri = None;
    }
}
