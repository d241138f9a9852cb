//! Locating and fetching a site's policy.
//!
//! The agent asks for `<origin>/.well-known/privacy-policy.ppf`. When that is
//! a 404 it falls back to the URI named by a `Privacy-Policy` response header,
//! either on the 404 itself or seen earlier on ordinary traffic.

use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use consentry_core::{parse_policy, DataSchema, Origin, PrivacyPolicy};
use serde::Serialize;

pub const WELL_KNOWN_PATH: &str = "/.well-known/privacy-policy.ppf";
pub const POLICY_HEADER: &str = "privacy-policy";
pub const DEFAULT_TTL: Duration = Duration::from_secs(86_400);
/// Failed fetches are retried sooner than successful ones are refreshed.
pub const ERROR_TTL: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicySource {
    WellKnown,
    Header,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "outcome")]
pub enum FetchOutcome {
    Found {
        #[serde(skip)]
        policy: Arc<PrivacyPolicy>,
        raw: String,
        source: PolicySource,
        /// Where the policy was fetched from.
        uri: String,
    },
    NotFound,
    FetchError { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicyFetchResult {
    #[serde(flatten)]
    pub outcome: FetchOutcome,
    pub fetched_at: DateTime<Utc>,
    /// Seconds the result stays fresh.
    pub ttl: u64,
}

impl PolicyFetchResult {
    pub fn policy(&self) -> Option<&Arc<PrivacyPolicy>> {
        match &self.outcome {
            FetchOutcome::Found { policy, .. } => Some(policy),
            _ => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self.outcome, FetchOutcome::Found { .. })
    }

    fn new(outcome: FetchOutcome, ttl: Duration) -> Self {
        PolicyFetchResult {
            outcome,
            fetched_at: Utc::now(),
            ttl: ttl.as_secs(),
        }
    }

    fn error(reason: impl Into<String>) -> Self {
        Self::new(FetchOutcome::FetchError { reason: reason.into() }, ERROR_TTL)
    }
}

/// `max-age` from a Cache-Control value.
pub fn max_age(cache_control: &str) -> Option<Duration> {
    cache_control.split(',').find_map(|d| {
        let (k, v) = d.trim().split_once('=')?;
        if k.trim().eq_ignore_ascii_case("max-age") {
            v.trim().trim_matches('"').parse().ok().map(Duration::from_secs)
        } else {
            None
        }
    })
}

#[derive(Clone)]
pub struct Discoverer {
    client: reqwest::Client,
}

enum Fetched {
    Ok { body: String, ttl: Duration, uri: String },
    NotFound { hint: Option<String> },
    Err(String),
}

impl Discoverer {
    pub fn new(timeout: Duration) -> Self {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .redirect(reqwest::redirect::Policy::limited(5))
            .no_proxy()
            .build()
            .expect("static client configuration");
        Discoverer { client }
    }

    async fn get(&self, uri: &str) -> Fetched {
        let resp = match self.client.get(uri).send().await {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Fetched::Err("timeout".into()),
            Err(e) => return Fetched::Err(format!("network: {}", root_cause(&e))),
        };
        let header = |name: &str| {
            resp.headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string)
        };
        if resp.status() == reqwest::StatusCode::NOT_FOUND {
            return Fetched::NotFound {
                hint: header(POLICY_HEADER),
            };
        }
        if !resp.status().is_success() {
            return Fetched::Err(format!("status {}", resp.status().as_u16()));
        }
        let ttl = header("cache-control")
            .as_deref()
            .and_then(max_age)
            .unwrap_or(DEFAULT_TTL);
        let uri = resp.url().to_string();
        match resp.text().await {
            Ok(body) => Fetched::Ok { body, ttl, uri },
            Err(e) if e.is_timeout() => Fetched::Err("timeout".into()),
            Err(e) => Fetched::Err(format!("network: {}", root_cause(&e))),
        }
    }

    /// Fetches the policy for `origin`. `hint` is a `Privacy-Policy` header
    /// value previously observed from the origin.
    pub async fn discover(
        &self,
        origin: &Origin,
        hint: Option<&str>,
        schema: &DataSchema,
    ) -> PolicyFetchResult {
        let well_known = origin.join(WELL_KNOWN_PATH);
        let (fetched, source) = match self.get(&well_known).await {
            Fetched::NotFound { hint: on_404 } => match on_404.as_deref().or(hint) {
                Some(h) => match absolute(origin, h) {
                    Some(uri) => (self.get(&uri).await, PolicySource::Header),
                    None => return PolicyFetchResult::error(format!("bad Privacy-Policy header '{h}'")),
                },
                None => return PolicyFetchResult::new(FetchOutcome::NotFound, DEFAULT_TTL),
            },
            other => (other, PolicySource::WellKnown),
        };
        match fetched {
            Fetched::Ok { body, ttl, uri } => match parse_policy(&body, schema) {
                Ok(policy) => PolicyFetchResult::new(
                    FetchOutcome::Found {
                        policy: Arc::new(policy),
                        raw: body,
                        source,
                        uri,
                    },
                    ttl,
                ),
                Err(e) => PolicyFetchResult::error(format!("parse: {e}")),
            },
            Fetched::NotFound { .. } => PolicyFetchResult::new(FetchOutcome::NotFound, DEFAULT_TTL),
            Fetched::Err(reason) => PolicyFetchResult::error(reason),
        }
    }
}

/// The header should carry an absolute URI; a path is tolerated and taken
/// relative to the origin.
fn absolute(origin: &Origin, value: &str) -> Option<String> {
    let value = value.trim();
    match url::Url::parse(value) {
        Ok(u) if matches!(u.scheme(), "http" | "https") => Some(u.to_string()),
        Ok(_) => None,
        Err(_) if value.starts_with('/') => Some(origin.join(value)),
        Err(_) => None,
    }
}

fn root_cause(e: &dyn std::error::Error) -> String {
    let mut cur = e;
    while let Some(next) = cur.source() {
        cur = next;
    }
    cur.to_string()
}
