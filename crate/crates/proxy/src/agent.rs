//! Shared agent state: policies, decisions, site status, prompts and the
//! user's stores. Handlers on both listeners go through [`Agent`].

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use consentry_core::engine::{
    decide_site, load_overrides, save_overrides, Decision, DecisionCache, OverrideAction,
    OverrideStore, Scope,
};
use consentry_core::repository::{load_repository, save_repository, RepoError};
use consentry_core::rules::ruleset_warnings;
use consentry_core::{
    parse_ruleset, render_policy_english, Action, ContentHash, DataSchema, Origin, ParseError,
    Repository, RuleSet, ValidationIssue,
};
use tokio::sync::{broadcast, oneshot};

use crate::config::{Config, ConfigError};
use crate::discovery::{Discoverer, FetchOutcome, PolicyFetchResult};
use crate::events::Event;
use crate::prompts::{Outcome, PendingPrompt, PromptError, PromptRegistry, Remember, Resolution};
use crate::status::SiteStatus;

struct CachedFetch {
    result: PolicyFetchResult,
    at: Instant,
}

impl CachedFetch {
    fn fresh(&self, now: Instant, hint_seen: Option<Instant>) -> bool {
        let expired = now.saturating_duration_since(self.at).as_secs() >= self.result.ttl;
        // a header seen after a miss may point at the policy
        let stale_miss = !self.result.is_found() && hint_seen.is_some_and(|h| h > self.at);
        !expired && !stale_miss
    }
}

/// Overrides and the decision cache sit behind one lock so that deciding for
/// a site is linearizable with recording an override for it.
struct Decisions {
    overrides: OverrideStore,
    cache: DecisionCache,
}

type FetchSlot = Arc<tokio::sync::Mutex<Option<CachedFetch>>>;

pub struct Agent {
    config: Config,
    schema: DataSchema,
    ruleset: RwLock<Arc<RuleSet>>,
    decisions: Mutex<Decisions>,
    fetches: Mutex<HashMap<Origin, FetchSlot>>,
    hints: Mutex<HashMap<Origin, (String, Instant)>>,
    statuses: Mutex<BTreeMap<Origin, SiteStatus>>,
    prompts: PromptRegistry,
    repository: Mutex<Repository>,
    events: broadcast::Sender<Event>,
    discoverer: Discoverer,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Repo(#[from] RepoError),
    #[error("saving {0}")]
    Io(String),
}

impl Agent {
    pub fn new(config: Config) -> Result<Arc<Agent>, ConfigError> {
        let schema = config.load_schema()?;
        let ruleset = config.load_ruleset()?;
        let overrides = match &config.overrides {
            Some(path) => load_overrides(path).map_err(|e| ConfigError::Invalid {
                path: path.display().to_string(),
                message: e.to_string(),
            })?,
            None => OverrideStore::new(),
        };
        let repository = match &config.repository {
            Some(path) if path.exists() => load_repository(path, &schema).map_err(|e| {
                ConfigError::Invalid {
                    path: path.display().to_string(),
                    message: e.to_string(),
                }
            })?,
            _ => Repository::new(),
        };
        let (events, _) = broadcast::channel(1024);
        Ok(Arc::new(Agent {
            discoverer: Discoverer::new(config.fetch_timeout()),
            config,
            schema,
            ruleset: RwLock::new(Arc::new(ruleset)),
            decisions: Mutex::new(Decisions {
                overrides,
                cache: DecisionCache::default(),
            }),
            fetches: Mutex::new(HashMap::new()),
            hints: Mutex::new(HashMap::new()),
            statuses: Mutex::new(BTreeMap::new()),
            prompts: PromptRegistry::new(),
            repository: Mutex::new(repository),
            events,
        }))
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn schema(&self) -> &DataSchema {
        &self.schema
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Event> {
        self.events.subscribe()
    }

    fn emit(&self, event: Event) {
        // no subscribers is fine
        let _ = self.events.send(event);
    }

    fn update_status(&self, origin: &Origin, f: impl FnOnce(&mut SiteStatus)) {
        let changed = {
            let mut statuses = self.statuses.lock().unwrap();
            let status = statuses
                .entry(origin.clone())
                .or_insert_with(|| SiteStatus::new(origin.clone()));
            let before = status.clone();
            f(status);
            (*status != before).then(|| status.clone())
        };
        if let Some(status) = changed {
            self.emit(Event::StatusChanged { status });
        }
    }

    /// Current status; unknown origins get the zero state.
    pub fn site_status(&self, origin: &Origin) -> SiteStatus {
        self.statuses
            .lock()
            .unwrap()
            .get(origin)
            .cloned()
            .unwrap_or_else(|| SiteStatus::new(origin.clone()))
    }

    pub fn statuses(&self) -> Vec<SiteStatus> {
        self.statuses.lock().unwrap().values().cloned().collect()
    }

    /// Latches `cookies-seen` for the origin.
    pub fn saw_cookie(&self, origin: &Origin) {
        self.update_status(origin, |s| s.cookies_seen = true);
    }

    /// Remembers a `Privacy-Policy` header value from ordinary traffic.
    pub fn saw_policy_header(&self, origin: &Origin, value: &str) {
        let mut hints = self.hints.lock().unwrap();
        match hints.get(origin) {
            Some((v, _)) if v == value => {}
            _ => {
                hints.insert(origin.clone(), (value.to_string(), Instant::now()));
            }
        }
    }

    /// The site's policy, from the fetch cache or a new discovery.
    /// Concurrent callers for one origin share a single fetch.
    pub async fn policy_for(&self, origin: &Origin) -> PolicyFetchResult {
        let slot = self
            .fetches
            .lock()
            .unwrap()
            .entry(origin.clone())
            .or_default()
            .clone();
        let mut slot = slot.lock().await;
        let hint = self.hints.lock().unwrap().get(origin).cloned();
        if let Some(cached) = slot.as_ref() {
            if cached.fresh(Instant::now(), hint.as_ref().map(|h| h.1)) {
                return cached.result.clone();
            }
        }
        let result = self
            .discoverer
            .discover(origin, hint.as_ref().map(|h| h.0.as_str()), &self.schema)
            .await;
        if let FetchOutcome::FetchError { reason } = &result.outcome {
            tracing::warn!(%origin, %reason, "policy fetch failed");
        }
        self.update_status(origin, |s| s.apply_fetch(&result));
        *slot = Some(CachedFetch {
            result: result.clone(),
            at: Instant::now(),
        });
        result
    }

    /// Latest fetch without triggering discovery.
    pub async fn cached_policy(&self, origin: &Origin) -> Option<PolicyFetchResult> {
        let slot = self.fetches.lock().unwrap().get(origin).cloned()?;
        let slot = slot.lock().await;
        slot.as_ref().map(|c| c.result.clone())
    }

    pub fn ruleset(&self) -> Arc<RuleSet> {
        self.ruleset.read().unwrap().clone()
    }

    /// Decision for the origin's current policy. Parse and fetch failures
    /// count as a missing policy.
    pub async fn decide(&self, origin: &Origin) -> (Decision, PolicyFetchResult) {
        let fetch = self.policy_for(origin).await;
        let ruleset = self.ruleset();
        let decision = {
            let mut d = self.decisions.lock().unwrap();
            let Decisions { overrides, cache } = &mut *d;
            decide_site(
                origin,
                fetch.policy().map(|p| p.as_ref()),
                &ruleset,
                &self.schema,
                overrides,
                cache,
            )
        };
        self.update_status(origin, |s| s.last_decision = Some(decision.clone()));
        self.emit(Event::Decision {
            origin: origin.clone(),
            decision: decision.clone(),
        });
        if decision.action == Action::Inform {
            self.emit(Event::Notice {
                origin: origin.clone(),
                decision: decision.clone(),
            });
        }
        (decision, fetch)
    }

    /// Opens a prompt for a warn decision. It resolves as timed-out if nobody
    /// answers within the configured timeout.
    pub fn open_prompt(
        self: &Arc<Self>,
        origin: &Origin,
        decision: Decision,
        fetch: &PolicyFetchResult,
    ) -> (PendingPrompt, oneshot::Receiver<Outcome>) {
        let (summary, disclosure) = match fetch.policy() {
            Some(p) => (render_policy_english(p), Some(p.disclosure_uri.clone())),
            None => ("This site publishes no usable privacy policy.\n".to_string(), None),
        };
        let (prompt, rx) = self.prompts.open(origin.clone(), decision, summary, disclosure);
        self.emit(Event::PromptCreated {
            prompt: prompt.clone(),
        });
        let agent = Arc::clone(self);
        let id = prompt.id.clone();
        let timeout = self.config.warn_timeout();
        tokio::spawn(async move {
            tokio::time::sleep(timeout).await;
            if let Ok(p) = agent.prompts.settle(&id, Outcome::TimedOut) {
                agent.emit(Event::PromptResolved { prompt: p });
            }
        });
        (prompt, rx)
    }

    pub fn pending_prompts(&self) -> Vec<PendingPrompt> {
        self.prompts.pending()
    }

    pub fn prompt(&self, id: &str) -> Option<PendingPrompt> {
        self.prompts.get(id)
    }

    /// First resolution wins. With `remember`, the choice becomes an
    /// override for this origin and policy version.
    pub fn resolve_prompt(
        &self,
        id: &str,
        resolution: Resolution,
        remember: Remember,
    ) -> Result<PendingPrompt, PromptError> {
        let prompt = self.prompts.settle(id, resolution.into())?;
        let scope = match remember {
            Remember::None => None,
            Remember::Session => Some(Scope::Session),
            Remember::Persistent => Some(Scope::Persistent),
        };
        if let Some(scope) = scope {
            let action = match resolution {
                Resolution::Allow => OverrideAction::Accept,
                Resolution::Block => OverrideAction::Block,
            };
            let hash = prompt
                .decision
                .policy_hash
                .clone()
                .unwrap_or_else(ContentHash::absent);
            self.record_override(&prompt.origin, hash, action, scope);
        }
        self.emit(Event::PromptResolved {
            prompt: prompt.clone(),
        });
        Ok(prompt)
    }

    pub fn record_override(&self, origin: &Origin, hash: ContentHash, action: OverrideAction, scope: Scope) {
        let mut d = self.decisions.lock().unwrap();
        d.overrides.record(origin.clone(), hash, action.into(), scope).expect("accept or block");
        if scope == Scope::Persistent {
            if let Some(path) = &self.config.overrides {
                if let Err(e) = save_overrides(&d.overrides, path) {
                    tracing::error!(error = %e, "could not save overrides");
                }
            }
        }
    }

    pub fn overrides(&self) -> OverrideStore {
        self.decisions.lock().unwrap().overrides.clone()
    }

    /// Replaces the active ruleset. Warnings are returned, not fatal.
    pub fn set_ruleset(&self, text: &str) -> Result<Vec<ValidationIssue>, ParseError> {
        let ruleset = parse_ruleset(text)?;
        let warnings = ruleset_warnings(&ruleset, &self.schema);
        if let Some(path) = self.config.ruleset_file() {
            if let Err(e) = write_file(&path, &ruleset.to_text()) {
                tracing::error!(error = %e, path = %path.display(), "could not save ruleset");
            }
        }
        *self.ruleset.write().unwrap() = Arc::new(ruleset);
        Ok(warnings)
    }

    pub fn repository(&self) -> Repository {
        self.repository.lock().unwrap().clone()
    }

    pub fn repo_set(&self, path: &str, raw: &str) -> Result<(), StoreError> {
        let mut repo = self.repository.lock().unwrap();
        repo.set(&self.schema, path, raw)?;
        self.save_repository(&repo)
    }

    pub fn repo_delete(&self, path: &str) -> Result<bool, StoreError> {
        let mut repo = self.repository.lock().unwrap();
        let existed = repo.delete(&self.schema, path)?.is_some();
        self.save_repository(&repo)?;
        Ok(existed)
    }

    fn save_repository(&self, repo: &Repository) -> Result<(), StoreError> {
        match &self.config.repository {
            Some(path) => save_repository(repo, path).map_err(|e| StoreError::Io(e.to_string())),
            None => Ok(()),
        }
    }
}

fn write_file(path: &Path, text: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(tmp, path)
}
