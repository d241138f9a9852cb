use std::collections::HashMap;
use std::time::{Duration, Instant};

use chrono::Utc;

use super::{evaluate_at, missing_policy_decision, Decision, FiredRule, OverrideStore};
use crate::hash::ContentHash;
use crate::origin::Origin;
use crate::policy::PrivacyPolicy;
use crate::rules::RuleSet;
use crate::schema::DataSchema;

/// Matches the default policy fetch lifetime.
pub const DEFAULT_CACHE_TTL: Duration = Duration::from_secs(86_400);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub origin: Origin,
    pub policy_hash: Option<ContentHash>,
    pub ruleset_hash: ContentHash,
}

/// In-memory decisions keyed by origin, policy version and ruleset version,
/// so editing preferences or a site changing its policy forces re-evaluation.
#[derive(Debug, Clone)]
pub struct DecisionCache {
    ttl: Duration,
    entries: HashMap<CacheKey, (Decision, Instant)>,
}

impl Default for DecisionCache {
    fn default() -> Self {
        Self::new(DEFAULT_CACHE_TTL)
    }
}

impl DecisionCache {
    pub fn new(ttl: Duration) -> Self {
        DecisionCache {
            ttl,
            entries: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &CacheKey, now: Instant) -> Option<&Decision> {
        self.entries
            .get(key)
            .filter(|(_, at)| now.saturating_duration_since(*at) < self.ttl)
            .map(|(d, _)| d)
    }

    pub fn insert(&mut self, key: CacheKey, decision: Decision, now: Instant) {
        self.entries.insert(key, (decision, now));
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Decision for `origin` given its fetched policy (`None` when missing or
/// unusable). A stored override wins; then a fresh cache entry; otherwise the
/// ruleset is evaluated and the result cached.
pub fn decide_site(
    origin: &Origin,
    policy: Option<&PrivacyPolicy>,
    ruleset: &RuleSet,
    schema: &DataSchema,
    overrides: &OverrideStore,
    cache: &mut DecisionCache,
) -> Decision {
    decide_site_at(origin, policy, ruleset, schema, overrides, cache, Instant::now())
}

pub fn decide_site_at(
    origin: &Origin,
    policy: Option<&PrivacyPolicy>,
    ruleset: &RuleSet,
    schema: &DataSchema,
    overrides: &OverrideStore,
    cache: &mut DecisionCache,
    now: Instant,
) -> Decision {
    let policy_hash = policy.map(PrivacyPolicy::content_hash);
    let override_key = policy_hash.clone().unwrap_or_else(ContentHash::absent);
    if let Some(entry) = overrides.get(origin, &override_key) {
        return Decision {
            action: entry.action.into(),
            fired_rule: FiredRule::Override,
            ruleset_name: ruleset.name.clone(),
            explanation: format!("you chose to {} this site ({} decision)", match entry.action {
                super::OverrideAction::Accept => "allow",
                super::OverrideAction::Block => "block",
            }, entry.scope.as_str()),
            policy_hash,
            decided_at: Utc::now(),
        };
    }

    let key = CacheKey {
        origin: origin.clone(),
        policy_hash,
        ruleset_hash: ruleset.content_hash(),
    };
    if let Some(d) = cache.get(&key, now) {
        return d.clone();
    }
    let decision = match policy {
        Some(p) => evaluate_at(p, ruleset, schema, Utc::now()),
        None => missing_policy_decision(ruleset, Utc::now()),
    };
    cache.insert(key, decision.clone(), now);
    decision
}
