//! Matching a site's disclosure against the user's rules.
//!
//! [`evaluate`] is a pure first-match walk over the ruleset. [`decide_site`]
//! layers remembered user overrides and a decision cache on top of it.

mod overrides;
mod site;

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Serialize, Serializer};

pub use overrides::{
    load_overrides, save_overrides, InvalidAction, OverrideAction, OverrideEntry, OverrideFileError,
    OverrideStore, Scope,
};
pub use site::{decide_site, decide_site_at, CacheKey, DecisionCache, DEFAULT_CACHE_TTL};

use crate::hash::ContentHash;
use crate::policy::{PrivacyPolicy, Statement};
use crate::rules::{Atom, Condition, PolicyPred, RuleSet, StmtPred};
use crate::schema::{is_under, DataSchema};
use crate::syntax::quote;
use crate::vocab::Action;

/// Which part of the ruleset (or agent state) produced a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiredRule {
    /// 1-based rule position.
    Rule(usize),
    Default,
    MissingPolicy,
    Override,
}

impl fmt::Display for FiredRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FiredRule::Rule(n) => write!(f, "{n}"),
            FiredRule::Default => f.write_str("default"),
            FiredRule::MissingPolicy => f.write_str("missing-policy"),
            FiredRule::Override => f.write_str("override"),
        }
    }
}

impl Serialize for FiredRule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decision {
    pub action: Action,
    pub fired_rule: FiredRule,
    pub ruleset_name: String,
    pub explanation: String,
    /// `None` when the site had no usable policy.
    pub policy_hash: Option<ContentHash>,
    pub decided_at: DateTime<Utc>,
}

impl Decision {
    /// Line-oriented `key value` form, without the timestamp so the output is
    /// stable for fixed inputs.
    pub fn to_text(&self) -> String {
        let hash = match &self.policy_hash {
            Some(h) => quote(h.as_str()),
            None => "none".to_string(),
        };
        format!(
            "action {}\nfired-rule {}\nruleset {}\nexplanation {}\npolicy-hash {}\n",
            self.action,
            self.fired_rule,
            quote(&self.ruleset_name),
            quote(&self.explanation),
            hash
        )
    }
}

/// Resolved leaves of every statement, computed once per evaluation.
struct Resolved<'a> {
    policy: &'a PrivacyPolicy,
    schema: &'a DataSchema,
    leaves: Vec<BTreeSet<String>>,
}

impl<'a> Resolved<'a> {
    fn new(policy: &'a PrivacyPolicy, schema: &'a DataSchema) -> Self {
        let leaves = (0..policy.statements.len())
            .map(|i| policy.statement_leaves(i, schema))
            .collect();
        Resolved {
            policy,
            schema,
            leaves,
        }
    }

    fn stmt(&self, i: usize, s: &Statement, pred: &StmtPred) -> bool {
        let leaves = &self.leaves[i];
        match pred {
            StmtPred::PurposeIncludes(p) => s.purposes.contains(p),
            StmtPred::PurposeWithin(set) => s.purposes.is_subset(set),
            StmtPred::RecipientsIncludes(r) => s.recipients.contains(r),
            StmtPred::RecipientsWithin(set) => s.recipients.is_subset(set),
            StmtPred::RetentionIs(r) => s.retention == *r,
            StmtPred::RetentionIn(set) => set.contains(&s.retention),
            StmtPred::DataUnder(prefix) => leaves.iter().any(|l| is_under(l, prefix)),
            StmtPred::DataIncludes(path) => {
                let wanted = self
                    .schema
                    .resolve_refs(path)
                    .unwrap_or_else(|_| vec![path.clone()]);
                wanted.iter().all(|w| leaves.contains(w))
            }
            StmtPred::CategoryIncludes(c) => leaves
                .iter()
                .any(|l| self.schema.get(l).is_some_and(|e| e.category == *c)),
        }
    }

    fn atom(&self, atom: &Atom) -> bool {
        let mut stmts = self.policy.statements.iter().enumerate();
        match atom {
            Atom::AnyStatement(p) => stmts.any(|(i, s)| self.stmt(i, s, p)),
            Atom::AllStatements(p) => stmts.all(|(i, s)| self.stmt(i, s, p)),
            Atom::Policy(PolicyPred::HasAnySeal) => !self.policy.seals.is_empty(),
            Atom::Policy(PolicyPred::HasSeal(name)) => self.policy.seals.contains(name),
        }
    }

    fn condition(&self, c: &Condition) -> bool {
        match c {
            Condition::Atom(a) => self.atom(a),
            Condition::Not(x) => !self.condition(x),
            Condition::And(l, r) => self.condition(l) && self.condition(r),
            Condition::Or(l, r) => self.condition(l) || self.condition(r),
        }
    }
}

/// Truth of one condition atom against a policy. `all-statements` is
/// vacuously true for a policy with no statements.
pub fn eval_atom(policy: &PrivacyPolicy, atom: &Atom, schema: &DataSchema) -> bool {
    Resolved::new(policy, schema).atom(atom)
}

pub fn eval_condition(policy: &PrivacyPolicy, condition: &Condition, schema: &DataSchema) -> bool {
    Resolved::new(policy, schema).condition(condition)
}

/// First matching rule wins; otherwise the ruleset default.
pub fn evaluate(policy: &PrivacyPolicy, ruleset: &RuleSet, schema: &DataSchema) -> Decision {
    evaluate_at(policy, ruleset, schema, Utc::now())
}

pub fn evaluate_at(
    policy: &PrivacyPolicy,
    ruleset: &RuleSet,
    schema: &DataSchema,
    now: DateTime<Utc>,
) -> Decision {
    let resolved = Resolved::new(policy, schema);
    let hit = ruleset
        .rules
        .iter()
        .enumerate()
        .find(|(_, r)| resolved.condition(&r.condition));
    let (action, fired_rule, explanation) = match hit {
        Some((i, rule)) => (
            rule.action,
            FiredRule::Rule(i + 1),
            rule.explanation
                .clone()
                .unwrap_or_else(|| format!("rule {} matched: {}", i + 1, rule.condition)),
        ),
        None => (
            ruleset.default_action,
            FiredRule::Default,
            "no rule matched; the ruleset default applies".to_string(),
        ),
    };
    Decision {
        action,
        fired_rule,
        ruleset_name: ruleset.name.clone(),
        explanation,
        policy_hash: Some(policy.content_hash()),
        decided_at: now,
    }
}

/// Decision for a site that publishes no usable policy.
pub fn missing_policy_decision(ruleset: &RuleSet, now: DateTime<Utc>) -> Decision {
    Decision {
        action: ruleset.on_missing_policy,
        fired_rule: FiredRule::MissingPolicy,
        ruleset_name: ruleset.name.clone(),
        explanation: "this site publishes no usable privacy policy".to_string(),
        policy_hash: None,
        decided_at: now,
    }
}
