//! Brute-force reference semantics, kept deliberately separate from the
//! engine: no shared helpers, plain loops and string comparisons.

use consentry_core::rules::{Atom, Condition, PolicyPred, RuleSet, StmtPred};
use consentry_core::{Action, Category, DataSchema, PrivacyPolicy};
use sha2::{Digest, Sha256};

/// Flat copy of the schema table: (path, category).
pub struct Table {
    rows: Vec<(String, Category)>,
}

impl Table {
    pub fn new(schema: &DataSchema) -> Self {
        Table {
            rows: schema.elements().map(|e| (e.path.clone(), e.category)).collect(),
        }
    }

    /// Leaves named by `r`: the element itself, or everything below it.
    /// Unknown references stand for themselves.
    pub fn leaves(&self, r: &str) -> Vec<String> {
        let mut out = Vec::new();
        for (path, _) in &self.rows {
            let below = path.len() > r.len()
                && path.starts_with(r)
                && path.as_bytes()[r.len()] == b'.';
            if path == r || below {
                out.push(path.clone());
            }
        }
        if out.is_empty() {
            out.push(r.to_string());
        }
        out.sort();
        out
    }

    fn category(&self, leaf: &str) -> Option<Category> {
        for (path, c) in &self.rows {
            if path == leaf {
                return Some(*c);
            }
        }
        None
    }

    fn statement_leaves(&self, policy: &PrivacyPolicy, i: usize) -> Vec<String> {
        let mut out = Vec::new();
        for r in &policy.statements[i].data_refs {
            for l in self.leaves(r) {
                if !out.contains(&l) {
                    out.push(l);
                }
            }
        }
        out
    }

    pub fn stmt_pred(&self, policy: &PrivacyPolicy, i: usize, pred: &StmtPred) -> bool {
        let s = &policy.statements[i];
        match pred {
            StmtPred::PurposeIncludes(p) => s.purposes.iter().any(|x| x == p),
            StmtPred::PurposeWithin(set) => s.purposes.iter().all(|x| set.iter().any(|y| y == x)),
            StmtPred::RecipientsIncludes(r) => s.recipients.iter().any(|x| x == r),
            StmtPred::RecipientsWithin(set) => {
                s.recipients.iter().all(|x| set.iter().any(|y| y == x))
            }
            StmtPred::RetentionIs(r) => s.retention == *r,
            StmtPred::RetentionIn(set) => set.iter().any(|x| *x == s.retention),
            StmtPred::DataUnder(prefix) => {
                let leaves = self.statement_leaves(policy, i);
                leaves.iter().any(|l| {
                    let segs: Vec<&str> = l.split('.').collect();
                    let want: Vec<&str> = prefix.split('.').collect();
                    want.len() <= segs.len() && segs[..want.len()] == want[..]
                })
            }
            StmtPred::DataIncludes(path) => {
                let leaves = self.statement_leaves(policy, i);
                self.leaves(path).iter().all(|w| leaves.contains(w))
            }
            StmtPred::CategoryIncludes(c) => self
                .statement_leaves(policy, i)
                .iter()
                .any(|l| self.category(l) == Some(*c)),
        }
    }

    pub fn atom(&self, policy: &PrivacyPolicy, atom: &Atom) -> bool {
        let n = policy.statements.len();
        match atom {
            Atom::AnyStatement(p) => {
                for i in 0..n {
                    if self.stmt_pred(policy, i, p) {
                        return true;
                    }
                }
                false
            }
            Atom::AllStatements(p) => {
                for i in 0..n {
                    if !self.stmt_pred(policy, i, p) {
                        return false;
                    }
                }
                true
            }
            Atom::Policy(PolicyPred::HasAnySeal) => !policy.seals.is_empty(),
            Atom::Policy(PolicyPred::HasSeal(name)) => policy.seals.iter().any(|s| s == name),
        }
    }

    pub fn condition(&self, policy: &PrivacyPolicy, c: &Condition) -> bool {
        match c {
            Condition::Atom(a) => self.atom(policy, a),
            Condition::Not(x) => !self.condition(policy, x),
            Condition::And(l, r) => {
                let a = self.condition(policy, l);
                let b = self.condition(policy, r);
                a && b
            }
            Condition::Or(l, r) => {
                let a = self.condition(policy, l);
                let b = self.condition(policy, r);
                a || b
            }
        }
    }

    /// `(action, fired rule, explanation)` for a present policy.
    pub fn decide(&self, policy: &PrivacyPolicy, ruleset: &RuleSet) -> (Action, String, String) {
        for (i, rule) in ruleset.rules.iter().enumerate() {
            if self.condition(policy, &rule.condition) {
                let explanation = match &rule.explanation {
                    Some(e) => e.clone(),
                    None => format!("rule {} matched: {}", i + 1, rule.condition),
                };
                return (rule.action, (i + 1).to_string(), explanation);
            }
        }
        (
            ruleset.default_action,
            "default".to_string(),
            "no rule matched; the ruleset default applies".to_string(),
        )
    }

    /// Requested leaves (request order, first occurrence) that no
    /// statement discloses.
    pub fn uncovered(&self, requested: &[String], policy: &PrivacyPolicy) -> Vec<String> {
        let mut disclosed = Vec::new();
        for i in 0..policy.statements.len() {
            disclosed.extend(self.statement_leaves(policy, i));
        }
        let mut out: Vec<String> = Vec::new();
        for r in requested {
            for l in self.leaves(r) {
                if !disclosed.contains(&l) && !out.contains(&l) {
                    out.push(l);
                }
            }
        }
        out
    }
}

fn escape(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Decision record in the line format the table is stored in. The policy
/// hash is taken over the fixture bytes, which are canonical.
pub fn decision_record(
    table: &Table,
    policy_bytes: &str,
    policy: &PrivacyPolicy,
    ruleset: &RuleSet,
) -> String {
    let (action, fired, explanation) = table.decide(policy, ruleset);
    let hash = hex::encode(Sha256::digest(policy_bytes.as_bytes()));
    format!(
        "action {}\nfired-rule {}\nruleset {}\nexplanation {}\npolicy-hash \"{}\"\n",
        action,
        fired,
        escape(&ruleset.name),
        escape(&explanation),
        hash
    )
}
