//! Preference rules (APR): an ordered list of `rule <action> when <condition>`
//! lines evaluated top to bottom, a mandatory `default`, and an
//! `on-missing-policy` directive for sites that publish nothing.

mod parse;
mod presets;

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

pub use parse::{parse_ruleset, ruleset_warnings};
pub use presets::{preset, Preset, UnknownPreset};

use crate::hash::ContentHash;
use crate::syntax::quote;
use crate::vocab::{Action, Category, Purpose, Recipient, Retention};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleSet {
    pub name: String,
    pub rules: Vec<Rule>,
    pub default_action: Action,
    pub on_missing_policy: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rule {
    pub action: Action,
    pub condition: Condition,
    pub explanation: Option<String>,
}

/// Boolean tree over atoms. Binary nodes are left-associative as parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Atom(Atom),
    Not(Box<Condition>),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Atom {
    AnyStatement(StmtPred),
    AllStatements(StmtPred),
    Policy(PolicyPred),
}

/// Predicate over a single statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StmtPred {
    PurposeIncludes(Purpose),
    PurposeWithin(BTreeSet<Purpose>),
    RecipientsIncludes(Recipient),
    RecipientsWithin(BTreeSet<Recipient>),
    RetentionIs(Retention),
    RetentionIn(BTreeSet<Retention>),
    DataUnder(String),
    DataIncludes(String),
    CategoryIncludes(Category),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyPred {
    HasAnySeal,
    HasSeal(String),
}

impl Condition {
    pub fn atom(a: Atom) -> Self {
        Condition::Atom(a)
    }

    pub fn negate(c: Condition) -> Self {
        Condition::Not(Box::new(c))
    }

    pub fn and(l: Condition, r: Condition) -> Self {
        Condition::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Condition, r: Condition) -> Self {
        Condition::Or(Box::new(l), Box::new(r))
    }

    /// Every atom in the tree, left to right.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(c) = stack.pop() {
            match c {
                Condition::Atom(a) => out.push(a),
                Condition::Not(x) => stack.push(x),
                Condition::And(l, r) | Condition::Or(l, r) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Condition::Or(..) => 1,
            Condition::And(..) => 2,
            Condition::Not(_) => 3,
            Condition::Atom(_) => 4,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let wrap = self.precedence() < min;
        if wrap {
            f.write_str("(")?;
        }
        match self {
            Condition::Atom(a) => write!(f, "{a}")?,
            Condition::Not(x) => {
                f.write_str("not ")?;
                x.write(f, 4)?;
            }
            Condition::And(l, r) => {
                l.write(f, 2)?;
                f.write_str(" and ")?;
                r.write(f, 3)?;
            }
            Condition::Or(l, r) => {
                l.write(f, 1)?;
                f.write_str(" or ")?;
                r.write(f, 2)?;
            }
        }
        if wrap {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Minimal parentheses for `not` > `and` > `or`, left-associative.
impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

fn set<T: fmt::Display>(items: &BTreeSet<T>) -> String {
    let parts: Vec<String> = items.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", parts.join(", "))
}

impl fmt::Display for StmtPred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StmtPred::PurposeIncludes(p) => write!(f, "purpose includes {p}"),
            StmtPred::PurposeWithin(s) => write!(f, "purpose within {}", set(s)),
            StmtPred::RecipientsIncludes(r) => write!(f, "recipients includes {r}"),
            StmtPred::RecipientsWithin(s) => write!(f, "recipients within {}", set(s)),
            StmtPred::RetentionIs(r) => write!(f, "retention is {r}"),
            StmtPred::RetentionIn(s) => write!(f, "retention in {}", set(s)),
            StmtPred::DataUnder(p) => write!(f, "data under {p}"),
            StmtPred::DataIncludes(p) => write!(f, "data includes {p}"),
            StmtPred::CategoryIncludes(c) => write!(f, "category includes {c}"),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::AnyStatement(p) => write!(f, "any-statement({p})"),
            Atom::AllStatements(p) => write!(f, "all-statements({p})"),
            Atom::Policy(PolicyPred::HasAnySeal) => f.write_str("policy(has-seal)"),
            Atom::Policy(PolicyPred::HasSeal(name)) => write!(f, "policy(has-seal {})", quote(name)),
        }
    }
}

impl RuleSet {
    /// Canonical APR text. `on-missing-policy` is written only when it
    /// differs from the implied `warn`.
    pub fn to_text(&self) -> String {
        let mut out = format!("ruleset {} {{\n", quote(&self.name));
        if self.on_missing_policy != Action::Warn {
            out.push_str(&format!("  on-missing-policy {}\n", self.on_missing_policy));
        }
        for r in &self.rules {
            out.push_str(&format!("  rule {} when {}", r.action, r.condition));
            if let Some(e) = &r.explanation {
                out.push_str(&format!(" explain {}", quote(e)));
            }
            out.push('\n');
        }
        out.push_str(&format!("  default {}\n}}\n", self.default_action));
        out
    }

    pub fn content_hash(&self) -> ContentHash {
        ContentHash::of(self.to_text().as_bytes())
    }
}

pub fn serialize_ruleset(ruleset: &RuleSet) -> String {
    ruleset.to_text()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(p: Purpose) -> Condition {
        Condition::atom(Atom::AnyStatement(StmtPred::PurposeIncludes(p)))
    }

    #[test]
    fn minimal_parentheses() {
        let x = a(Purpose::Research);
        let y = a(Purpose::Contact);
        let z = a(Purpose::Profiling);
        let c = Condition::and(Condition::negate(x.clone()), y.clone());
        assert_eq!(
            c.to_string(),
            "not any-statement(purpose includes research) and any-statement(purpose includes contact)"
        );
        let c = Condition::and(x.clone(), Condition::or(y.clone(), z.clone()));
        assert!(c.to_string().contains("and (any-statement(purpose includes contact) or"));
        let c = Condition::negate(Condition::negate(x.clone()));
        assert_eq!(c.to_string(), "not (not any-statement(purpose includes research))");
        let c = Condition::and(Condition::and(x.clone(), y.clone()), z.clone());
        assert!(!c.to_string().contains('('.to_string().repeat(2).as_str()));
    }

    #[test]
    fn atoms_in_order() {
        let c = Condition::or(
            a(Purpose::Research),
            Condition::and(a(Purpose::Contact), Condition::negate(a(Purpose::Profiling))),
        );
        let names: Vec<String> = c.atoms().iter().map(|a| a.to_string()).collect();
        assert_eq!(names.len(), 3);
        assert!(names[0].contains("research"));
        assert!(names[2].contains("profiling"));
    }
}
