//! proptest strategies producing values that obey the type invariants, so
//! serialize-then-parse must reproduce them exactly.

use std::collections::BTreeSet;

use consentry_core::rules::{Atom, Condition, PolicyPred, Rule, StmtPred};
use consentry_core::{base_schema, Action, Category, PrivacyPolicy, Purpose, Recipient, Retention, RuleSet, Statement};
use proptest::prelude::*;
use proptest::sample::{select, subsequence};

/// Printable text including the characters that need escaping.
pub fn text() -> impl Strategy<Value = String> {
    "[ -~\u{e9}\u{fc}\u{2603}\t]{0,16}"
}

pub fn uri() -> impl Strategy<Value = String> {
    ("https?", "[a-z]{1,8}", "(/[a-z0-9]{1,6}){0,2}")
        .prop_map(|(scheme, host, path)| format!("{scheme}://{host}.example{path}"))
}

/// Every path the base schema can resolve: leaves and interior prefixes.
pub fn schema_refs() -> Vec<String> {
    let mut out = BTreeSet::new();
    for e in base_schema().elements() {
        let mut prefix = String::new();
        for seg in e.path.split('.') {
            if !prefix.is_empty() {
                prefix.push('.');
            }
            prefix.push_str(seg);
            out.insert(prefix.clone());
        }
    }
    out.into_iter().collect()
}

/// Any syntactically valid path, known to the schema or not.
pub fn any_path() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => select(schema_refs()),
        1 => "[a-z][a-z0-9-]{0,5}(\\.[a-z][a-z0-9-]{0,5}){0,3}",
    ]
}

fn set_of<T: Ord + Clone + std::fmt::Debug + 'static>(all: &'static [T]) -> impl Strategy<Value = BTreeSet<T>> {
    subsequence(all.to_vec(), 1..=all.len()).prop_map(|v| v.into_iter().collect())
}

pub fn statement() -> impl Strategy<Value = Statement> {
    (
        set_of(Purpose::ALL),
        set_of(Recipient::ALL),
        select(Retention::ALL.to_vec()),
        proptest::option::of(text()),
        proptest::collection::btree_set(select(schema_refs()), 1..4),
    )
        .prop_map(|(purposes, recipients, retention, consequence, data_refs)| Statement {
            purposes,
            recipients,
            retention,
            consequence,
            data_refs,
        })
}

pub fn policy() -> impl Strategy<Value = PrivacyPolicy> {
    (
        text(),
        uri(),
        uri(),
        proptest::collection::btree_set(text(), 0..3),
        proptest::collection::vec(statement(), 0..4),
    )
        .prop_map(|(entity_name, entity_uri, disclosure_uri, seals, statements)| PrivacyPolicy {
            entity_name,
            entity_uri,
            disclosure_uri,
            seals,
            statements,
        })
}

pub fn stmt_pred() -> impl Strategy<Value = StmtPred> {
    prop_oneof![
        select(Purpose::ALL.to_vec()).prop_map(StmtPred::PurposeIncludes),
        set_of(Purpose::ALL).prop_map(StmtPred::PurposeWithin),
        select(Recipient::ALL.to_vec()).prop_map(StmtPred::RecipientsIncludes),
        set_of(Recipient::ALL).prop_map(StmtPred::RecipientsWithin),
        select(Retention::ALL.to_vec()).prop_map(StmtPred::RetentionIs),
        set_of(Retention::ALL).prop_map(StmtPred::RetentionIn),
        any_path().prop_map(StmtPred::DataUnder),
        any_path().prop_map(StmtPred::DataIncludes),
        select(Category::ALL.to_vec()).prop_map(StmtPred::CategoryIncludes),
    ]
}

pub fn atom() -> impl Strategy<Value = Atom> {
    prop_oneof![
        3 => stmt_pred().prop_map(Atom::AnyStatement),
        3 => stmt_pred().prop_map(Atom::AllStatements),
        1 => Just(Atom::Policy(PolicyPred::HasAnySeal)),
        1 => text().prop_map(|s| Atom::Policy(PolicyPred::HasSeal(s))),
    ]
}

pub fn condition() -> impl Strategy<Value = Condition> {
    atom().prop_map(Condition::Atom).prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Condition::negate),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Condition::and(l, r)),
            (inner.clone(), inner).prop_map(|(l, r)| Condition::or(l, r)),
        ]
    })
}

pub fn action() -> impl Strategy<Value = Action> {
    select(Action::ALL.to_vec())
}

pub fn ruleset() -> impl Strategy<Value = RuleSet> {
    let rule = (action(), condition(), proptest::option::of(text())).prop_map(
        |(action, condition, explanation)| Rule {
            action,
            condition,
            explanation,
        },
    );
    (text(), proptest::collection::vec(rule, 0..5), action(), action()).prop_map(
        |(name, rules, default_action, on_missing_policy)| RuleSet {
            name,
            rules,
            default_action,
            on_missing_policy,
        },
    )
}
