//! Small enumerable policy spaces for exhaustive engine checks.

use std::collections::BTreeSet;

use consentry_core::rules::StmtPred;
use consentry_core::{Category, PrivacyPolicy, Purpose, Recipient, Retention, Statement};

pub fn single(purpose: Purpose, recipient: Recipient, retention: Retention, data: &str) -> PrivacyPolicy {
    PrivacyPolicy {
        entity_name: "E".into(),
        entity_uri: "https://e.example".into(),
        disclosure_uri: "https://e.example/p".into(),
        seals: BTreeSet::new(),
        statements: vec![Statement {
            purposes: [purpose].into(),
            recipients: [recipient].into(),
            retention,
            consequence: None,
            data_refs: [data.to_string()].into(),
        }],
    }
}

/// Non-empty subsets.
pub fn subsets<T: Ord + Copy>(items: &[T]) -> Vec<BTreeSet<T>> {
    (1..1u32 << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, x)| *x)
                .collect()
        })
        .collect()
}

/// Paths probing prefix and segment boundaries.
pub const PATHS: &[&str] = &[
    "user", "user.name", "user.name.given", "user.nam", "dynamic", "dynamic.cookies",
    "dynamic.http", "user.home-info", "nowhere", "dynamic.cookies.extra",
];

/// Instances of all nine statement predicate forms.
pub fn predicates(purposes: &[Purpose], recipients: &[Recipient], retentions: &[Retention], paths: &[&str]) -> Vec<StmtPred> {
    let mut out = Vec::new();
    out.extend(Purpose::ALL.iter().map(|p| StmtPred::PurposeIncludes(*p)));
    out.extend(subsets(purposes).into_iter().map(StmtPred::PurposeWithin));
    out.extend(Recipient::ALL.iter().map(|r| StmtPred::RecipientsIncludes(*r)));
    out.extend(subsets(recipients).into_iter().map(StmtPred::RecipientsWithin));
    out.extend(Retention::ALL.iter().map(|r| StmtPred::RetentionIs(*r)));
    out.extend(subsets(retentions).into_iter().map(StmtPred::RetentionIn));
    for p in paths {
        out.push(StmtPred::DataUnder(p.to_string()));
        out.push(StmtPred::DataIncludes(p.to_string()));
    }
    out.extend(Category::ALL.iter().map(|c| StmtPred::CategoryIncludes(*c)));
    out
}

pub fn form(p: &StmtPred) -> &'static str {
    match p {
        StmtPred::PurposeIncludes(_) => "purpose includes",
        StmtPred::PurposeWithin(_) => "purpose within",
        StmtPred::RecipientsIncludes(_) => "recipients includes",
        StmtPred::RecipientsWithin(_) => "recipients within",
        StmtPred::RetentionIs(_) => "retention is",
        StmtPred::RetentionIn(_) => "retention in",
        StmtPred::DataUnder(_) => "data under",
        StmtPred::DataIncludes(_) => "data includes",
        StmtPred::CategoryIncludes(_) => "category includes",
    }
}

/// Every single-statement policy over a product of the given values.
pub fn grid(purposes: &[Purpose], recipients: &[Recipient], retentions: &[Retention], data: &[&str]) -> Vec<PrivacyPolicy> {
    let mut out = Vec::new();
    for p in purposes {
        for r in recipients {
            for t in retentions {
                for d in data {
                    out.push(single(*p, *r, *t, d));
                }
            }
        }
    }
    out
}

/// The 2×2×2×2 sub-vocabulary: 16 policies and the predicates over it.
pub fn two_by_two() -> (Vec<PrivacyPolicy>, Vec<StmtPred>) {
    let purposes = [Purpose::CoreService, Purpose::Telemarketing];
    let recipients = [Recipient::Ours, Recipient::Unrelated];
    let retentions = [Retention::StatedPurpose, Retention::Indefinite];
    let data = ["user.name", "dynamic.cookies"];
    (
        grid(&purposes, &recipients, &retentions, &data),
        predicates(&purposes, &recipients, &retentions, PATHS),
    )
}
