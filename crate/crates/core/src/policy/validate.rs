use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::PrivacyPolicy;
use crate::schema::DataSchema;
use crate::syntax::{is_path, is_valid_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum IssueLocation {
    Span { line: usize, column: usize },
    Path { path: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub location: IssueLocation,
    pub message: String,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

impl fmt::Display for IssueLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IssueLocation::Span { line, column } => write!(f, "{line}:{column}"),
            IssueLocation::Path { path } => f.write_str(path),
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.severity, self.location, self.message)
    }
}

fn issue(severity: Severity, path: impl Into<String>, message: impl Into<String>) -> ValidationIssue {
    ValidationIssue {
        severity,
        location: IssueLocation::Path { path: path.into() },
        message: message.into(),
    }
}

/// Checks a parsed (or hand-built) policy for deployability. Errors mean the
/// policy must not drive decisions; warnings flag ambiguity.
pub fn validate_policy(policy: &PrivacyPolicy, schema: &DataSchema) -> Vec<ValidationIssue> {
    use Severity::*;
    let mut issues = Vec::new();

    for (field, value) in [("entity.uri", &policy.entity_uri), ("disclosure", &policy.disclosure_uri)] {
        if url::Url::parse(value).is_err() {
            issues.push(issue(Error, field, format!("'{value}' is not an absolute URI")));
        }
    }
    if !is_valid_text(&policy.entity_name) {
        issues.push(issue(Error, "entity", "entity name contains control characters"));
    }
    for seal in &policy.seals {
        if !is_valid_text(seal) {
            issues.push(issue(Error, "seal", "seal name contains control characters"));
        }
    }

    if policy.statements.is_empty() {
        issues.push(issue(Warning, "statements", "no statements: discloses nothing"));
    }

    // leaf -> statements covering it, in document order
    let mut coverage: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, s) in policy.statements.iter().enumerate() {
        let at = format!("statement[{i}]");
        if s.purposes.is_empty() {
            issues.push(issue(Error, format!("{at}.purpose"), "empty purpose list"));
        }
        if s.recipients.is_empty() {
            issues.push(issue(Error, format!("{at}.recipients"), "empty recipients list"));
        }
        if s.data_refs.is_empty() {
            issues.push(issue(Error, format!("{at}.data"), "empty data list"));
        }
        if let Some(c) = &s.consequence {
            if !is_valid_text(c) {
                issues.push(issue(Error, format!("{at}.consequence"), "consequence contains control characters"));
            }
        }
        for r in &s.data_refs {
            if !is_path(r) {
                issues.push(issue(Error, format!("{at}.data"), format!("'{r}' is not a data path")));
                continue;
            }
            match schema.resolve_refs(r) {
                Ok(leaves) => {
                    for leaf in leaves {
                        let covering = coverage.entry(leaf).or_default();
                        if covering.last() != Some(&i) {
                            covering.push(i);
                        }
                    }
                }
                Err(e) => issues.push(issue(Error, format!("{at}.data"), e.to_string())),
            }
        }
    }

    for (leaf, stmts) in coverage {
        if stmts.len() > 1 {
            let list = stmts.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ");
            issues.push(issue(
                Warning,
                leaf.clone(),
                format!("element covered by multiple statements: {leaf} (statements {list})"),
            ));
        }
    }
    issues
}
