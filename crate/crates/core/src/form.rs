//! Site data requests (PDR), disclosure coupling, and practice-annotated forms
//! pre-filled from the repository.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::ParseError;
use crate::hash::ContentHash;
use crate::policy::PrivacyPolicy;
use crate::repository::Repository;
use crate::schema::DataSchema;
use crate::syntax::{quote, Cursor, Tok};
use crate::vocab::{Purpose, Recipient, Retention};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequestItem {
    /// Leaf path or prefix.
    pub reference: String,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DataRequest {
    pub label: String,
    pub items: Vec<RequestItem>,
}

pub fn parse_data_request(text: &str, schema: &DataSchema) -> Result<DataRequest, ParseError> {
    let mut c = Cursor::new(text);
    c.expect_keyword("data-request")?;
    c.expect(Tok::LBrace)?;
    c.expect_keyword("for")?;
    let (label, _) = c.expect_string()?;
    c.expect_keyword("data")?;
    let mut items = Vec::new();
    let mut seen = BTreeSet::new();
    loop {
        let (reference, pos) = c.expect_path()?;
        if schema.resolve_refs(&reference).is_err() {
            return Err(ParseError::at(pos, format!("unresolvable data-ref '{reference}'")));
        }
        if !seen.insert(reference.clone()) {
            return Err(ParseError::at(pos, "duplicate list item"));
        }
        let (flag, pos) = c.expect_ident()?;
        let required = match flag.as_str() {
            "required" => true,
            "optional" => false,
            other => {
                return Err(ParseError::at(
                    pos,
                    format!("expected 'required' or 'optional', found '{other}'"),
                ))
            }
        };
        items.push(RequestItem {
            reference,
            required,
        });
        if c.peek_is(&Tok::Comma)? {
            c.advance()?;
        } else {
            break;
        }
    }
    c.expect(Tok::RBrace)?;
    c.expect_eof()?;
    Ok(DataRequest { label, items })
}

impl DataRequest {
    pub fn to_text(&self) -> String {
        let items: Vec<String> = self
            .items
            .iter()
            .map(|i| format!("{} {}", i.reference, if i.required { "required" } else { "optional" }))
            .collect();
        format!(
            "data-request {{\n  for {}\n  data {}\n}}\n",
            quote(&self.label),
            items.join(", ")
        )
    }

    /// Requested leaves in request order, each once; a leaf is required if
    /// any item naming it is.
    pub fn leaves(&self, schema: &DataSchema) -> Vec<(String, bool)> {
        let mut out: Vec<(String, bool)> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for item in &self.items {
            let leaves = schema
                .resolve_refs(&item.reference)
                .unwrap_or_else(|_| vec![item.reference.clone()]);
            for leaf in leaves {
                match index.get(&leaf) {
                    Some(&i) => out[i].1 |= item.required,
                    None => {
                        index.insert(leaf.clone(), out.len());
                        out.push((leaf, item.required));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    /// Leaf -> first covering statement (0-based, document order).
    pub covered: BTreeMap<String, usize>,
    /// In request order.
    pub uncovered: Vec<String>,
    /// Leaves covered by more than one statement, in request order.
    pub ambiguous: Vec<String>,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.uncovered.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("coverage {\n");
        for (leaf, stmt) in &self.covered {
            out.push_str(&format!("  covered {leaf} statement {stmt}\n"));
        }
        for leaf in &self.uncovered {
            out.push_str(&format!("  uncovered {leaf}\n"));
        }
        for leaf in &self.ambiguous {
            out.push_str(&format!("  ambiguous {leaf}\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Which requested leaves the policy's statements actually disclose.
pub fn check_coupling(
    request: &DataRequest,
    policy: &PrivacyPolicy,
    schema: &DataSchema,
) -> CoverageReport {
    let stmt_leaves: Vec<BTreeSet<String>> = (0..policy.statements.len())
        .map(|i| policy.statement_leaves(i, schema))
        .collect();
    let mut report = CoverageReport {
        covered: BTreeMap::new(),
        uncovered: Vec::new(),
        ambiguous: Vec::new(),
    };
    for (leaf, _) in request.leaves(schema) {
        let mut covering = stmt_leaves
            .iter()
            .enumerate()
            .filter(|(_, set)| set.contains(&leaf))
            .map(|(i, _)| i);
        match covering.next() {
            Some(first) => {
                if covering.next().is_some() {
                    report.ambiguous.push(leaf.clone());
                }
                report.covered.insert(leaf, first);
            }
            None => report.uncovered.push(leaf),
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Annotations {
    pub purposes: BTreeSet<Purpose>,
    pub recipients: BTreeSet<Recipient>,
    pub retention: Retention,
    pub consequence: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FormField {
    pub path: String,
    pub required: bool,
    /// Repository value, `None` when the user has not stored one.
    pub value: Option<String>,
    /// Index of the covering statement the annotations come from.
    pub statement: usize,
    pub annotations: Annotations,
    /// Set when the covering statement does not list `core-service`: the
    /// site asks for data it does not claim to need for the service itself.
    pub necessity_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotatedForm {
    pub label: String,
    pub site: String,
    pub policy_hash: ContentHash,
    pub fields: Vec<FormField>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("requested data not covered by any statement: {}", uncovered.join(", "))]
pub struct CouplingError {
    pub uncovered: Vec<String>,
}

/// Builds the annotated form, or fails listing every uncovered leaf.
pub fn generate_form(
    request: &DataRequest,
    policy: &PrivacyPolicy,
    repo: &Repository,
    schema: &DataSchema,
    site: &str,
) -> Result<AnnotatedForm, CouplingError> {
    let report = check_coupling(request, policy, schema);
    if !report.is_complete() {
        return Err(CouplingError {
            uncovered: report.uncovered,
        });
    }
    let fields = request
        .leaves(schema)
        .into_iter()
        .map(|(path, required)| {
            let statement = report.covered[&path];
            let s = &policy.statements[statement];
            FormField {
                value: repo.value(&path).map(|v| v.to_string()),
                path,
                required,
                statement,
                annotations: Annotations {
                    purposes: s.purposes.clone(),
                    recipients: s.recipients.clone(),
                    retention: s.retention,
                    consequence: s.consequence.clone(),
                },
                necessity_flag: !s.purposes.contains(&Purpose::CoreService),
            }
        })
        .collect();
    Ok(AnnotatedForm {
        label: request.label.clone(),
        site: site.to_string(),
        policy_hash: policy.content_hash(),
        fields,
    })
}

impl AnnotatedForm {
    /// Deterministic text rendering, one block per field.
    pub fn to_text(&self) -> String {
        let mut out = format!("form {} {{\n", quote(&self.label));
        out.push_str(&format!("  site {}\n", quote(&self.site)));
        out.push_str(&format!("  policy-hash {}\n", quote(self.policy_hash.as_str())));
        for f in &self.fields {
            let a = &f.annotations;
            out.push_str(&format!(
                "  field {} {} {{\n",
                f.path,
                if f.required { "required" } else { "optional" }
            ));
            match &f.value {
                Some(v) => out.push_str(&format!("    value {}\n", quote(v))),
                None => out.push_str("    blank\n"),
            }
            let purposes: Vec<&str> = a.purposes.iter().map(|p| p.as_str()).collect();
            let recipients: Vec<&str> = a.recipients.iter().map(|r| r.as_str()).collect();
            out.push_str(&format!("    statement {}\n", f.statement));
            out.push_str(&format!("    purpose {}\n", purposes.join(", ")));
            out.push_str(&format!("    recipients {}\n", recipients.join(", ")));
            out.push_str(&format!("    retention {}\n", a.retention));
            if let Some(c) = &a.consequence {
                out.push_str(&format!("    consequence {}\n", quote(c)));
            }
            out.push_str(&format!("    necessity-flag {}\n", f.necessity_flag));
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }
}
