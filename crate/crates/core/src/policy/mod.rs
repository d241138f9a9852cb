//! Site privacy disclosures and their canonical text form (PPF).
//!
//! ```text
//! policy {
//!   entity "Example Books" uri "https://books.example"
//!   disclosure "https://books.example/privacy"
//!   seal "TRUSTe"
//!   statement {
//!     purpose core-service
//!     recipients ours
//!     retention stated-purpose
//!     data user.name, user.home-info.online.email
//!   }
//! }
//! ```

mod render;
mod validate;

use std::collections::BTreeSet;

use serde::Serialize;

pub use render::{purpose_phrase, recipient_phrase, render_policy_english, retention_sentence};
pub use validate::{validate_policy, IssueLocation, Severity, ValidationIssue};

use crate::error::ParseError;
use crate::hash::ContentHash;
use crate::schema::DataSchema;
use crate::syntax::{quote, Cursor, Pos, Tok};
use crate::vocab::{Purpose, Recipient, Retention};

/// Media type under which policies are served.
pub const MEDIA_TYPE: &str = "application/x-ppf";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrivacyPolicy {
    pub entity_name: String,
    pub entity_uri: String,
    /// Human-readable policy page.
    pub disclosure_uri: String,
    pub seals: BTreeSet<String>,
    pub statements: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Statement {
    pub purposes: BTreeSet<Purpose>,
    pub recipients: BTreeSet<Recipient>,
    pub retention: Retention,
    pub consequence: Option<String>,
    /// Leaf paths or prefixes into the data schema.
    pub data_refs: BTreeSet<String>,
}

impl PrivacyPolicy {
    /// Canonical serialization: fixed field order, two-space indent, sets in
    /// vocabulary or lexicographic order.
    pub fn to_text(&self) -> String {
        let mut out = String::from("policy {\n");
        out.push_str(&format!(
            "  entity {} uri {}\n",
            quote(&self.entity_name),
            quote(&self.entity_uri)
        ));
        out.push_str(&format!("  disclosure {}\n", quote(&self.disclosure_uri)));
        for seal in &self.seals {
            out.push_str(&format!("  seal {}\n", quote(seal)));
        }
        for s in &self.statements {
            out.push_str("  statement {\n");
            out.push_str(&format!("    purpose {}\n", join(s.purposes.iter().map(|p| p.as_str()))));
            out.push_str(&format!(
                "    recipients {}\n",
                join(s.recipients.iter().map(|r| r.as_str()))
            ));
            out.push_str(&format!("    retention {}\n", s.retention));
            if let Some(c) = &s.consequence {
                out.push_str(&format!("    consequence {}\n", quote(c)));
            }
            out.push_str(&format!("    data {}\n", join(s.data_refs.iter().map(String::as_str))));
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }

    /// SHA-256 of the canonical serialization.
    pub fn content_hash(&self) -> ContentHash {
        ContentHash::of(self.to_text().as_bytes())
    }

    /// Every leaf referenced by statement `index`, resolved against `schema`.
    /// References the schema does not know are kept verbatim.
    pub fn statement_leaves(&self, index: usize, schema: &DataSchema) -> BTreeSet<String> {
        self.statements[index]
            .data_refs
            .iter()
            .flat_map(|r| schema.resolve_refs(r).unwrap_or_else(|_| vec![r.clone()]))
            .collect()
    }
}

fn join<'a>(items: impl Iterator<Item = &'a str>) -> String {
    items.collect::<Vec<_>>().join(", ")
}

/// Parses a PPF document. Data references must resolve against `schema`.
pub fn parse_policy(text: &str, schema: &DataSchema) -> Result<PrivacyPolicy, ParseError> {
    let mut c = Cursor::new(text);
    let policy = parse_body(&mut c, schema)?;
    c.expect_eof()?;
    Ok(policy)
}

pub fn serialize_policy(policy: &PrivacyPolicy) -> String {
    policy.to_text()
}

fn absolute_uri(c: &mut Cursor<'_>, what: &str) -> Result<String, ParseError> {
    let (s, pos) = c.expect_string()?;
    match url::Url::parse(&s) {
        Ok(_) => Ok(s),
        Err(_) => Err(ParseError::at(pos, format!("{what} {} is not an absolute URI", quote(&s)))),
    }
}

fn parse_body(c: &mut Cursor<'_>, schema: &DataSchema) -> Result<PrivacyPolicy, ParseError> {
    c.expect_keyword("policy")?;
    c.expect(Tok::LBrace)?;
    c.expect_keyword("entity")?;
    let (entity_name, _) = c.expect_string()?;
    c.expect_keyword("uri")?;
    let entity_uri = absolute_uri(c, "entity uri")?;
    c.expect_keyword("disclosure")?;
    let disclosure_uri = absolute_uri(c, "disclosure uri")?;

    let mut seals = BTreeSet::new();
    let mut statements = Vec::new();
    loop {
        let t = c.advance()?;
        match &t.tok {
            Tok::RBrace => break,
            Tok::Word(w) => match w.as_str() {
                "seal" if statements.is_empty() => {
                    let (name, pos) = c.expect_string()?;
                    if !seals.insert(name.clone()) {
                        return Err(ParseError::at(pos, format!("duplicate seal {}", quote(&name))));
                    }
                }
                "seal" => {
                    return Err(ParseError::at(t.pos, "seals must precede statements"));
                }
                "statement" => statements.push(parse_statement(c, schema)?),
                "entity" | "uri" | "disclosure" => {
                    return Err(ParseError::at(t.pos, format!("duplicate field '{w}'")));
                }
                other => {
                    return Err(ParseError::at(t.pos, format!("unknown block '{other}'")));
                }
            },
            other => {
                return Err(ParseError::at(
                    t.pos,
                    format!("expected 'seal', 'statement' or '}}', found {other}"),
                ))
            }
        }
    }
    Ok(PrivacyPolicy {
        entity_name,
        entity_uri,
        disclosure_uri,
        seals,
        statements,
    })
}

/// `item ("," item)*` with duplicate detection.
fn comma_list<T: Ord>(
    c: &mut Cursor<'_>,
    mut item: impl FnMut(&mut Cursor<'_>) -> Result<(T, Pos), ParseError>,
) -> Result<BTreeSet<T>, ParseError> {
    let mut out = BTreeSet::new();
    loop {
        let (v, pos) = item(c)?;
        if !out.insert(v) {
            return Err(ParseError::at(pos, "duplicate list item"));
        }
        if c.peek_is(&Tok::Comma)? {
            c.advance()?;
        } else {
            return Ok(out);
        }
    }
}

fn reject_repeat(c: &mut Cursor<'_>, field: &str) -> Result<(), ParseError> {
    if c.peek_is_word(field)? {
        let pos = c.peek()?.pos;
        return Err(ParseError::at(pos, format!("duplicate field '{field}'")));
    }
    Ok(())
}

fn parse_statement(c: &mut Cursor<'_>, schema: &DataSchema) -> Result<Statement, ParseError> {
    c.expect(Tok::LBrace)?;
    c.expect_keyword("purpose")?;
    let purposes = comma_list(c, |c| {
        let (w, pos) = c.expect_ident()?;
        Ok((Purpose::parse_at(&w, pos)?, pos))
    })?;
    reject_repeat(c, "purpose")?;
    c.expect_keyword("recipients")?;
    let recipients = comma_list(c, |c| {
        let (w, pos) = c.expect_ident()?;
        Ok((Recipient::parse_at(&w, pos)?, pos))
    })?;
    reject_repeat(c, "recipients")?;
    c.expect_keyword("retention")?;
    let (w, pos) = c.expect_ident()?;
    let retention = Retention::parse_at(&w, pos)?;
    reject_repeat(c, "retention")?;
    let consequence = if c.peek_is_word("consequence")? {
        c.advance()?;
        let (text, _) = c.expect_string()?;
        reject_repeat(c, "consequence")?;
        Some(text)
    } else {
        None
    };
    c.expect_keyword("data")?;
    let data_refs = comma_list(c, |c| {
        let (path, pos) = c.expect_path()?;
        if schema.resolve_refs(&path).is_err() {
            return Err(ParseError::at(pos, format!("unresolvable data-ref '{path}'")));
        }
        Ok((path, pos))
    })?;
    reject_repeat(c, "data")?;
    c.expect(Tok::RBrace)?;
    Ok(Statement {
        purposes,
        recipients,
        retention,
        consequence,
        data_refs,
    })
}
