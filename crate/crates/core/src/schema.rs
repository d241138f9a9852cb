//! Hierarchical data element namespace: the built-in base data set plus
//! extension schemas loaded from `.pds` documents.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::ParseError;
use crate::syntax::{quote, Cursor, Tok};
use crate::vocab::{Category, ValueType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DataElementDef {
    pub path: String,
    pub value_type: ValueType,
    pub category: Category,
    /// Agent-observed data (cookies, clickstream); never stored in a repository.
    #[serde(rename = "virtual")]
    pub is_virtual: bool,
    /// Declaring extension schema, `None` for the base data set.
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown data element '{0}'")]
pub struct UnknownElement(pub String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("line {line}: element '{path}' conflicts with existing element '{existing}'")]
    Conflict {
        path: String,
        existing: String,
        line: usize,
    },
}

use Category::*;
use ValueType::*;

/// The base data set: path, type, category, virtual.
const BASE_ELEMENTS: &[(&str, ValueType, Category, bool)] = &[
    ("user.name.prefix", Text, PhysicalContact, false),
    ("user.name.given", Text, PhysicalContact, false),
    ("user.name.middle", Text, PhysicalContact, false),
    ("user.name.family", Text, PhysicalContact, false),
    ("user.name.suffix", Text, PhysicalContact, false),
    ("user.bday", Date, Demographic, false),
    ("user.gender", EnumGender, Demographic, false),
    ("user.home-info.postal.street", Text, PhysicalContact, false),
    ("user.home-info.postal.city", Text, PhysicalContact, false),
    ("user.home-info.postal.state", Text, PhysicalContact, false),
    ("user.home-info.postal.postal-code", Text, PhysicalContact, false),
    ("user.home-info.postal.country", CountryCode, PhysicalContact, false),
    ("user.home-info.telecom.phone", Text, PhysicalContact, false),
    ("user.home-info.online.email", Text, OnlineContact, false),
    ("user.business-info.postal.street", Text, PhysicalContact, false),
    ("user.business-info.postal.city", Text, PhysicalContact, false),
    ("user.business-info.postal.state", Text, PhysicalContact, false),
    ("user.business-info.postal.postal-code", Text, PhysicalContact, false),
    ("user.business-info.postal.country", CountryCode, PhysicalContact, false),
    ("user.business-info.telecom.phone", Text, PhysicalContact, false),
    ("user.business-info.online.email", Text, OnlineContact, false),
    ("user.employer", Text, Demographic, false),
    ("user.department", Text, Demographic, false),
    ("user.jobtitle", Text, Demographic, false),
    ("dynamic.cookies", Text, State, true),
    ("dynamic.clickstream", Text, Navigation, true),
    ("dynamic.http.referrer", Text, Navigation, true),
];

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DataSchema {
    elements: BTreeMap<String, DataElementDef>,
}

/// The frozen built-in schema.
pub fn base_schema() -> DataSchema {
    let elements = BASE_ELEMENTS
        .iter()
        .map(|&(path, value_type, category, is_virtual)| {
            (
                path.to_string(),
                DataElementDef {
                    path: path.to_string(),
                    value_type,
                    category,
                    is_virtual,
                    source: None,
                },
            )
        })
        .collect();
    DataSchema { elements }
}

/// Segment-wise prefix: `user.name` is under `user`, `user.namex` is not.
pub fn is_under(path: &str, prefix: &str) -> bool {
    path == prefix
        || (path.len() > prefix.len()
            && path.starts_with(prefix)
            && path.as_bytes()[prefix.len()] == b'.')
}

impl DataSchema {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn get(&self, path: &str) -> Option<&DataElementDef> {
        self.elements.get(path)
    }

    pub fn elements(&self) -> impl Iterator<Item = &DataElementDef> {
        self.elements.values()
    }

    /// Distinct extension schema URIs that contributed elements.
    pub fn sources(&self) -> BTreeSet<&str> {
        self.elements
            .values()
            .filter_map(|e| e.source.as_deref())
            .collect()
    }

    fn under(&self, prefix: &str) -> impl Iterator<Item = &DataElementDef> + '_ {
        // '/' sorts right after '.', so this range is exactly `prefix.*`
        let lo = format!("{prefix}.");
        let hi = format!("{prefix}/");
        self.elements.range(lo..hi).map(|(_, e)| e)
    }

    /// Expands a leaf path or prefix into the leaves it denotes, in
    /// lexicographic order.
    pub fn resolve_refs(&self, reference: &str) -> Result<Vec<String>, UnknownElement> {
        if self.elements.contains_key(reference) {
            return Ok(vec![reference.to_string()]);
        }
        let leaves: Vec<String> = self.under(reference).map(|e| e.path.clone()).collect();
        if leaves.is_empty() {
            Err(UnknownElement(reference.to_string()))
        } else {
            Ok(leaves)
        }
    }

    /// The existing element that `path` would collide with, if any.
    fn conflict_with(&self, path: &str) -> Option<&str> {
        if let Some(e) = self.elements.get(path) {
            return Some(&e.path);
        }
        if let Some(e) = self.under(path).next() {
            return Some(&e.path);
        }
        // an existing leaf that is a proper prefix of `path`
        let mut end = 0;
        for seg in path.split('.') {
            end += seg.len();
            if end < path.len() {
                if let Some(e) = self.elements.get(&path[..end]) {
                    return Some(&e.path);
                }
            }
            end += 1;
        }
        None
    }

    /// Adds one element, preserving the tree property.
    pub fn insert(&mut self, def: DataElementDef) -> Result<(), (String, String)> {
        if let Some(existing) = self.conflict_with(&def.path) {
            return Err((def.path.clone(), existing.to_string()));
        }
        self.elements.insert(def.path.clone(), def);
        Ok(())
    }

    /// True when no element path is a strict prefix of another.
    pub fn is_tree(&self) -> bool {
        self.elements.keys().all(|p| self.under(p).next().is_none())
    }

    /// Merges an extension schema document into a copy of `self`.
    pub fn load_extension(&self, text: &str) -> Result<DataSchema, SchemaError> {
        let mut merged = self.clone();
        let mut c = Cursor::new(text);
        c.expect_keyword("dataschema")?;
        let (uri, uri_pos) = c.expect_string()?;
        if url::Url::parse(&uri).is_err() {
            return Err(ParseError::at(uri_pos, format!("schema uri {} is not an absolute URI", quote(&uri))).into());
        }
        c.expect(Tok::LBrace)?;
        while !c.peek_is(&Tok::RBrace)? {
            c.expect_keyword("element")?;
            let (path, pos) = c.expect_path()?;
            c.expect_keyword("type")?;
            let (ty, ty_pos) = c.expect_ident()?;
            let value_type = ValueType::parse_at(&ty, ty_pos)?;
            c.expect_keyword("category")?;
            let (cat, cat_pos) = c.expect_ident()?;
            let category = Category::parse_at(&cat, cat_pos)?;
            let is_virtual = if c.peek_is_word("virtual")? {
                c.advance()?;
                true
            } else {
                false
            };
            merged
                .insert(DataElementDef {
                    path,
                    value_type,
                    category,
                    is_virtual,
                    source: Some(uri.clone()),
                })
                .map_err(|(path, existing)| SchemaError::Conflict {
                    path,
                    existing,
                    line: pos.line,
                })?;
        }
        c.expect(Tok::RBrace)?;
        c.expect_eof()?;
        Ok(merged)
    }
}

/// Renders the schema as a Markdown table (the published base data set page).
pub fn schema_table_markdown(schema: &DataSchema) -> String {
    let mut out = String::from("| path | type | category | virtual |\n|---|---|---|---|\n");
    for e in schema.elements() {
        out.push_str(&format!(
            "| `{}` | {} | {} | {} |\n",
            e.path,
            e.value_type,
            e.category,
            if e.is_virtual { "yes" } else { "no" }
        ));
    }
    out
}
