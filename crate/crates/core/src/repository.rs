//! The user data repository: typed values for base-data-set leaves the user
//! chose to store, and its `.prf` file format.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::Path;

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use serde::Serialize;

use crate::error::ParseError;
use crate::schema::DataSchema;
use crate::syntax::{quote, Cursor, Tok};
use crate::vocab::ValueType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Text(String),
    Date(NaiveDate),
    Gender(Gender),
    Country(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gender {
    Female,
    Male,
    Other,
}

impl Value {
    /// Parses `raw` as a literal of the given type.
    pub fn parse(value_type: ValueType, raw: &str) -> Result<Value, String> {
        match value_type {
            ValueType::Text => {
                if crate::syntax::is_valid_text(raw) {
                    Ok(Value::Text(raw.to_string()))
                } else {
                    Err("text must not contain control characters".into())
                }
            }
            ValueType::Date => parse_date(raw).map(Value::Date),
            ValueType::EnumGender => match raw {
                "female" => Ok(Value::Gender(Gender::Female)),
                "male" => Ok(Value::Gender(Gender::Male)),
                "other" => Ok(Value::Gender(Gender::Other)),
                _ => Err(format!("'{raw}' is not one of female, male, other")),
            },
            ValueType::CountryCode => {
                if COUNTRY_CODES.split(' ').any(|c| c == raw) {
                    Ok(Value::Country(raw.to_string()))
                } else {
                    Err(format!("'{raw}' is not an ISO 3166-1 alpha-2 country code"))
                }
            }
        }
    }

    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Text(_) => ValueType::Text,
            Value::Date(_) => ValueType::Date,
            Value::Gender(_) => ValueType::EnumGender,
            Value::Country(_) => ValueType::CountryCode,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) | Value::Country(s) => f.write_str(s),
            Value::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            Value::Gender(Gender::Female) => f.write_str("female"),
            Value::Gender(Gender::Male) => f.write_str("male"),
            Value::Gender(Gender::Other) => f.write_str("other"),
        }
    }
}

fn parse_date(raw: &str) -> Result<NaiveDate, String> {
    let b = raw.as_bytes();
    let shape_ok = b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit());
    if !shape_ok {
        return Err(format!("'{raw}' is not a YYYY-MM-DD date"));
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|_| format!("'{raw}' is not a calendar date"))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RepoError {
    #[error("unknown data element '{0}'")]
    UnknownElement(String),
    #[error("'{0}' is a virtual element and cannot be stored")]
    VirtualElement(String),
    #[error("type mismatch for '{path}': {reason}")]
    TypeMismatch { path: String, reason: String },
}

impl RepoError {
    pub fn kind(&self) -> &'static str {
        match self {
            RepoError::UnknownElement(_) => "unknown-element",
            RepoError::VirtualElement(_) => "virtual-element",
            RepoError::TypeMismatch { .. } => "type-mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Entry {
    pub value: Value,
    pub modified_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Repository {
    entries: BTreeMap<String, Entry>,
}

fn storable_type(schema: &DataSchema, path: &str) -> Result<ValueType, RepoError> {
    let def = schema
        .get(path)
        .ok_or_else(|| RepoError::UnknownElement(path.to_string()))?;
    if def.is_virtual {
        return Err(RepoError::VirtualElement(path.to_string()));
    }
    Ok(def.value_type)
}

impl Repository {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Entry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn set(&mut self, schema: &DataSchema, path: &str, raw: &str) -> Result<(), RepoError> {
        self.set_at(schema, path, raw, Utc::now())
    }

    pub fn set_at(
        &mut self,
        schema: &DataSchema,
        path: &str,
        raw: &str,
        modified_at: DateTime<Utc>,
    ) -> Result<(), RepoError> {
        let ty = storable_type(schema, path)?;
        let value = Value::parse(ty, raw).map_err(|reason| RepoError::TypeMismatch {
            path: path.to_string(),
            reason,
        })?;
        self.entries
            .insert(path.to_string(), Entry { value, modified_at });
        Ok(())
    }

    /// Last written value, or `None`. Paths outside the schema are an error.
    pub fn get(&self, schema: &DataSchema, path: &str) -> Result<Option<&Value>, RepoError> {
        if schema.get(path).is_none() {
            return Err(RepoError::UnknownElement(path.to_string()));
        }
        Ok(self.entries.get(path).map(|e| &e.value))
    }

    /// Lookup without schema checking, for callers that already resolved `path`.
    pub fn value(&self, path: &str) -> Option<&Value> {
        self.entries.get(path).map(|e| &e.value)
    }

    pub fn delete(&mut self, schema: &DataSchema, path: &str) -> Result<Option<Value>, RepoError> {
        if schema.get(path).is_none() {
            return Err(RepoError::UnknownElement(path.to_string()));
        }
        Ok(self.entries.remove(path).map(|e| e.value))
    }

    /// Every key is a non-virtual schema leaf holding a type-valid value.
    pub fn is_sound(&self, schema: &DataSchema) -> bool {
        self.entries.iter().all(|(path, e)| {
            storable_type(schema, path)
                .map(|ty| ty == e.value.value_type() && Value::parse(ty, &e.value.to_string()).is_ok())
                .unwrap_or(false)
        })
    }

    /// Canonical `.prf` text.
    pub fn to_text(&self) -> String {
        let mut out = String::from("repository {\n");
        for (path, e) in &self.entries {
            out.push_str(&format!(
                "  value {path} {} at {}\n",
                quote(&e.value.to_string()),
                quote(&e.modified_at.to_rfc3339_opts(SecondsFormat::AutoSi, true))
            ));
        }
        out.push_str("}\n");
        out
    }

    pub fn parse(text: &str, schema: &DataSchema) -> Result<Repository, ParseError> {
        let mut c = Cursor::new(text);
        c.expect_keyword("repository")?;
        c.expect(Tok::LBrace)?;
        let mut repo = Repository::new();
        while !c.peek_is(&Tok::RBrace)? {
            c.expect_keyword("value")?;
            let (path, pos) = c.expect_path()?;
            let (raw, raw_pos) = c.expect_string()?;
            let modified_at = if c.peek_is_word("at")? {
                c.advance()?;
                let (ts, ts_pos) = c.expect_string()?;
                DateTime::parse_from_rfc3339(&ts)
                    .map_err(|_| ParseError::at(ts_pos, format!("invalid timestamp {}", quote(&ts))))?
                    .with_timezone(&Utc)
            } else {
                Utc::now()
            };
            if repo.entries.contains_key(&path) {
                return Err(ParseError::at(pos, format!("duplicate value for '{path}'")));
            }
            repo.set_at(schema, &path, &raw, modified_at).map_err(|e| {
                let at = if matches!(e, RepoError::TypeMismatch { .. }) { raw_pos } else { pos };
                ParseError::at(at, e.to_string())
            })?;
        }
        c.expect(Tok::RBrace)?;
        c.expect_eof()?;
        Ok(repo)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RepoFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
}

pub fn load_repository(path: &Path, schema: &DataSchema) -> Result<Repository, RepoFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| RepoFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Repository::parse(&text, schema).map_err(|source| RepoFileError::Parse {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the repository, readable and writable by the owner only.
pub fn save_repository(repo: &Repository, path: &Path) -> Result<(), RepoFileError> {
    let io_err = |source| RepoFileError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("prf.tmp");
    write_private(&tmp, repo.to_text().as_bytes()).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

#[cfg(unix)]
fn write_private(path: &Path, bytes: &[u8]) -> io::Result<()> {
    use std::io::Write;
    use std::os::unix::fs::OpenOptionsExt;
    let mut f = std::fs::OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .mode(0o600)
        .open(path)?;
    f.write_all(bytes)?;
    f.sync_all()
}

#[cfg(not(unix))]
fn write_private(path: &Path, bytes: &[u8]) -> io::Result<()> {
    std::fs::write(path, bytes)
}

const COUNTRY_CODES: &str = "AD AE AF AG AI AL AM AO AQ AR AS AT AU AW AX AZ \
BA BB BD BE BF BG BH BI BJ BL BM BN BO BQ BR BS BT BV BW BY BZ \
CA CC CD CF CG CH CI CK CL CM CN CO CR CU CV CW CX CY CZ \
DE DJ DK DM DO DZ EC EE EG EH ER ES ET FI FJ FK FM FO FR \
GA GB GD GE GF GG GH GI GL GM GN GP GQ GR GS GT GU GW GY \
HK HM HN HR HT HU ID IE IL IM IN IO IQ IR IS IT JE JM JO JP \
KE KG KH KI KM KN KP KR KW KY KZ LA LB LC LI LK LR LS LT LU LV LY \
MA MC MD ME MF MG MH MK ML MM MN MO MP MQ MR MS MT MU MV MW MX MY MZ \
NA NC NE NF NG NI NL NO NP NR NU NZ OM \
PA PE PF PG PH PK PL PM PN PR PS PT PW PY QA RE RO RS RU RW \
SA SB SC SD SE SG SH SI SJ SK SL SM SN SO SR SS ST SV SX SY SZ \
TC TD TF TG TH TJ TK TL TM TN TO TR TT TV TW TZ UA UG UM US UY UZ \
VA VC VE VG VI VN VU WF WS YE YT ZA ZM ZW";
