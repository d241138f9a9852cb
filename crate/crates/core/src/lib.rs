//! Notice-and-choice privacy agent core.
//!
//! Sites publish machine-readable disclosures ([`policy`]) that refer to a
//! shared namespace of data elements ([`schema`]). The user's preferences
//! ([`rules`]) are matched against a disclosure by the [`engine`], which
//! yields one of four actions. The [`form`] agent checks that every data
//! element a site requests is covered by its disclosure and builds annotated
//! forms from the user's [`repository`].

pub mod engine;
pub mod error;
pub mod form;
pub mod hash;
pub mod origin;
pub mod policy;
pub mod repository;
pub mod rules;
pub mod schema;
pub mod syntax;
pub mod vocab;

pub use engine::{decide_site, eval_atom, evaluate, Decision, DecisionCache, FiredRule, OverrideStore, Scope};
pub use error::ParseError;
pub use form::{check_coupling, generate_form, parse_data_request, AnnotatedForm, CoverageReport, CouplingError, DataRequest};
pub use hash::ContentHash;
pub use origin::Origin;
pub use policy::{parse_policy, render_policy_english, serialize_policy, validate_policy, PrivacyPolicy, Statement, ValidationIssue};
pub use repository::{Repository, Value};
pub use rules::{parse_ruleset, preset, serialize_ruleset, Preset, RuleSet};
pub use schema::{base_schema, DataSchema};
pub use vocab::{Action, Category, Purpose, Recipient, Retention, ValueType};
