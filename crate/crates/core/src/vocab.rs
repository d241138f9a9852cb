//! Closed vocabularies used by disclosures, schemas and rules.
//!
//! Variant declaration order is significant: it is the canonical
//! serialization order for sets and, for [`Action`], the severity order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ParseError;
use crate::syntax::Pos;

/// Returned by `FromStr` on a vocabulary enum when the token is not in the set.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} '{token}'")]
pub struct UnknownToken {
    pub kind: &'static str,
    pub token: String,
}

macro_rules! token_enum {
    (
        $(#[$meta:meta])*
        pub enum $name:ident ($kind:literal) {
            $( $(#[$vmeta:meta])* $variant:ident => $tok:literal ),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "kebab-case")]
        pub enum $name {
            $( $(#[$vmeta])* $variant ),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $tok),+
                }
            }

            pub(crate) fn parse_at(word: &str, pos: Pos) -> Result<Self, ParseError> {
                word.parse().map_err(|e: UnknownToken| ParseError::at(pos, e.to_string()))
            }
        }

        impl FromStr for $name {
            type Err = UnknownToken;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($tok => Ok($name::$variant),)+
                    _ => Err(UnknownToken { kind: $kind, token: s.to_string() }),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

token_enum! {
    /// Why a site collects data.
    pub enum Purpose ("purpose") {
        CoreService => "core-service",
        Customization => "customization",
        Research => "research",
        Contact => "contact",
        Telemarketing => "telemarketing",
        Profiling => "profiling",
    }
}

token_enum! {
    /// Who receives collected data.
    pub enum Recipient ("recipient") {
        Ours => "ours",
        Agents => "agents",
        SamePolicies => "same-policies",
        Unrelated => "unrelated",
        Public => "public",
    }
}

token_enum! {
    /// How long collected data is kept.
    pub enum Retention ("retention") {
        None => "none",
        StatedPurpose => "stated-purpose",
        LegalRequirement => "legal-requirement",
        BusinessPractices => "business-practices",
        Indefinite => "indefinite",
    }
}

token_enum! {
    /// Kind of a data element, so rules can target classes of data.
    pub enum Category ("category") {
        PhysicalContact => "physical-contact",
        OnlineContact => "online-contact",
        UniqueId => "unique-id",
        Financial => "financial",
        Computer => "computer",
        Navigation => "navigation",
        Interactive => "interactive",
        Demographic => "demographic",
        Preference => "preference",
        GovernmentId => "government-id",
        Health => "health",
        Content => "content",
        State => "state",
    }
}

token_enum! {
    /// What the agent does about a site. Ordered by severity.
    pub enum Action ("action") {
        /// Proceed silently.
        Accept => "accept",
        /// Proceed, and show a non-blocking notice.
        Inform => "inform",
        /// Hold until the user confirms.
        Warn => "warn",
        /// Refuse silently.
        Block => "block",
    }
}

token_enum! {
    /// Value type of a stored data element.
    pub enum ValueType ("value type") {
        Text => "text",
        /// ISO 8601 calendar date, `YYYY-MM-DD`.
        Date => "date",
        EnumGender => "enum-gender",
        /// ISO 3166-1 alpha-2.
        CountryCode => "country-code",
    }
}
