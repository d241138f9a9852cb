//! Canned rulesets shipped with the agent.

use std::fmt;
use std::str::FromStr;

use super::{parse_ruleset, RuleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Preset {
    Relaxed,
    Cautious,
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown preset '{0}' (expected relaxed, cautious or strict)")]
pub struct UnknownPreset(pub String);

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Relaxed, Preset::Cautious, Preset::Strict];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Relaxed => "relaxed",
            Preset::Cautious => "cautious",
            Preset::Strict => "strict",
        }
    }

    /// The shipped `.apr` text.
    pub fn source(self) -> &'static str {
        match self {
            Preset::Relaxed => include_str!("../../presets/relaxed.apr"),
            Preset::Cautious => include_str!("../../presets/cautious.apr"),
            Preset::Strict => include_str!("../../presets/strict.apr"),
        }
    }

    pub fn ruleset(self) -> RuleSet {
        parse_ruleset(self.source()).expect("shipped preset parses")
    }
}

impl FromStr for Preset {
    type Err = UnknownPreset;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownPreset(s.to_string()))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Looks a preset up by name.
pub fn preset(name: &str) -> Result<RuleSet, UnknownPreset> {
    Ok(name.parse::<Preset>()?.ruleset())
}
