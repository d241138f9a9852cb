//! Template-driven English rendering of a policy.
//!
//! The phrase tables below are the whole of the template; `docs/rendering.md`
//! mirrors them.

use super::{PrivacyPolicy, Statement};
use crate::vocab::{Purpose, Recipient, Retention};

pub fn purpose_phrase(p: Purpose) -> &'static str {
    match p {
        Purpose::CoreService => "only for the service you requested",
        Purpose::Customization => "to tailor the site to you",
        Purpose::Research => "for research and site improvement",
        Purpose::Contact => "to contact you about its services",
        Purpose::Telemarketing => "to contact you with marketing by telephone",
        Purpose::Profiling => "to build a profile of you",
    }
}

pub fn recipient_phrase(r: Recipient) -> &'static str {
    match r {
        Recipient::Ours => "this site",
        Recipient::Agents => "agents acting on this site's behalf",
        Recipient::SamePolicies => "organizations that follow these same practices",
        Recipient::Unrelated => "unrelated third parties",
        Recipient::Public => "the public",
    }
}

pub fn retention_sentence(r: Retention) -> &'static str {
    match r {
        Retention::None => "It is not retained after your visit.",
        Retention::StatedPurpose => "It is kept only as long as the stated purpose requires.",
        Retention::LegalRequirement => "It is kept for as long as the law requires.",
        Retention::BusinessPractices => "It is kept according to the site's business practices.",
        Retention::Indefinite => "It may be kept indefinitely.",
    }
}

fn join_and(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => one.to_string(),
        [rest @ .., last] => format!("{} and {last}", rest.join(", ")),
    }
}

fn recipient_sentence(s: &Statement) -> String {
    let others: Vec<&str> = s
        .recipients
        .iter()
        .filter(|r| **r != Recipient::Ours)
        .map(|r| recipient_phrase(*r))
        .collect();
    if others.is_empty() {
        "It is not shared beyond this site.".to_string()
    } else if s.recipients.contains(&Recipient::Ours) {
        format!("It is used by this site and shared with {}.", join_and(&others))
    } else {
        format!("It is shared with {}.", join_and(&others))
    }
}

fn statement_paragraph(index: usize, s: &Statement) -> String {
    let data: Vec<&str> = s.data_refs.iter().map(String::as_str).collect();
    let purposes: Vec<&str> = s.purposes.iter().map(|p| purpose_phrase(*p)).collect();
    let mut out = format!(
        "Statement {}: This site collects {} and uses it {}. {} {}",
        index + 1,
        join_and(&data),
        join_and(&purposes),
        recipient_sentence(s),
        retention_sentence(s.retention),
    );
    if let Some(c) = &s.consequence {
        out.push_str(&format!(" The site says: \"{c}\""));
    }
    out
}

/// Deterministic English text: a header naming the entity, seals and
/// disclosure page, then one paragraph per statement.
pub fn render_policy_english(policy: &PrivacyPolicy) -> String {
    let mut out = format!(
        "Privacy practices of {} ({})\n",
        policy.entity_name, policy.entity_uri
    );
    if policy.seals.is_empty() {
        out.push_str("Privacy seals: none\n");
    } else {
        let seals: Vec<&str> = policy.seals.iter().map(String::as_str).collect();
        out.push_str(&format!("Privacy seals: {}\n", seals.join(", ")));
    }
    out.push_str(&format!("Full policy: {}\n", policy.disclosure_uri));
    if policy.statements.is_empty() {
        out.push_str("\nThis site makes no statements about the data it collects.\n");
    }
    for (i, s) in policy.statements.iter().enumerate() {
        out.push('\n');
        out.push_str(&statement_paragraph(i, s));
        out.push('\n');
    }
    out
}
