//! The page returned in place of a blocked site. It is self-contained:
//! inline style only, no scripts, no external resources.

use consentry_core::engine::Decision;
use consentry_core::Origin;

use crate::prompts::Outcome;

pub const DECISION_HEADER: &str = "x-privacy-decision";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Value of the decision header on a block response.
pub fn decision_marker(prompt: Option<Outcome>) -> &'static str {
    match prompt {
        Some(Outcome::TimedOut) => "block; timed-out",
        Some(_) => "block; prompt",
        None => "block",
    }
}

pub fn block_page(
    origin: &Origin,
    decision: &Decision,
    disclosure_uri: Option<&str>,
    prompt: Option<Outcome>,
) -> String {
    let reason = match prompt {
        Some(Outcome::TimedOut) => {
            "<p class=\"timed-out\">No answer was given in time, so the request was blocked (timed-out).</p>\n"
        }
        Some(_) => "<p>You chose to block this site.</p>\n",
        None => "",
    };
    let policy = match disclosure_uri {
        Some(uri) => format!("<p><a href=\"{0}\">Read the site's privacy policy</a> ({0})</p>\n", escape(uri)),
        None => "<p>The site publishes no usable privacy policy.</p>\n".to_string(),
    };
    format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n\
<title>Blocked: {origin}</title>\n\
<style>body{{font-family:sans-serif;max-width:40em;margin:3em auto;line-height:1.4}}code{{background:#eee}}</style>\n\
</head>\n<body>\n<h1>Request blocked</h1>\n\
<p>Your privacy preferences block <code>{origin}</code>.</p>\n\
{reason}\
<p>Rule <code>{rule}</code> of ruleset <code>{ruleset}</code>: {explanation}</p>\n\
{policy}\
</body>\n</html>\n",
        origin = escape(&origin.to_string()),
        rule = escape(&decision.fired_rule.to_string()),
        ruleset = escape(&decision.ruleset_name),
        explanation = escape(&decision.explanation),
    )
}
