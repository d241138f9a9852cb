use std::collections::BTreeSet;

use super::{Atom, Condition, PolicyPred, Rule, RuleSet, StmtPred};
use crate::error::ParseError;
use crate::policy::{IssueLocation, Severity, ValidationIssue};
use crate::schema::DataSchema;
use crate::syntax::{Cursor, Pos, Tok};
use crate::vocab::{Action, Category, Purpose, Recipient, Retention};

const MAX_NESTING: usize = 64;
const MAX_ATOMS: usize = 1024;

pub fn parse_ruleset(text: &str) -> Result<RuleSet, ParseError> {
    let mut c = Cursor::new(text);
    c.expect_keyword("ruleset")?;
    let (name, _) = c.expect_string()?;
    c.expect(Tok::LBrace)?;

    let on_missing_policy = if c.peek_is_word("on-missing-policy")? {
        c.advance()?;
        action(&mut c)?
    } else {
        Action::Warn
    };

    let mut rules = Vec::new();
    let default_action = loop {
        let t = c.advance()?;
        match &t.tok {
            Tok::Word(w) if w == "rule" => rules.push(rule(&mut c)?),
            Tok::Word(w) if w == "default" => break action(&mut c)?,
            Tok::Word(w) if w == "on-missing-policy" => {
                return Err(ParseError::at(
                    t.pos,
                    "on-missing-policy must come first and only once",
                ))
            }
            Tok::RBrace => return Err(ParseError::at(t.pos, "missing default")),
            Tok::Eof => return Err(ParseError::at(t.pos, "missing default")),
            other => {
                return Err(ParseError::at(
                    t.pos,
                    format!("expected 'rule' or 'default', found {other}"),
                ))
            }
        }
    };

    let t = c.advance()?;
    match &t.tok {
        Tok::RBrace => {}
        Tok::Word(w) if w == "rule" => return Err(ParseError::at(t.pos, "rule after default")),
        Tok::Word(w) if w == "default" => return Err(ParseError::at(t.pos, "duplicate default")),
        other => return Err(ParseError::at(t.pos, format!("expected '}}', found {other}"))),
    }
    c.expect_eof()?;
    Ok(RuleSet {
        name,
        rules,
        default_action,
        on_missing_policy,
    })
}

fn action(c: &mut Cursor<'_>) -> Result<Action, ParseError> {
    let (w, pos) = c.expect_ident()?;
    Action::parse_at(&w, pos)
}

fn rule(c: &mut Cursor<'_>) -> Result<Rule, ParseError> {
    let action = action(c)?;
    c.expect_keyword("when")?;
    let mut p = CondParser { c, depth: 0, atoms: 0 };
    let condition = p.or_expr()?;
    let explanation = if c.peek_is_word("explain")? {
        c.advance()?;
        Some(c.expect_string()?.0)
    } else {
        None
    };
    Ok(Rule {
        action,
        condition,
        explanation,
    })
}

struct CondParser<'c, 'a> {
    c: &'c mut Cursor<'a>,
    depth: usize,
    atoms: usize,
}

impl CondParser<'_, '_> {
    fn or_expr(&mut self) -> Result<Condition, ParseError> {
        let mut left = self.and_expr()?;
        while self.c.peek_is_word("or")? {
            self.c.advance()?;
            let right = self.and_expr()?;
            left = Condition::or(left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Condition, ParseError> {
        let mut left = self.unary()?;
        while self.c.peek_is_word("and")? {
            self.c.advance()?;
            let right = self.unary()?;
            left = Condition::and(left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Condition, ParseError> {
        if self.c.peek_is_word("not")? {
            self.c.advance()?;
            Ok(Condition::negate(self.primary()?))
        } else {
            self.primary()
        }
    }

    fn primary(&mut self) -> Result<Condition, ParseError> {
        let t = self.c.advance()?;
        match &t.tok {
            Tok::LParen => {
                self.depth += 1;
                if self.depth > MAX_NESTING {
                    return Err(ParseError::at(t.pos, "condition nested too deeply"));
                }
                let inner = self.or_expr()?;
                self.c.expect(Tok::RParen)?;
                self.depth -= 1;
                Ok(inner)
            }
            Tok::Word(w) => {
                self.atoms += 1;
                if self.atoms > MAX_ATOMS {
                    return Err(ParseError::at(t.pos, "condition has too many atoms"));
                }
                let atom = match w.as_str() {
                    "any-statement" => Atom::AnyStatement(self.parenthesized(stmt_pred)?),
                    "all-statements" => Atom::AllStatements(self.parenthesized(stmt_pred)?),
                    "policy" => Atom::Policy(self.parenthesized(policy_pred)?),
                    "not" => return Err(ParseError::at(t.pos, "'not not' needs parentheses")),
                    other => {
                        return Err(ParseError::at(
                            t.pos,
                            format!("unknown condition atom '{other}'"),
                        ))
                    }
                };
                Ok(Condition::Atom(atom))
            }
            other => Err(ParseError::at(t.pos, format!("expected condition, found {other}"))),
        }
    }

    fn parenthesized<T>(
        &mut self,
        inner: fn(&mut Cursor<'_>) -> Result<T, ParseError>,
    ) -> Result<T, ParseError> {
        self.c.expect(Tok::LParen)?;
        let v = inner(self.c)?;
        self.c.expect(Tok::RParen)?;
        Ok(v)
    }
}

fn enum_set<T: Ord>(
    c: &mut Cursor<'_>,
    parse: fn(&str, Pos) -> Result<T, ParseError>,
) -> Result<BTreeSet<T>, ParseError> {
    c.expect(Tok::LBrace)?;
    let mut out = BTreeSet::new();
    loop {
        let (w, pos) = c.expect_ident()?;
        if !out.insert(parse(&w, pos)?) {
            return Err(ParseError::at(pos, "duplicate list item"));
        }
        if c.peek_is(&Tok::Comma)? {
            c.advance()?;
        } else {
            break;
        }
    }
    c.expect(Tok::RBrace)?;
    Ok(out)
}

fn one<T>(c: &mut Cursor<'_>, parse: fn(&str, Pos) -> Result<T, ParseError>) -> Result<T, ParseError> {
    let (w, pos) = c.expect_ident()?;
    parse(&w, pos)
}

fn operator(c: &mut Cursor<'_>, subject: &str, ops: &[&str]) -> Result<String, ParseError> {
    let (w, pos) = c.expect_ident()?;
    if ops.contains(&w.as_str()) {
        Ok(w)
    } else {
        let expected: Vec<String> = ops.iter().map(|o| format!("'{o}'")).collect();
        Err(ParseError::at(
            pos,
            format!("expected {} after '{subject}', found '{w}'", expected.join(" or ")),
        ))
    }
}

fn stmt_pred(c: &mut Cursor<'_>) -> Result<StmtPred, ParseError> {
    let (subject, pos) = c.expect_ident()?;
    Ok(match subject.as_str() {
        "purpose" => match operator(c, "purpose", &["includes", "within"])?.as_str() {
            "includes" => StmtPred::PurposeIncludes(one(c, Purpose::parse_at)?),
            _ => StmtPred::PurposeWithin(enum_set(c, Purpose::parse_at)?),
        },
        "recipients" => match operator(c, "recipients", &["includes", "within"])?.as_str() {
            "includes" => StmtPred::RecipientsIncludes(one(c, Recipient::parse_at)?),
            _ => StmtPred::RecipientsWithin(enum_set(c, Recipient::parse_at)?),
        },
        "retention" => match operator(c, "retention", &["is", "in"])?.as_str() {
            "is" => StmtPred::RetentionIs(one(c, Retention::parse_at)?),
            _ => StmtPred::RetentionIn(enum_set(c, Retention::parse_at)?),
        },
        "data" => match operator(c, "data", &["under", "includes"])?.as_str() {
            "under" => StmtPred::DataUnder(c.expect_path()?.0),
            _ => StmtPred::DataIncludes(c.expect_path()?.0),
        },
        "category" => {
            operator(c, "category", &["includes"])?;
            StmtPred::CategoryIncludes(one(c, Category::parse_at)?)
        }
        other => {
            return Err(ParseError::at(
                pos,
                format!("unknown statement predicate '{other}'"),
            ))
        }
    })
}

fn policy_pred(c: &mut Cursor<'_>) -> Result<PolicyPred, ParseError> {
    c.expect_keyword("has-seal")?;
    if matches!(c.peek()?.tok, Tok::Str(_)) {
        Ok(PolicyPred::HasSeal(c.expect_string()?.0))
    } else {
        Ok(PolicyPred::HasAnySeal)
    }
}

/// Data paths in conditions that the schema does not know. These are
/// warnings: sites may use extension schemas the user has not loaded.
pub fn ruleset_warnings(ruleset: &RuleSet, schema: &DataSchema) -> Vec<ValidationIssue> {
    let mut out = Vec::new();
    for (i, r) in ruleset.rules.iter().enumerate() {
        for atom in r.condition.atoms() {
            let pred = match atom {
                Atom::AnyStatement(p) | Atom::AllStatements(p) => p,
                Atom::Policy(_) => continue,
            };
            if let StmtPred::DataUnder(path) | StmtPred::DataIncludes(path) = pred {
                if schema.resolve_refs(path).is_err() {
                    out.push(ValidationIssue {
                        severity: Severity::Warning,
                        location: IssueLocation::Path {
                            path: format!("rule[{}]", i + 1),
                        },
                        message: format!("data path '{path}' is not in the loaded schema"),
                    });
                }
            }
        }
    }
    out
}
