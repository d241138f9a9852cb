//! Token rules shared by every text format in the crate (policies, rulesets,
//! data requests, schema extensions, repository and override files).
//!
//! Identifiers are `[a-z][a-z0-9-]*`, paths are dot-joined identifiers,
//! strings are double-quoted with `\"` and `\\` escapes, `#` starts a comment
//! running to end of line, and whitespace is insignificant.

use std::fmt;
use std::iter::Peekable;
use std::str::Chars;

use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    /// A bare identifier or a dotted path.
    Word(String),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "'{w}'"),
            Tok::Str(s) => write!(f, "string {}", quote(s)),
            Tok::LBrace => f.write_str("'{'"),
            Tok::RBrace => f.write_str("'}'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::Comma => f.write_str("','"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

struct Lexer<'a> {
    chars: Peekable<Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            column: self.column,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c == '#' {
                while let Some(&c) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    /// Returns the next token, or `None` at end of input.
    fn next_token(&mut self) -> Result<Option<Token>, ParseError> {
        self.skip_trivia();
        let pos = self.pos();
        let Some(&c) = self.chars.peek() else {
            return Ok(None);
        };
        let tok = match c {
            '{' => {
                self.bump();
                Tok::LBrace
            }
            '}' => {
                self.bump();
                Tok::RBrace
            }
            '(' => {
                self.bump();
                Tok::LParen
            }
            ')' => {
                self.bump();
                Tok::RParen
            }
            ',' => {
                self.bump();
                Tok::Comma
            }
            '"' => Tok::Str(self.string(pos)?),
            'a'..='z' => Tok::Word(self.word(pos)?),
            other => {
                return Err(ParseError::at(
                    pos,
                    format!("unexpected character {other:?}"),
                ))
            }
        };
        Ok(Some(Token { tok, pos }))
    }

    fn string(&mut self, start: Pos) -> Result<String, ParseError> {
        self.bump();
        let mut out = String::new();
        loop {
            let pos = self.pos();
            match self.bump() {
                None | Some('\n') => {
                    return Err(ParseError::at(start, "unterminated string"));
                }
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some(other) => {
                        return Err(ParseError::at(
                            pos,
                            format!("invalid escape '\\{other}' in string"),
                        ))
                    }
                    None => return Err(ParseError::at(start, "unterminated string")),
                },
                Some(c) if c.is_control() && c != '\t' => {
                    return Err(ParseError::at(pos, "control character in string"));
                }
                Some(c) => out.push(c),
            }
        }
    }

    fn word(&mut self, start: Pos) -> Result<String, ParseError> {
        let mut out = String::new();
        loop {
            // one identifier segment
            match self.chars.peek() {
                Some(&c @ 'a'..='z') => {
                    out.push(c);
                    self.bump();
                }
                _ => {
                    return Err(ParseError::at(
                        self.pos(),
                        format!("malformed path '{out}': segment must start with a lowercase letter"),
                    ))
                }
            }
            while let Some(&c) = self.chars.peek() {
                if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' {
                    out.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
            match self.chars.peek() {
                Some('.') => {
                    out.push('.');
                    self.bump();
                }
                Some(&c) if c.is_alphanumeric() || c == '_' => {
                    return Err(ParseError::at(
                        start,
                        format!("invalid character {c:?} in identifier"),
                    ))
                }
                _ => return Ok(out),
            }
        }
    }
}

/// One-token lookahead cursor used by all the recursive-descent parsers.
pub struct Cursor<'a> {
    lexer: Lexer<'a>,
    peeked: Option<Token>,
    last: Pos,
}

impl<'a> Cursor<'a> {
    pub fn new(src: &'a str) -> Self {
        Self {
            lexer: Lexer::new(src),
            peeked: None,
            last: Pos { line: 1, column: 1 },
        }
    }

    pub fn peek(&mut self) -> Result<&Token, ParseError> {
        if self.peeked.is_none() {
            let token = match self.lexer.next_token()? {
                Some(t) => t,
                // end of input is reported at the last real token so errors
                // stay on the line that is actually incomplete
                None => Token {
                    tok: Tok::Eof,
                    pos: self.last,
                },
            };
            self.peeked = Some(token);
        }
        Ok(self.peeked.as_ref().expect("peeked token"))
    }

    pub fn advance(&mut self) -> Result<Token, ParseError> {
        self.peek()?;
        let token = self.peeked.take().expect("peeked token");
        if token.tok != Tok::Eof {
            self.last = token.pos;
        }
        Ok(token)
    }

    pub fn peek_is(&mut self, tok: &Tok) -> Result<bool, ParseError> {
        Ok(&self.peek()?.tok == tok)
    }

    pub fn peek_is_word(&mut self, word: &str) -> Result<bool, ParseError> {
        Ok(matches!(&self.peek()?.tok, Tok::Word(w) if w == word))
    }

    pub fn expect(&mut self, tok: Tok) -> Result<Pos, ParseError> {
        let t = self.advance()?;
        if t.tok == tok {
            Ok(t.pos)
        } else {
            Err(ParseError::at(t.pos, format!("expected {tok}, found {}", t.tok)))
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<Pos, ParseError> {
        let t = self.advance()?;
        match &t.tok {
            Tok::Word(w) if w == kw => Ok(t.pos),
            other => Err(ParseError::at(t.pos, format!("expected '{kw}', found {other}"))),
        }
    }

    pub fn expect_string(&mut self) -> Result<(String, Pos), ParseError> {
        let t = self.advance()?;
        match t.tok {
            Tok::Str(s) => Ok((s, t.pos)),
            other => Err(ParseError::at(t.pos, format!("expected string, found {other}"))),
        }
    }

    /// A single identifier (no dots).
    pub fn expect_ident(&mut self) -> Result<(String, Pos), ParseError> {
        let t = self.advance()?;
        match t.tok {
            Tok::Word(w) if !w.contains('.') => Ok((w, t.pos)),
            other => Err(ParseError::at(t.pos, format!("expected identifier, found {other}"))),
        }
    }

    /// An identifier or dotted path.
    pub fn expect_path(&mut self) -> Result<(String, Pos), ParseError> {
        let t = self.advance()?;
        match t.tok {
            Tok::Word(w) => Ok((w, t.pos)),
            other => Err(ParseError::at(t.pos, format!("expected data path, found {other}"))),
        }
    }

    pub fn expect_eof(&mut self) -> Result<(), ParseError> {
        let t = self.advance()?;
        match t.tok {
            Tok::Eof => Ok(()),
            other => Err(ParseError::at(
                t.pos,
                format!("unexpected {other} after end of document"),
            )),
        }
    }
}

/// Quotes a string using the shared escape rules.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

pub fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

/// True for `ident(.ident)*`.
pub fn is_path(s: &str) -> bool {
    !s.is_empty() && s.split('.').all(is_ident)
}

/// Strings must stay on one line to survive the canonical one-field-per-line
/// layout.
pub fn is_valid_text(s: &str) -> bool {
    !s.chars().any(|c| c.is_control() && c != '\t')
}
