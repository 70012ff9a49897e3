use std::fmt;
use std::iter::Peekable;
use std::str::CharIndices;

use thiserror::Error;

/// Parse failure; `position` is a 0-based character offset into the input.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{kind} at position {position}")]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("empty response")]
    EmptyResponse,
    #[error("expected '~'")]
    MissingTilde,
    #[error("empty predictor list")]
    EmptyPredictors,
    #[error("expected a column name after '+'")]
    DanglingPlus,
    #[error("duplicate predictor {0}")]
    DuplicatePredictor(String),
    #[error("response {0} used as its own predictor")]
    SelfReference(String),
    #[error("unexpected character {0:?}")]
    Unexpected(char),
}

/// `response ~ p1 + p2 + ...`; an intercept is always implied.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Formula {
    pub response: String,
    pub predictors: Vec<String>,
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}~{}", self.response, self.predictors.join("+"))
    }
}

impl std::str::FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}

struct Lexer<'a> {
    chars: Peekable<CharIndices<'a>>,
    /// Character (not byte) offset of the next unread char.
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.char_indices().peekable(),
            pos: 0,
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next().map(|(_, c)| c);
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn ident(&mut self) -> Option<(usize, String)> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return None,
        }
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                out.push(c);
                self.bump();
            } else {
                break;
            }
        }
        Some((start, out))
    }

    fn error_here(&mut self, fallback: ParseErrorKind) -> ParseError {
        let kind = match self.peek() {
            Some(c) => ParseErrorKind::Unexpected(c),
            None => fallback,
        };
        ParseError {
            position: self.pos,
            kind,
        }
    }
}

/// Parses `identifier '~' identifier ('+' identifier)*`, ignoring whitespace
/// around tokens. Identifiers match `[A-Za-z_][A-Za-z0-9_.]*`.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let mut lx = Lexer::new(text);
    let response = match lx.ident() {
        Some((_, r)) => r,
        None => {
            return Err(match lx.peek() {
                Some('~') | None => ParseError {
                    position: lx.pos,
                    kind: ParseErrorKind::EmptyResponse,
                },
                Some(c) => ParseError {
                    position: lx.pos,
                    kind: ParseErrorKind::Unexpected(c),
                },
            })
        }
    };
    lx.skip_ws();
    if lx.peek() != Some('~') {
        return Err(lx.error_here(ParseErrorKind::MissingTilde));
    }
    lx.bump();

    let mut predictors: Vec<String> = Vec::new();
    loop {
        let Some((at, name)) = lx.ident() else {
            let fallback = if predictors.is_empty() {
                ParseErrorKind::EmptyPredictors
            } else {
                ParseErrorKind::DanglingPlus
            };
            return Err(lx.error_here(fallback));
        };
        if name == response {
            return Err(ParseError {
                position: at,
                kind: ParseErrorKind::SelfReference(name),
            });
        }
        if predictors.contains(&name) {
            return Err(ParseError {
                position: at,
                kind: ParseErrorKind::DuplicatePredictor(name),
            });
        }
        predictors.push(name);
        lx.skip_ws();
        match lx.peek() {
            None => break,
            Some('+') => {
                lx.bump();
            }
            Some(c) => {
                return Err(ParseError {
                    position: lx.pos,
                    kind: ParseErrorKind::Unexpected(c),
                })
            }
        }
    }
    Ok(Formula {
        response,
        predictors,
    })
}
