//! Recursive-descent parser for the payoff grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := unary (('*'|'/') unary)*
//! unary  := '-' unary | factor
//! factor := atom ('^' atom)?
//! atom   := number | ident | '(' expr ')' | func '(' args ')'
//! func   := exp | ln | sin | cos | max
//! ident  := s1 | s2 | u | v | x | y | pi
//! ```
//!
//! Precedence is therefore power > unary minus > `*` `/` > `+` `-`, and the
//! binary operators associate to the left. `pi` parses to the f64 constant.

use super::{Expr, Var};
use std::fmt;
use thiserror::Error;

const MAX_INPUT_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedEnd,
    UnexpectedToken(String),
    InvalidNumber(String),
    UnknownIdentifier(String),
    ArityMismatch {
        func: &'static str,
        expected: usize,
        got: usize,
    },
    InputTooLong(usize),
    NonFiniteLiteral(String),
}

/// Syntax error with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub pos: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: ", self.pos)?;
        match &self.kind {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character '{c}'"),
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of input"),
            ParseErrorKind::UnexpectedToken(t) => write!(f, "unexpected token '{t}'"),
            ParseErrorKind::InvalidNumber(s) => write!(f, "invalid number literal '{s}'"),
            ParseErrorKind::UnknownIdentifier(s) => write!(f, "unknown identifier '{s}'"),
            ParseErrorKind::ArityMismatch {
                func,
                expected,
                got,
            } => write!(f, "{func} takes {expected} argument(s), got {got}"),
            ParseErrorKind::InputTooLong(n) => {
                write!(f, "input is {n} bytes, limit is {MAX_INPUT_BYTES}")
            }
            ParseErrorKind::NonFiniteLiteral(s) => {
                write!(f, "literal '{s}' does not fit a finite double")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Number(n) => write!(f, "{n}"),
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Plus => write!(f, "+"),
            Tok::Minus => write!(f, "-"),
            Tok::Star => write!(f, "*"),
            Tok::Slash => write!(f, "/"),
            Tok::Caret => write!(f, "^"),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::Comma => write!(f, ","),
            Tok::Eof => write!(f, "<end>"),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next_tok(&mut self) -> Result<(usize, Tok), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((start, Tok::Eof));
        }
        let c = self.src[self.pos] as char;
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = simple {
            self.pos += 1;
            return Ok((start, t));
        }
        if c.is_ascii_digit() || c == '.' {
            let mut end = self.pos;
            let mut seen_exp = false;
            while end < self.src.len() {
                let b = self.src[end] as char;
                if b.is_ascii_digit() || b == '.' {
                    end += 1;
                } else if (b == 'e' || b == 'E') && !seen_exp {
                    // accept scientific notation, including a signed exponent
                    seen_exp = true;
                    end += 1;
                    if end < self.src.len()
                        && (self.src[end] == b'+' || self.src[end] == b'-')
                    {
                        end += 1;
                    }
                } else {
                    break;
                }
            }
            let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
            let value: f64 = text.parse().map_err(|_| ParseError {
                pos: start,
                kind: ParseErrorKind::InvalidNumber(text.to_string()),
            })?;
            if !value.is_finite() {
                return Err(ParseError {
                    pos: start,
                    kind: ParseErrorKind::NonFiniteLiteral(text.to_string()),
                });
            }
            self.pos = end;
            return Ok((start, Tok::Number(value)));
        }
        if c.is_ascii_alphabetic() {
            let mut end = self.pos;
            while end < self.src.len()
                && ((self.src[end] as char).is_ascii_alphanumeric() || self.src[end] == b'_')
            {
                end += 1;
            }
            let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
            self.pos = end;
            return Ok((start, Tok::Ident(text.to_string())));
        }
        Err(ParseError {
            pos: start,
            kind: ParseErrorKind::UnexpectedChar(c),
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    lookahead: (usize, Tok),
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let lookahead = lexer.next_tok()?;
        Ok(Parser { lexer, lookahead })
    }

    fn peek(&self) -> &Tok {
        &self.lookahead.1
    }

    fn pos(&self) -> usize {
        self.lookahead.0
    }

    fn advance(&mut self) -> Result<(usize, Tok), ParseError> {
        let next = self.lexer.next_tok()?;
        Ok(std::mem::replace(&mut self.lookahead, next))
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.advance()?;
            Ok(())
        } else {
            Err(ParseError {
                pos: self.pos(),
                kind: ParseErrorKind::UnexpectedToken(self.peek().to_string()),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.advance()?;
                    acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.advance()?;
                    acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.advance()?;
                    acc = Expr::Mul(Box::new(acc), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.advance()?;
                    acc = Expr::Div(Box::new(acc), Box::new(self.unary()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.advance()?;
            let inner = self.unary()?;
            // fold a negated literal into the constant so -80 is one node
            if let Expr::Const(c) = inner {
                return Ok(Expr::Const(-c));
            }
            return Ok(Expr::Mul(Box::new(Expr::Const(-1.0)), Box::new(inner)));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.advance()?;
            let exponent = self.atom()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (pos, tok) = self.advance()?;
        match tok {
            Tok::Number(n) => Ok(Expr::Const(n)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => self.ident(pos, name),
            Tok::Eof => Err(ParseError {
                pos,
                kind: ParseErrorKind::UnexpectedEnd,
            }),
            other => Err(ParseError {
                pos,
                kind: ParseErrorKind::UnexpectedToken(other.to_string()),
            }),
        }
    }

    fn ident(&mut self, pos: usize, name: String) -> Result<Expr, ParseError> {
        if name == "pi" {
            return Ok(Expr::Const(std::f64::consts::PI));
        }
        if let Some(v) = Var::from_name(&name) {
            return Ok(Expr::Var(v));
        }
        let func: Option<&'static str> = match name.as_str() {
            "exp" => Some("exp"),
            "ln" => Some("ln"),
            "sin" => Some("sin"),
            "cos" => Some("cos"),
            "max" => Some("max"),
            _ => None,
        };
        let Some(func) = func else {
            return Err(ParseError {
                pos,
                kind: ParseErrorKind::UnknownIdentifier(name),
            });
        };
        self.expect(Tok::LParen)?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.advance()?;
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        let expected = if func == "max" { 2 } else { 1 };
        if args.len() != expected {
            return Err(ParseError {
                pos,
                kind: ParseErrorKind::ArityMismatch {
                    func,
                    expected,
                    got: args.len(),
                },
            });
        }
        let mut it = args.into_iter();
        Ok(match func {
            "exp" => Expr::Exp(Box::new(it.next().unwrap())),
            "ln" => Expr::Ln(Box::new(it.next().unwrap())),
            "sin" => Expr::Sin(Box::new(it.next().unwrap())),
            "cos" => Expr::Cos(Box::new(it.next().unwrap())),
            "max" => {
                let a = it.next().unwrap();
                let b = it.next().unwrap();
                Expr::Max(Box::new(a), Box::new(b))
            }
            _ => unreachable!(),
        })
    }
}

/// Parse `text` into the unique tree the grammar prescribes.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    if text.len() > MAX_INPUT_BYTES {
        return Err(ParseError {
            pos: 0,
            kind: ParseErrorKind::InputTooLong(text.len()),
        });
    }
    let mut parser = Parser::new(text)?;
    let expr = parser.expr()?;
    if *parser.peek() != Tok::Eof {
        return Err(ParseError {
            pos: parser.pos(),
            kind: ParseErrorKind::UnexpectedToken(parser.peek().to_string()),
        });
    }
    Ok(expr)
}
