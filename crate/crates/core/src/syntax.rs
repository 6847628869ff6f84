//! Lexer and recursive-descent parser for the ASCII formula syntax.
//!
//! ```text
//! formula := imp
//! imp     := dis ("->" imp)?
//! dis     := con ("\/" con)*
//! con     := un ("/\" un)*
//! un      := "~" un | "@" ident "." un | "#" ident "." un | "$" un
//!          | "(" formula ")" | atom | dirref
//! dirref  := "!"? "/" ident ("(" terms ")")?
//! atom    := ident ("(" terms ")")?
//! term    := sum ; sum := prod ("+" prod)* ; prod := prim ("*" prim)*
//! prim    := numeral | ident | ident "(" terms ")" | UpperIdent | "(" sum ")"
//! ```
//!
//! A lower-case identifier in term position is a bound variable when an
//! enclosing quantifier binds it and a constant otherwise. Upper-case
//! identifiers are directory parameters inside clause bodies; elsewhere only
//! global-variable names `W<k>` are accepted.

use std::fmt;

use thiserror::Error;

use crate::formula::{DirRef, Formula};
use crate::term::{GlobalVar, Symbol, Term, SUCC};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Upper(String),
    Num(u64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Colon,
    Semi,
    At,
    Hash,
    Dollar,
    Tilde,
    Bang,
    Slash,
    AndOp,
    OrOp,
    Arrow,
    Plus,
    Star,
    Minus,
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) | Tok::Upper(s) => return write!(f, "`{s}`"),
            Tok::Num(n) => return write!(f, "`{n}`"),
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::Colon => ":",
            Tok::Semi => ";",
            Tok::At => "@",
            Tok::Hash => "#",
            Tok::Dollar => "$",
            Tok::Tilde => "~",
            Tok::Bang => "!",
            Tok::Slash => "/",
            Tok::AndOp => "/\\",
            Tok::OrOp => "\\/",
            Tok::Arrow => "->",
            Tok::Plus => "+",
            Tok::Star => "*",
            Tok::Minus => "-",
            Tok::Eq => "=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Eof => return f.write_str("end of input"),
        };
        write!(f, "`{s}`")
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

/// Splits `text` into tokens. `%` starts a comment running to end of line.
pub(crate) fn lex(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let err = |message: String| SyntaxError { line: tl, col: tc, message };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, width) = if c.is_ascii_alphabetic() {
            let start = i;
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let word: String = chars[start..j].iter().collect();
            let tok = if c.is_ascii_uppercase() { Tok::Upper(word) } else { Tok::Ident(word) };
            (tok, j - start)
        } else if c.is_ascii_digit() {
            let start = i;
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let digits: String = chars[start..j].iter().collect();
            let n = digits
                .parse::<u64>()
                .map_err(|_| err(format!("numeral `{digits}` out of range")))?;
            (Tok::Num(n), j - start)
        } else {
            match (c, next) {
                ('/', Some('\\')) => (Tok::AndOp, 2),
                ('\\', Some('/')) => (Tok::OrOp, 2),
                ('-', Some('>')) => (Tok::Arrow, 2),
                ('<', Some('=')) => (Tok::Le, 2),
                ('>', Some('=')) => (Tok::Ge, 2),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('{', _) => (Tok::LBrace, 1),
                ('}', _) => (Tok::RBrace, 1),
                (',', _) => (Tok::Comma, 1),
                ('.', _) => (Tok::Dot, 1),
                (':', _) => (Tok::Colon, 1),
                (';', _) => (Tok::Semi, 1),
                ('@', _) => (Tok::At, 1),
                ('#', _) => (Tok::Hash, 1),
                ('$', _) => (Tok::Dollar, 1),
                ('~', _) => (Tok::Tilde, 1),
                ('!', _) => (Tok::Bang, 1),
                ('/', _) => (Tok::Slash, 1),
                ('+', _) => (Tok::Plus, 1),
                ('*', _) => (Tok::Star, 1),
                ('-', _) => (Tok::Minus, 1),
                ('=', _) => (Tok::Eq, 1),
                ('<', _) => (Tok::Lt, 1),
                ('>', _) => (Tok::Gt, 1),
                _ => return Err(err(format!("unexpected character `{c}`"))),
            }
        };
        out.push(Token { tok, line: tl, col: tc });
        i += width;
        col += width;
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// How upper-case identifiers in term position are read.
#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum UpperMode {
    /// Only the listed parameters (and `W<k>` globals) are accepted.
    Params,
    /// Every upper-case identifier becomes a parameter (clause patterns).
    AnyParam,
}

pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    scope: Vec<Symbol>,
    params: Vec<Symbol>,
    upper: UpperMode,
    depth: usize,
}

/// Deepest nesting of terms and unary formulas the parser accepts.
pub const MAX_NESTING: usize = 256;

impl Parser {
    pub fn new(text: &str) -> Result<Self, SyntaxError> {
        Ok(Parser { tokens: lex(text)?, pos: 0, scope: Vec::new(), params: Vec::new(), upper: UpperMode::Params, depth: 0 })
    }

    pub fn with_params(mut self, params: &[Symbol]) -> Self {
        self.params = params.to_vec();
        self
    }

    pub fn set_upper_mode(&mut self, mode: UpperMode) {
        self.upper = mode;
    }

    pub fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    pub fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn error(&self, message: impl Into<String>) -> SyntaxError {
        let t = &self.tokens[self.pos];
        SyntaxError { line: t.line, col: t.col, message: message.into() }
    }

    pub fn unexpected(&self, wanted: &str) -> SyntaxError {
        self.error(format!("expected {wanted}, found {}", self.peek()))
    }

    pub fn expect(&mut self, tok: Tok) -> Result<(), SyntaxError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    pub fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub fn expect_eof(&self) -> Result<(), SyntaxError> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    pub fn formula(&mut self) -> Result<Formula, SyntaxError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.formula()?;
            Ok(Formula::implies(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn disjunction(&mut self) -> Result<Formula, SyntaxError> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::OrOp) {
            lhs = Formula::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, SyntaxError> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::AndOp) {
            lhs = Formula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, SyntaxError> {
        self.nested(Self::unary_inner)
    }

    fn unary_inner(&mut self) -> Result<Formula, SyntaxError> {
        match self.peek().clone() {
            Tok::Tilde => {
                self.bump();
                Ok(Formula::neg(self.unary()?))
            }
            Tok::Dollar => {
                self.bump();
                Ok(Formula::recur(self.unary()?))
            }
            Tok::At | Tok::Hash => {
                let universal = self.bump() == Tok::At;
                let var = Symbol::new(&self.ident()?);
                self.expect(Tok::Dot)?;
                self.scope.push(var.clone());
                let body = self.unary();
                self.scope.pop();
                let body = Box::new(body?);
                Ok(if universal { Formula::ChAll(var, body) } else { Formula::ChExists(var, body) })
            }
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Bang | Tok::Slash => {
                let copy = self.eat(&Tok::Bang);
                self.expect(Tok::Slash)?;
                let name = Symbol::new(&self.ident()?);
                let args = self.opt_args()?;
                Ok(Formula::DirRef(DirRef { name, args, copy }))
            }
            Tok::Ident(name) => {
                self.bump();
                let args = self.opt_args()?;
                Ok(Formula::Atom(Symbol::new(&name), args))
            }
            _ => Err(self.unexpected("formula")),
        }
    }

    fn opt_args(&mut self) -> Result<Vec<Term>, SyntaxError> {
        if self.eat(&Tok::LParen) {
            let args = self.terms()?;
            self.expect(Tok::RParen)?;
            Ok(args)
        } else {
            Ok(Vec::new())
        }
    }

    fn terms(&mut self) -> Result<Vec<Term>, SyntaxError> {
        let mut out = vec![self.term()?];
        while self.eat(&Tok::Comma) {
            out.push(self.term()?);
        }
        Ok(out)
    }

    pub fn term(&mut self) -> Result<Term, SyntaxError> {
        self.nested(Self::sum)
    }

    fn nested<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T, SyntaxError>) -> Result<T, SyntaxError> {
        if self.depth >= MAX_NESTING {
            return Err(self.error(format!("nesting deeper than {MAX_NESTING}")));
        }
        self.depth += 1;
        let r = f(self);
        self.depth -= 1;
        r
    }

    fn sum(&mut self) -> Result<Term, SyntaxError> {
        let mut lhs = self.product()?;
        while self.eat(&Tok::Plus) {
            lhs = Term::plus(lhs, self.product()?);
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Term, SyntaxError> {
        let mut lhs = self.primary()?;
        while self.eat(&Tok::Star) {
            lhs = Term::times(lhs, self.primary()?);
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<Term, SyntaxError> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Term::Num(n))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(name) => {
                if *self.peek_at(1) == Tok::LParen {
                    let at = self.error("");
                    self.bump();
                    let args = self.opt_args()?;
                    if name == SUCC && args.len() != 1 {
                        return Err(SyntaxError {
                            message: format!("`s` takes one argument, found {}", args.len()),
                            ..at
                        });
                    }
                    return Ok(Term::App(Symbol::new(&name), args));
                }
                self.bump();
                let sym = Symbol::new(&name);
                Ok(if self.scope.contains(&sym) { Term::Bound(sym) } else { Term::Const(sym) })
            }
            Tok::Upper(name) => {
                let sym = Symbol::new(&name);
                if self.upper == UpperMode::AnyParam || self.params.contains(&sym) {
                    self.bump();
                    if !self.params.contains(&sym) {
                        self.params.push(sym.clone());
                    }
                    return Ok(Term::Param(sym));
                }
                if let Some(k) = global_index(&name) {
                    self.bump();
                    return Ok(Term::Global(GlobalVar(k)));
                }
                Err(self.error(format!("unbound variable `{name}`")))
            }
            _ => Err(self.unexpected("term")),
        }
    }
}

fn global_index(name: &str) -> Option<u32> {
    let digits = name.strip_prefix('W')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub fn parse_formula(text: &str) -> Result<Formula, SyntaxError> {
    parse_formula_with_params(text, &[])
}

/// Parses a formula in which the upper-case identifiers in `params` denote
/// directory parameters.
pub fn parse_formula_with_params(text: &str, params: &[Symbol]) -> Result<Formula, SyntaxError> {
    let mut p = Parser::new(text)?.with_params(params);
    let f = p.formula()?;
    p.expect_eof()?;
    Ok(f)
}

pub fn parse_term(text: &str) -> Result<Term, SyntaxError> {
    let mut p = Parser::new(text)?;
    let t = p.term()?;
    p.expect_eof()?;
    Ok(t)
}
