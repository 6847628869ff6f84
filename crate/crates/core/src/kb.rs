//! Knowledge-base files: one directory definition per line.
//!
//! ```text
//! # factorial
//! /c = fact(0,1)
//! /d = $@x.@y.(fact(x,y) -> fact(x+1,x*y+y))
//! /query = @y.#z.fact(y,z)
//! query /query
//! ```
//!
//! Clauses of one recursive directory are given on separate lines and are
//! collected in order. `#` starts a comment only as the first non-blank
//! character of a line, since it is also the choice-existential symbol.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::directory::{Clause, DefineError, DirectoryTable};
use crate::syntax::{Parser, SyntaxError, Tok, UpperMode};
use crate::term::Symbol;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("line {line}: {source}")]
    Syntax { line: usize, source: SyntaxError },
    #[error(transparent)]
    Define(#[from] DefineError),
    #[error("line {line}: duplicate query designation")]
    DuplicateQuery { line: usize },
}

#[derive(Clone, Debug, Default)]
pub struct Kb {
    pub table: DirectoryTable,
    pub query: Option<Symbol>,
    /// Directory names in order of first definition.
    pub order: Vec<Symbol>,
}

impl Kb {
    /// Parameterless directories other than the query that no other
    /// directory refers to. These are the input services when a script does
    /// not name them.
    pub fn default_inputs(&self) -> Vec<Symbol> {
        let referenced = self.table.referenced();
        self.order
            .iter()
            .filter(|n| Some(*n) != self.query.as_ref())
            .filter(|n| !referenced.contains(n))
            .filter(|n| self.table.get(n).is_some_and(|d| d.arity() == 0))
            .cloned()
            .collect()
    }
}

pub fn parse_kb(text: &str) -> Result<Kb, KbError> {
    let mut kb = Kb::default();
    let mut pending: BTreeMap<Symbol, Vec<Clause>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let at = |source: SyntaxError| KbError::Syntax { line, source: SyntaxError { line, ..source } };
        let mut p = Parser::new(trimmed).map_err(at)?;
        if matches!(p.peek(), Tok::Ident(w) if w == "query") {
            p.bump();
            p.expect(Tok::Slash).map_err(at)?;
            let name = Symbol::new(&p.ident().map_err(at)?);
            p.expect_eof().map_err(at)?;
            if kb.query.replace(name).is_some() {
                return Err(KbError::DuplicateQuery { line });
            }
            continue;
        }
        p.expect(Tok::Slash).map_err(at)?;
        let name = Symbol::new(&p.ident().map_err(at)?);
        let pattern = if p.eat(&Tok::LParen) {
            p.set_upper_mode(UpperMode::AnyParam);
            let t = p.term().map_err(at)?;
            p.set_upper_mode(UpperMode::Params);
            p.expect(Tok::RParen).map_err(at)?;
            Some(t)
        } else {
            None
        };
        p.expect(Tok::Eq).map_err(at)?;
        let body = p.formula().map_err(at)?;
        p.expect_eof().map_err(at)?;
        if !kb.order.contains(&name) {
            kb.order.push(name.clone());
        }
        pending.entry(name).or_default().push(Clause { pattern, body });
    }
    for name in kb.order.clone() {
        let clauses = pending.remove(&name).unwrap_or_default();
        kb.table.define(name, clauses)?;
    }
    Ok(kb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::Formula;

    const FACT: &str = "# factorial\n/c = fact(0,1)\n/d = $@x.@y.(fact(x,y) -> fact(x+1,x*y+y))\n/query = @y.#z.fact(y,z)\nquery /query\n";

    #[test]
    fn parses_factorial_kb() {
        let kb = parse_kb(FACT).unwrap();
        assert_eq!(kb.query, Some("query".into()));
        assert_eq!(kb.order.len(), 3);
        assert_eq!(kb.default_inputs(), vec![Symbol::new("c"), Symbol::new("d")]);
        let q = &kb.table.get(&"query".into()).unwrap().clauses[0].body;
        assert!(matches!(q, Formula::ChAll(..)));
    }

    #[test]
    fn recursive_clauses_accumulate() {
        let kb = parse_kb("/m(0) = q\n/m(s(X)) = p /\\ !/m(X)\n").unwrap();
        assert_eq!(kb.table.get(&"m".into()).unwrap().clauses.len(), 2);
        assert!(kb.default_inputs().is_empty());
    }

    #[test]
    fn error_reports_line() {
        let err = parse_kb("/c = p\n/d = (q\n").unwrap_err();
        match err {
            KbError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("{other}"),
        }
        assert!(parse_kb("/c = p(X)").is_err());
        assert!(parse_kb("query /a\nquery /b").is_err());
    }
}
