//! Script surface syntax.
//!
//! ```text
//! script := "algorithm" ident signature? "{" stmt* "}"
//! signature := "(" "{" dir ("," dir)* "}" "," dir ")"
//! stmt   := path ".read(" ident ");" | path ".write;"
//!         | "choose(" restr ("," restr)* ");" | "schoose(" restr ("," restr)* ");"
//!         | "for" ident "=" expr "to" expr ( "{" stmt* "}" | ";" stmt* "endfor;" )
//!         | "if" cond "{" stmt* "}" ("else" "{" stmt* "}")?
//!         | "prove;" | "execute;"
//! restr  := path ":" rule ("," rule)*
//! path   := "/" ident ("." (numeral | ident))*
//! ```

use thiserror::Error;

use super::ast::{CmpOp, Cond, Expr, RestrictionSpec, Script, Signature, Stmt, StmtKind};
use crate::path::{Path, Segment};
use crate::syntax::{Parser, SyntaxError, Tok};
use crate::term::Symbol;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("{0}")]
    Syntax(#[from] SyntaxError),
    #[error("line {line}: script variable `{var}` used before it is defined")]
    Undefined { line: usize, var: Symbol },
}

pub fn parse_script(text: &str) -> Result<Script, ScriptError> {
    let mut p = ScriptParser { p: Parser::new(text)? };
    let script = p.script()?;
    check_defined(&script.body, &mut Vec::new())?;
    Ok(script)
}

struct ScriptParser {
    p: Parser,
}

fn is_word(t: &Tok, w: &str) -> bool {
    matches!(t, Tok::Ident(s) if s == w)
}

impl ScriptParser {
    fn line(&self) -> usize {
        self.p.error("").line
    }

    fn keyword(&mut self, w: &str) -> Result<(), SyntaxError> {
        if is_word(self.p.peek(), w) {
            self.p.bump();
            Ok(())
        } else {
            Err(self.p.unexpected(&format!("`{w}`")))
        }
    }

    fn script(&mut self) -> Result<Script, SyntaxError> {
        self.keyword("algorithm")?;
        let name = match self.p.bump() {
            Tok::Ident(s) | Tok::Upper(s) => Symbol::new(&s),
            _ => return Err(self.p.error("expected algorithm name")),
        };
        let signature = if self.p.eat(&Tok::LParen) { Some(self.signature()?) } else { None };
        self.p.expect(Tok::LBrace)?;
        let body = self.block(|t| *t == Tok::RBrace)?;
        self.p.expect(Tok::RBrace)?;
        self.p.expect_eof()?;
        Ok(Script { name, signature, body })
    }

    fn dir(&mut self) -> Result<Symbol, SyntaxError> {
        self.p.expect(Tok::Slash)?;
        Ok(Symbol::new(&self.p.ident()?))
    }

    fn signature(&mut self) -> Result<Signature, SyntaxError> {
        self.p.expect(Tok::LBrace)?;
        let mut inputs = Vec::new();
        if *self.p.peek() != Tok::RBrace {
            inputs.push(self.dir()?);
            while self.p.eat(&Tok::Comma) {
                inputs.push(self.dir()?);
            }
        }
        self.p.expect(Tok::RBrace)?;
        self.p.expect(Tok::Comma)?;
        let output = self.dir()?;
        self.p.expect(Tok::RParen)?;
        Ok(Signature { inputs, output })
    }

    fn block(&mut self, end: impl Fn(&Tok) -> bool) -> Result<Vec<Stmt>, SyntaxError> {
        let mut out = Vec::new();
        while !end(self.p.peek()) {
            if self.p.at_eof() {
                return Err(self.p.unexpected("statement"));
            }
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let line = self.line();
        let kind = match self.p.peek().clone() {
            Tok::Slash => self.location_stmt()?,
            Tok::Ident(w) => match w.as_str() {
                "choose" | "schoose" => {
                    self.p.bump();
                    self.p.expect(Tok::LParen)?;
                    let specs = self.restrictions()?;
                    self.p.expect(Tok::RParen)?;
                    self.p.expect(Tok::Semi)?;
                    if w == "choose" {
                        StmtKind::Choose(specs)
                    } else {
                        StmtKind::Schoose(specs)
                    }
                }
                "for" => self.for_stmt()?,
                "if" => self.if_stmt()?,
                "prove" | "execute" => {
                    self.p.bump();
                    self.p.expect(Tok::Semi)?;
                    if w == "prove" {
                        StmtKind::Prove
                    } else {
                        StmtKind::Execute
                    }
                }
                other => return Err(self.p.error(format!("unknown statement `{other}`"))),
            },
            _ => return Err(self.p.unexpected("statement")),
        };
        Ok(Stmt { line, kind })
    }

    fn path(&mut self) -> Result<Path, SyntaxError> {
        let dir = self.dir()?;
        let mut segments = Vec::new();
        while *self.p.peek() == Tok::Dot {
            match self.p.peek_at(1).clone() {
                Tok::Num(n) => {
                    let n = u32::try_from(n).map_err(|_| self.p.error("path index out of range"))?;
                    segments.push(Segment::Index(n));
                }
                Tok::Ident(w) if w == "read" || w == "write" => break,
                Tok::Ident(w) => segments.push(Segment::Var(Symbol::new(&w))),
                _ => break,
            }
            self.p.bump();
            self.p.bump();
        }
        Ok(Path { dir, segments })
    }

    fn location_stmt(&mut self) -> Result<StmtKind, SyntaxError> {
        let path = self.path()?;
        self.p.expect(Tok::Dot)?;
        match self.p.bump() {
            Tok::Ident(w) if w == "write" => {
                self.p.expect(Tok::Semi)?;
                Ok(StmtKind::Write { path })
            }
            Tok::Ident(w) if w == "read" => {
                self.p.expect(Tok::LParen)?;
                let var = Symbol::new(&self.p.ident()?);
                self.p.expect(Tok::RParen)?;
                self.p.expect(Tok::Semi)?;
                Ok(StmtKind::Read { path, var })
            }
            _ => Err(self.p.error("expected `read(var)` or `write`")),
        }
    }

    fn restrictions(&mut self) -> Result<Vec<RestrictionSpec>, SyntaxError> {
        let mut specs = Vec::new();
        loop {
            let path = self.path()?;
            self.p.expect(Tok::Colon)?;
            let mut rules = vec![self.rule()?];
            while *self.p.peek() == Tok::Comma && *self.p.peek_at(1) != Tok::Slash {
                self.p.bump();
                rules.push(self.rule()?);
            }
            specs.push(RestrictionSpec { path, rules });
            if !self.p.eat(&Tok::Comma) {
                return Ok(specs);
            }
        }
    }

    fn rule(&mut self) -> Result<crate::prover::ProofRule, SyntaxError> {
        let name = self.p.ident()?;
        name.parse().map_err(|e: crate::prover::UnknownRule| self.p.error(e.to_string()))
    }

    fn for_stmt(&mut self) -> Result<StmtKind, SyntaxError> {
        self.keyword("for")?;
        let var = Symbol::new(&self.p.ident()?);
        self.p.expect(Tok::Eq)?;
        let from = self.expr()?;
        self.keyword("to")?;
        let to = self.expr()?;
        let body = if self.p.eat(&Tok::LBrace) {
            let body = self.block(|t| *t == Tok::RBrace)?;
            self.p.expect(Tok::RBrace)?;
            body
        } else {
            self.p.expect(Tok::Semi)?;
            let body = self.block(|t| is_word(t, "endfor"))?;
            self.keyword("endfor")?;
            self.p.expect(Tok::Semi)?;
            body
        };
        Ok(StmtKind::For { var, from, to, body })
    }

    fn if_stmt(&mut self) -> Result<StmtKind, SyntaxError> {
        self.keyword("if")?;
        let lhs = self.expr()?;
        let op = match self.p.bump() {
            Tok::Eq => CmpOp::Eq,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return Err(self.p.error("expected comparison (=, <, <=, >, >=)")),
        };
        let rhs = self.expr()?;
        self.p.expect(Tok::LBrace)?;
        let then = self.block(|t| *t == Tok::RBrace)?;
        self.p.expect(Tok::RBrace)?;
        let otherwise = if is_word(self.p.peek(), "else") {
            self.p.bump();
            self.p.expect(Tok::LBrace)?;
            let b = self.block(|t| *t == Tok::RBrace)?;
            self.p.expect(Tok::RBrace)?;
            b
        } else {
            Vec::new()
        };
        Ok(StmtKind::If { cond: Cond { lhs, op, rhs }, then, otherwise })
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.atom()?;
        loop {
            if self.p.eat(&Tok::Plus) {
                e = Expr::Add(Box::new(e), Box::new(self.atom()?));
            } else if self.p.eat(&Tok::Minus) {
                e = Expr::Sub(Box::new(e), Box::new(self.atom()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        match self.p.bump() {
            Tok::Num(n) => Ok(Expr::Num(n)),
            Tok::Ident(v) if v != "to" => Ok(Expr::Var(Symbol::new(&v))),
            Tok::LParen => {
                let e = self.expr()?;
                self.p.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => Err(self.p.error("expected a number or a script variable")),
        }
    }
}

/// Variables bound inside a loop or a branch are not visible after it.
fn check_defined(body: &[Stmt], scope: &mut Vec<Symbol>) -> Result<(), ScriptError> {
    let mark = scope.len();
    let need = |vars: Vec<Symbol>, scope: &[Symbol], line: usize| -> Result<(), ScriptError> {
        match vars.into_iter().find(|v| !scope.contains(v)) {
            Some(var) => Err(ScriptError::Undefined { line, var }),
            None => Ok(()),
        }
    };
    let path_vars = |p: &Path| -> Vec<Symbol> {
        p.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Var(v) => Some(v.clone()),
                Segment::Index(_) => None,
            })
            .collect()
    };
    for stmt in body {
        match &stmt.kind {
            StmtKind::Read { path, var } => {
                need(path_vars(path), scope, stmt.line)?;
                scope.push(var.clone());
            }
            StmtKind::Write { path } => need(path_vars(path), scope, stmt.line)?,
            StmtKind::Choose(specs) | StmtKind::Schoose(specs) => {
                for s in specs {
                    need(path_vars(&s.path), scope, stmt.line)?;
                }
            }
            StmtKind::For { var, from, to, body } => {
                let mut vs = Vec::new();
                from.vars(&mut vs);
                to.vars(&mut vs);
                need(vs, scope, stmt.line)?;
                scope.push(var.clone());
                check_defined(body, scope)?;
                scope.pop();
            }
            StmtKind::If { cond, then, otherwise } => {
                let mut vs = Vec::new();
                cond.lhs.vars(&mut vs);
                cond.rhs.vars(&mut vs);
                need(vs, scope, stmt.line)?;
                check_defined(then, scope)?;
                check_defined(otherwise, scope)?;
            }
            StmtKind::Prove | StmtKind::Execute => {}
        }
    }
    scope.truncate(mark);
    Ok(())
}
