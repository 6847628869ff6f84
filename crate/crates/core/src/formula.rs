//! Formulas of the fragment: parallel connectives, choice quantifiers,
//! branching recurrence and directory references.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::term::{Symbol, Term};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct DirRef {
    pub name: Symbol,
    pub args: Vec<Term>,
    /// `!/m` (a fresh copy) when true, `/m` (a shared node) when false.
    pub copy: bool,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Formula {
    Atom(Symbol, Vec<Term>),
    Neg(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    /// `@x.` choice universal.
    ChAll(Symbol, Box<Formula>),
    /// `#x.` choice existential.
    ChExists(Symbol, Box<Formula>),
    /// `$` branching recurrence.
    Recur(Box<Formula>),
    DirRef(DirRef),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no child {index} at depth {depth} ({node} has {arity} children)")]
pub struct LocateError {
    pub index: u32,
    pub depth: usize,
    pub node: &'static str,
    pub arity: usize,
}

impl Formula {
    pub fn atom(pred: &str, args: Vec<Term>) -> Formula {
        Formula::Atom(Symbol::new(pred), args)
    }

    pub fn prop(pred: &str) -> Formula {
        Formula::atom(pred, vec![])
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(f: Formula) -> Formula {
        Formula::Neg(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn all(var: &str, body: Formula) -> Formula {
        Formula::ChAll(Symbol::new(var), Box::new(body))
    }

    pub fn exists(var: &str, body: Formula) -> Formula {
        Formula::ChExists(Symbol::new(var), Box::new(body))
    }

    pub fn recur(body: Formula) -> Formula {
        Formula::Recur(Box::new(body))
    }

    pub fn dir(name: &str, args: Vec<Term>, copy: bool) -> Formula {
        Formula::DirRef(DirRef { name: Symbol::new(name), args, copy })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Formula::Atom(..) => "atom",
            Formula::Neg(_) => "negation",
            Formula::And(..) => "conjunction",
            Formula::Or(..) => "disjunction",
            Formula::Implies(..) => "implication",
            Formula::ChAll(..) => "choice universal",
            Formula::ChExists(..) => "choice existential",
            Formula::Recur(_) => "recurrence",
            Formula::DirRef(_) => "directory reference",
        }
    }

    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::Atom(..) | Formula::DirRef(_) => vec![],
            Formula::Neg(a) | Formula::ChAll(_, a) | Formula::ChExists(_, a) | Formula::Recur(a) => {
                vec![a]
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => vec![a, b],
        }
    }

    fn children_mut(&mut self) -> Vec<&mut Formula> {
        match self {
            Formula::Atom(..) | Formula::DirRef(_) => vec![],
            Formula::Neg(a) | Formula::ChAll(_, a) | Formula::ChExists(_, a) | Formula::Recur(a) => {
                vec![a]
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => vec![a, b],
        }
    }

    /// Bound variables occurring free.
    pub fn free_vars(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, scope: &mut Vec<Symbol>, out: &mut BTreeSet<Symbol>) {
        let mut visit_terms = |terms: &[Term], scope: &Vec<Symbol>| {
            for t in terms {
                collect_term_vars(t, scope, out);
            }
        };
        match self {
            Formula::Atom(_, args) => visit_terms(args, scope),
            Formula::DirRef(r) => visit_terms(&r.args, scope),
            Formula::ChAll(v, body) | Formula::ChExists(v, body) => {
                scope.push(v.clone());
                body.collect_free(scope, out);
                scope.pop();
            }
            _ => {
                for c in self.children() {
                    c.collect_free(scope, out);
                }
            }
        }
    }

    pub fn is_free(&self, v: &Symbol) -> bool {
        match self {
            Formula::Atom(_, args) => args.iter().any(|t| t.occurs_bound(v)),
            Formula::DirRef(r) => r.args.iter().any(|t| t.occurs_bound(v)),
            Formula::ChAll(w, body) | Formula::ChExists(w, body) => w != v && body.is_free(v),
            _ => self.children().iter().any(|c| c.is_free(v)),
        }
    }

    /// Capture-avoiding substitution of `t` for the free occurrences of the
    /// bound variable `v`.
    pub fn substitute(&self, v: &Symbol, t: &Term) -> Formula {
        if !self.is_free(v) {
            return self.clone();
        }
        match self {
            Formula::Atom(p, args) => {
                Formula::Atom(p.clone(), args.iter().map(|a| a.replace_bound(v, t)).collect())
            }
            Formula::DirRef(r) => Formula::DirRef(DirRef {
                name: r.name.clone(),
                args: r.args.iter().map(|a| a.replace_bound(v, t)).collect(),
                copy: r.copy,
            }),
            Formula::Neg(a) => Formula::neg(a.substitute(v, t)),
            Formula::Recur(a) => Formula::recur(a.substitute(v, t)),
            Formula::And(a, b) => Formula::and(a.substitute(v, t), b.substitute(v, t)),
            Formula::Or(a, b) => Formula::or(a.substitute(v, t), b.substitute(v, t)),
            Formula::Implies(a, b) => Formula::implies(a.substitute(v, t), b.substitute(v, t)),
            Formula::ChAll(w, body) | Formula::ChExists(w, body) => {
                let (w, body) = if t.occurs_bound(w) {
                    let fresh = fresh_name(w, |c| t.occurs_bound(c) || body.is_free(c));
                    let renamed = body.substitute(w, &Term::Bound(fresh.clone()));
                    (fresh, renamed)
                } else {
                    (w.clone(), (**body).clone())
                };
                let body = Box::new(body.substitute(v, t));
                match self {
                    Formula::ChAll(..) => Formula::ChAll(w, body),
                    _ => Formula::ChExists(w, body),
                }
            }
        }
    }

    /// Follows 1-based child indices from the root.
    pub fn locate(&self, segments: &[u32]) -> Result<&Formula, LocateError> {
        let mut node = self;
        for (depth, &index) in segments.iter().enumerate() {
            let children = node.children();
            node = index
                .checked_sub(1)
                .and_then(|i| children.get(i as usize).copied())
                .ok_or(LocateError { index, depth, node: node.kind(), arity: children.len() })?;
        }
        Ok(node)
    }

    /// Returns a copy of the formula with the node at `segments` replaced.
    pub fn replace_at(&self, segments: &[u32], by: Formula) -> Result<Formula, LocateError> {
        self.locate(segments)?;
        let mut out = self.clone();
        let mut node = &mut out;
        for &index in segments {
            node = node.children_mut().swap_remove(index as usize - 1);
        }
        *node = by;
        Ok(out)
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Implies(..) => 1,
            Formula::Or(..) => 2,
            Formula::And(..) => 3,
            Formula::Neg(_) | Formula::ChAll(..) | Formula::ChExists(..) | Formula::Recur(_) => 4,
            Formula::Atom(..) | Formula::DirRef(_) => 5,
        }
    }
}

fn collect_term_vars(t: &Term, scope: &[Symbol], out: &mut BTreeSet<Symbol>) {
    match t {
        Term::Bound(v) if !scope.contains(v) => {
            out.insert(v.clone());
        }
        Term::App(_, args) => args.iter().for_each(|a| collect_term_vars(a, scope, out)),
        _ => {}
    }
}

fn fresh_name(base: &Symbol, taken: impl Fn(&Symbol) -> bool) -> Symbol {
    (1..)
        .map(|i| Symbol::new(&format!("{base}{i}")))
        .find(|s| !taken(s))
        .expect("unbounded name supply")
}

pub(crate) fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    if args.is_empty() {
        return Ok(());
    }
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

impl fmt::Display for DirRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.copy {
            f.write_str("!")?;
        }
        write!(f, "/{}", self.name)?;
        write_args(f, &self.args)
    }
}

fn operand(f: &mut fmt::Formatter<'_>, g: &Formula, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({g})")
    } else {
        write!(f, "{g}")
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precedence();
        match self {
            Formula::Atom(pred, args) => {
                write!(f, "{pred}")?;
                write_args(f, args)
            }
            Formula::DirRef(r) => write!(f, "{r}"),
            Formula::Neg(a) => {
                f.write_str("~")?;
                operand(f, a, a.precedence() < 4)
            }
            Formula::Recur(a) => {
                f.write_str("$")?;
                operand(f, a, a.precedence() < 4)
            }
            Formula::ChAll(v, a) => {
                write!(f, "@{v}. ")?;
                operand(f, a, a.precedence() < 4)
            }
            Formula::ChExists(v, a) => {
                write!(f, "#{v}. ")?;
                operand(f, a, a.precedence() < 4)
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                let op = if matches!(self, Formula::And(..)) { "/\\" } else { "\\/" };
                operand(f, a, a.precedence() < p)?;
                write!(f, " {op} ")?;
                operand(f, b, b.precedence() <= p)
            }
            Formula::Implies(a, b) => {
                operand(f, a, a.precedence() <= p)?;
                f.write_str(" -> ")?;
                operand(f, b, b.precedence() < p)
            }
        }
    }
}
