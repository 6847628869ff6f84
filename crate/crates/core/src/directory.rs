//! Named, possibly parameterized and recursive directory definitions, and
//! their expansion into formula graphs.
//!
//! A copy reference `!/m` expands to a fresh subgraph at every occurrence; a
//! shared reference `/m` is expanded once per graph and every occurrence
//! points at the same node.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::formula::{DirRef, Formula};
use crate::graph::{FormulaGraph, Node, NodeId};
use crate::term::{Symbol, Term, SUCC};

pub const DEFAULT_DEPTH_LIMIT: usize = 1024;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    /// `None` for a parameterless directory.
    pub pattern: Option<Term>,
    pub body: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectoryDef {
    pub name: Symbol,
    pub clauses: Vec<Clause>,
}

impl DirectoryDef {
    pub fn arity(&self) -> usize {
        self.clauses.first().map_or(0, |c| usize::from(c.pattern.is_some()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DefineError {
    #[error("/{name}: clauses disagree on arity")]
    ArityMismatch { name: Symbol },
    #[error("/{name}: already defined with arity {existing}")]
    ArityConflict { name: Symbol, existing: usize },
    #[error("/{name}: patterns `{first}` and `{second}` overlap")]
    Overlap { name: Symbol, first: String, second: String },
    #[error("/{name}: no clauses")]
    Empty { name: Symbol },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExpandError {
    #[error("undefined directory /{0}")]
    Undefined(Symbol),
    #[error("/{name} expects {expected} argument(s), got {got}")]
    Arity { name: Symbol, expected: usize, got: usize },
    #[error("argument `{arg}` of /{name} is not ground")]
    NonGround { name: Symbol, arg: String },
    #[error("no clause of /{name} matches `{arg}`")]
    NoMatch { name: Symbol, arg: String },
    #[error("expansion of /{name} exceeded depth limit {limit}")]
    DepthExceeded { name: Symbol, limit: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DirectoryTable {
    defs: BTreeMap<Symbol, DirectoryDef>,
}

impl DirectoryTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &Symbol) -> Option<&DirectoryDef> {
        self.defs.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &Symbol> {
        self.defs.keys()
    }

    /// Installs `clauses` under `name`, replacing any previous definition of
    /// the same arity.
    pub fn define(&mut self, name: Symbol, clauses: Vec<Clause>) -> Result<(), DefineError> {
        let def = DirectoryDef { name: name.clone(), clauses };
        if def.clauses.is_empty() {
            return Err(DefineError::Empty { name });
        }
        let arity = def.arity();
        if def.clauses.iter().any(|c| usize::from(c.pattern.is_some()) != arity) {
            return Err(DefineError::ArityMismatch { name });
        }
        if let Some(old) = self.defs.get(&name) {
            if old.arity() != arity {
                return Err(DefineError::ArityConflict { name, existing: old.arity() });
            }
        }
        for (i, a) in def.clauses.iter().enumerate() {
            for b in &def.clauses[i + 1..] {
                let overlap = match (&a.pattern, &b.pattern) {
                    (Some(p), Some(q)) => patterns_overlap(p, q),
                    _ => true,
                };
                if overlap {
                    let show = |p: &Option<Term>| p.as_ref().map_or("-".to_string(), |t| t.to_string());
                    return Err(DefineError::Overlap {
                        name,
                        first: show(&a.pattern),
                        second: show(&b.pattern),
                    });
                }
            }
        }
        self.defs.insert(name, def);
        Ok(())
    }

    /// Expands a directory reference into a graph.
    pub fn expand(&self, r: &DirRef, depth_limit: usize) -> Result<FormulaGraph, ExpandError> {
        let mut ex = Expander { table: self, graph: FormulaGraph::builder(), shared: HashMap::new(), limit: depth_limit };
        let root = ex.expand_ref(r, 0)?;
        ex.graph.set_root(root);
        Ok(ex.graph)
    }

    /// Expands every directory reference inside `f`.
    pub fn expand_formula(&self, f: &Formula, depth_limit: usize) -> Result<FormulaGraph, ExpandError> {
        let mut ex = Expander { table: self, graph: FormulaGraph::builder(), shared: HashMap::new(), limit: depth_limit };
        let root = ex.build(f, 0)?;
        ex.graph.set_root(root);
        Ok(ex.graph)
    }

    /// Names referenced from any clause body.
    pub fn referenced(&self) -> Vec<Symbol> {
        fn walk(f: &Formula, out: &mut Vec<Symbol>) {
            if let Formula::DirRef(r) = f {
                if !out.contains(&r.name) {
                    out.push(r.name.clone());
                }
            }
            for c in f.children() {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        for def in self.defs.values() {
            for c in &def.clauses {
                walk(&c.body, &mut out);
            }
        }
        out
    }
}

struct Expander<'a> {
    table: &'a DirectoryTable,
    graph: FormulaGraph,
    shared: HashMap<(Symbol, Vec<Term>), NodeId>,
    limit: usize,
}

impl Expander<'_> {
    fn expand_ref(&mut self, r: &DirRef, depth: usize) -> Result<NodeId, ExpandError> {
        if depth >= self.limit {
            return Err(ExpandError::DepthExceeded { name: r.name.clone(), limit: self.limit });
        }
        let def = self.table.get(&r.name).ok_or_else(|| ExpandError::Undefined(r.name.clone()))?;
        if r.args.len() != def.arity() {
            return Err(ExpandError::Arity { name: r.name.clone(), expected: def.arity(), got: r.args.len() });
        }
        let arg = match r.args.first() {
            Some(a) if !a.is_ground() => {
                return Err(ExpandError::NonGround { name: r.name.clone(), arg: a.to_string() })
            }
            Some(a) => Some(a.eval_ground()),
            None => None,
        };
        let body = match &arg {
            None => def.clauses[0].body.clone(),
            Some(arg) => {
                let (clause, bindings) = def
                    .clauses
                    .iter()
                    .find_map(|c| {
                        let mut b = Vec::new();
                        match_pattern(c.pattern.as_ref()?, arg, &mut b).then_some((c, b))
                    })
                    .ok_or_else(|| ExpandError::NoMatch { name: r.name.clone(), arg: arg.to_string() })?;
                instantiate(&clause.body, &bindings)
            }
        };
        crate::deep(|| self.build(&body, depth + 1))
    }

    fn build(&mut self, f: &Formula, depth: usize) -> Result<NodeId, ExpandError> {
        crate::deep(|| self.build_node(f, depth))
    }

    fn build_node(&mut self, f: &Formula, depth: usize) -> Result<NodeId, ExpandError> {
        let node = match f {
            Formula::DirRef(r) if r.copy => return self.expand_ref(r, depth),
            Formula::DirRef(r) => {
                let key = (r.name.clone(), r.args.iter().map(Term::eval_ground).collect());
                if let Some(id) = self.shared.get(&key) {
                    return Ok(*id);
                }
                let id = self.expand_ref(r, depth)?;
                self.shared.insert(key, id);
                return Ok(id);
            }
            Formula::Atom(p, args) => Node::Atom(p.clone(), args.clone()),
            Formula::Neg(a) => Node::Neg(self.build(a, depth)?),
            Formula::And(a, b) => Node::And(self.build(a, depth)?, self.build(b, depth)?),
            Formula::Or(a, b) => Node::Or(self.build(a, depth)?, self.build(b, depth)?),
            Formula::Implies(a, b) => Node::Implies(self.build(a, depth)?, self.build(b, depth)?),
            Formula::ChAll(v, a) => Node::ChAll(v.clone(), self.build(a, depth)?),
            Formula::ChExists(v, a) => Node::ChExists(v.clone(), self.build(a, depth)?),
            Formula::Recur(a) => Node::Recur { body: self.build(a, depth)?, replicas: BTreeMap::new() },
        };
        Ok(self.graph.add(node))
    }
}

/// Matches a clause pattern against a ground argument. Numerals and
/// successor applications are interchangeable: `s(X)` matches `3` with `X = 2`.
fn match_pattern(pattern: &Term, arg: &Term, bindings: &mut Vec<(Symbol, Term)>) -> bool {
    match (pattern, arg) {
        (Term::Param(x), _) => match bindings.iter().find(|(n, _)| n == x) {
            Some((_, bound)) => bound.eval_ground() == arg.eval_ground(),
            None => {
                bindings.push((x.clone(), arg.clone()));
                true
            }
        },
        (Term::App(f, ps), Term::Num(n)) if f.as_str() == SUCC && ps.len() == 1 => {
            *n > 0 && match_pattern(&ps[0], &Term::Num(n - 1), bindings)
        }
        (Term::Num(n), Term::App(f, args)) if f.as_str() == SUCC && args.len() == 1 => {
            *n > 0 && match_pattern(&Term::Num(n - 1), &args[0], bindings)
        }
        (Term::App(f, ps), Term::App(g, args)) => {
            f == g
                && ps.len() == args.len()
                && ps.iter().zip(args).all(|(p, a)| match_pattern(p, a, bindings))
        }
        (p, a) => p.eval_ground() == a.eval_ground(),
    }
}

/// Conservative overlap test: two patterns overlap when some ground argument
/// could match both.
fn patterns_overlap(p: &Term, q: &Term) -> bool {
    match (p, q) {
        (Term::Param(_), _) | (_, Term::Param(_)) => true,
        (Term::Num(a), Term::Num(b)) => a == b,
        (Term::Num(n), Term::App(f, args)) | (Term::App(f, args), Term::Num(n))
            if f.as_str() == SUCC && args.len() == 1 =>
        {
            *n > 0 && patterns_overlap(&Term::Num(n - 1), &args[0])
        }
        (Term::App(f, a), Term::App(g, b)) => {
            f == g && a.len() == b.len() && a.iter().zip(b).all(|(x, y)| patterns_overlap(x, y))
        }
        (a, b) => a == b,
    }
}

fn instantiate(body: &Formula, bindings: &[(Symbol, Term)]) -> Formula {
    let subst = |t: &Term| bindings.iter().fold(t.clone(), |t, (x, v)| t.replace_param(x, v));
    map_terms(body, &subst)
}

fn map_terms(f: &Formula, g: &dyn Fn(&Term) -> Term) -> Formula {
    match f {
        Formula::Atom(p, args) => Formula::Atom(p.clone(), args.iter().map(g).collect()),
        Formula::DirRef(r) => Formula::DirRef(DirRef {
            name: r.name.clone(),
            args: r.args.iter().map(g).collect(),
            copy: r.copy,
        }),
        Formula::Neg(a) => Formula::neg(map_terms(a, g)),
        Formula::Recur(a) => Formula::recur(map_terms(a, g)),
        Formula::And(a, b) => Formula::and(map_terms(a, g), map_terms(b, g)),
        Formula::Or(a, b) => Formula::or(map_terms(a, g), map_terms(b, g)),
        Formula::Implies(a, b) => Formula::implies(map_terms(a, g), map_terms(b, g)),
        Formula::ChAll(v, a) => Formula::ChAll(v.clone(), Box::new(map_terms(a, g))),
        Formula::ChExists(v, a) => Formula::ChExists(v.clone(), Box::new(map_terms(a, g))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_formula, parse_formula_with_params};

    fn clause(pattern: Option<Term>, body: &str) -> Clause {
        let params: Vec<Symbol> = vec!["X".into()];
        Clause { pattern, body: parse_formula_with_params(body, &params).unwrap() }
    }

    fn recursive_table() -> DirectoryTable {
        let mut t = DirectoryTable::new();
        t.define(
            "m".into(),
            vec![
                clause(Some(Term::num(0)), "q"),
                clause(Some(Term::succ(Term::Param("X".into()))), "p /\\ !/m(X)"),
            ],
        )
        .unwrap();
        t
    }

    fn dref(text: &str) -> DirRef {
        match parse_formula(text).unwrap() {
            Formula::DirRef(r) => r,
            other => panic!("not a reference: {other}"),
        }
    }

    #[test]
    fn simple_definition() {
        let mut t = DirectoryTable::new();
        t.define("m".into(), vec![clause(None, "p(a)")]).unwrap();
        let g = t.expand(&dref("/m"), DEFAULT_DEPTH_LIMIT).unwrap();
        assert_eq!(g.to_formula().to_string(), "p(a)");
    }

    #[test]
    fn redefinition_replaces() {
        let mut t = DirectoryTable::new();
        t.define("m".into(), vec![clause(None, "p(a)")]).unwrap();
        t.define("m".into(), vec![clause(None, "p(b)")]).unwrap();
        let g = t.expand(&dref("/m"), DEFAULT_DEPTH_LIMIT).unwrap();
        assert_eq!(g.to_formula().to_string(), "p(b)");
    }

    #[test]
    fn recursive_expansion() {
        let t = recursive_table();
        let g = t.expand(&dref("/m(s(s(s(0))))"), DEFAULT_DEPTH_LIMIT).unwrap();
        assert_eq!(g.to_formula().to_string(), "p /\\ (p /\\ (p /\\ q))");
        assert_eq!(g.depth(), 3);
        let g = t.expand(&dref("/m(2)"), DEFAULT_DEPTH_LIMIT).unwrap();
        assert_eq!(g.to_formula().to_string(), "p /\\ (p /\\ q)");
    }

    #[test]
    fn copy_versus_shared() {
        let mut t = DirectoryTable::new();
        t.define("m".into(), vec![clause(None, "p(a)")]).unwrap();
        t.define("n".into(), vec![clause(None, "!/m /\\ !/m")]).unwrap();
        t.define("o".into(), vec![clause(None, "/m /\\ /m")]).unwrap();
        let n = t.expand(&dref("/n"), DEFAULT_DEPTH_LIMIT).unwrap();
        let o = t.expand(&dref("/o"), DEFAULT_DEPTH_LIMIT).unwrap();
        assert_eq!(n.reachable().len(), 3);
        assert_eq!(o.reachable().len(), 2);
        let deg = o.in_degrees();
        assert!(deg.values().any(|d| *d == 2));
        assert_eq!(n.to_formula(), o.to_formula());
    }

    #[test]
    fn deep_expansions_stay_on_the_stack() {
        let mut t = recursive_table();
        t.define("r".into(), vec![clause(None, "p /\\ !/r")]).unwrap();
        let err = t.expand(&dref("!/r"), DEFAULT_DEPTH_LIMIT).unwrap_err();
        assert!(matches!(err, ExpandError::DepthExceeded { .. }));
        let k = crate::syntax::MAX_NESTING - 2;
        let g = t.expand(&dref(&format!("!/m({}0{})", "s(".repeat(k), ")".repeat(k))), DEFAULT_DEPTH_LIMIT).unwrap();
        assert_eq!(g.depth(), k);
        assert_eq!(g.to_formula().to_string().matches('p').count(), k);
        let g = t.expand(&dref("!/m(1000)"), DEFAULT_DEPTH_LIMIT).unwrap();
        assert_eq!(g.depth(), 1000);
        let f = g.to_formula();
        assert_eq!(f.to_string().matches('p').count(), 1000);
        assert_eq!(f.clone(), f);
        assert_eq!(FormulaGraph::from_formula(&f).unwrap(), g);
    }

    #[test]
    fn errors() {
        let t = recursive_table();
        assert!(matches!(t.expand(&dref("/zz"), 10), Err(ExpandError::Undefined(_))));
        assert!(matches!(t.expand(&dref("/m(a)"), 10), Err(ExpandError::NoMatch { .. })));
        assert!(matches!(t.expand(&dref("/m(20)"), 10), Err(ExpandError::DepthExceeded { .. })));
        assert!(matches!(t.expand(&dref("/m"), 10), Err(ExpandError::Arity { .. })));
        let mut loops = DirectoryTable::new();
        loops.define("l".into(), vec![clause(None, "p /\\ /l")]).unwrap();
        assert!(matches!(loops.expand(&dref("/l"), 50), Err(ExpandError::DepthExceeded { .. })));
    }

    #[test]
    fn define_rejects_bad_clauses() {
        let mut t = DirectoryTable::new();
        let mixed = vec![clause(None, "q"), clause(Some(Term::num(0)), "q")];
        assert!(matches!(t.define("m".into(), mixed), Err(DefineError::ArityMismatch { .. })));
        let overlapping = vec![
            clause(Some(Term::Param("X".into())), "q"),
            clause(Some(Term::num(0)), "q"),
        ];
        assert!(matches!(t.define("m".into(), overlapping), Err(DefineError::Overlap { .. })));
        let s_vs_num = vec![
            clause(Some(Term::succ(Term::Param("X".into()))), "q"),
            clause(Some(Term::num(3)), "q"),
        ];
        assert!(matches!(t.define("m".into(), s_vs_num), Err(DefineError::Overlap { .. })));
        t.define("k".into(), vec![clause(None, "q")]).unwrap();
        let conflict = vec![clause(Some(Term::num(0)), "q")];
        assert!(matches!(t.define("k".into(), conflict), Err(DefineError::ArityConflict { .. })));
    }
}
