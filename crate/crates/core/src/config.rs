//! The live game state over `I |- O`.
//!
//! Every service is a [`FormulaGraph`] tagged with the side of the sequent it
//! sits on. Polarity starts positive on the output side and negative on the
//! input side, and flips under negation and in the antecedent of an
//! implication. At positive polarity `@` belongs to the environment and `#`
//! to the machine; at negative polarity the roles swap. Recurrences are
//! replicated by the machine on demand.
//!
//! Moves are event-sourced: replaying [`Configuration::trace`] from the
//! initial configuration reproduces the current one.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::directory::{DirectoryTable, ExpandError, DEFAULT_DEPTH_LIMIT};
use crate::formula::{DirRef, Formula};
use crate::graph::{Edge, FormulaGraph, Node, NodeId};
use crate::path::Location;
use crate::term::{GlobalVar, Symbol, Term};

pub const DEFAULT_REPLICA_LIMIT: u32 = 256;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Side {
    Input,
    Output,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Role {
    Machine,
    Environment,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Machine => "machine",
            Role::Environment => "environment",
        })
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Service {
    pub name: Symbol,
    pub side: Side,
    pub graph: FormulaGraph,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum WriteChoice {
    Fresh(GlobalVar),
    Term(Term),
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Move {
    Read { at: Location, value: Term, var: Symbol },
    Write { at: Location, choice: WriteChoice },
    Replicate { at: Location, index: u32 },
}

impl Move {
    pub fn at(&self) -> &Location {
        match self {
            Move::Read { at, .. } | Move::Write { at, .. } | Move::Replicate { at, .. } => at,
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::Read { at, value, var } => write!(f, "MOVE read {at} value={value} var={var}"),
            Move::Write { at, choice: WriteChoice::Fresh(w) } => write!(f, "MOVE write {at} var={w}"),
            Move::Write { at, choice: WriteChoice::Term(t) } => write!(f, "MOVE write {at} term={t}"),
            Move::Replicate { at, index } => write!(f, "MOVE replicate {at} idx={index}"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum MoveKind {
    Read,
    Write,
    Replicate,
}

/// A move that is legal in the current configuration.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct LegalMove {
    pub kind: MoveKind,
    pub at: Location,
    /// Replica index for [`MoveKind::Replicate`].
    pub index: Option<u32>,
}

/// A principal node at which a move can happen.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Position {
    pub at: Location,
    pub side: Side,
    pub kind: PositionKind,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum PositionKind {
    Quantifier {
        role: Role,
        var: Symbol,
        /// The bound variable occurs under `s`, `+` or `*` in the body.
        arithmetic: bool,
    },
    Recurrence {
        replicas: usize,
        next_index: u32,
        /// Role of the quantifier directly under a replica-free recurrence;
        /// such a recurrence can be consumed once by a read or write.
        single_use: Option<(Role, Symbol, bool)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoveError {
    #[error("unknown service /{0}")]
    UnknownService(Symbol),
    #[error("{at}: {reason}")]
    BadPath { at: Location, reason: String },
    #[error("{at}: not a principal position (inside an unresolved quantifier)")]
    NotPrincipal { at: Location },
    #[error("{at}: expected a choice quantifier, found {found}")]
    WrongConnective { at: Location, found: &'static str },
    #[error("{at}: quantifier belongs to the {actual}, not the {wanted}")]
    WrongPolarity { at: Location, wanted: Role, actual: Role },
    #[error("{at}: shared cirquent nodes are read-only")]
    Shared { at: Location },
    #[error("{at}: not a recurrence")]
    NotRecurrence { at: Location },
    #[error("{at}: replica {index} already exists")]
    ReplicaExists { at: Location, index: u32 },
    #[error("{at}: replica limit {limit} reached")]
    ReplicaLimit { at: Location, limit: u32 },
    #[error("{at}: recurrence already has replicas; address one of them")]
    AmbiguousRecurrence { at: Location },
    #[error("{at}: replica {index} does not exist")]
    MissingReplica { at: Location, index: u32 },
    #[error("replay produced {got} where the trace records {expected}")]
    GlobalMismatch { expected: GlobalVar, got: GlobalVar },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InitError {
    #[error("undefined service /{0}")]
    Undefined(Symbol),
    #[error("service /{0} takes a parameter and cannot be used directly")]
    Parameterized(Symbol),
    #[error("/{0} is listed both as an input and as the output")]
    Duplicate(Symbol),
    #[error(transparent)]
    Expand(#[from] ExpandError),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Configuration {
    services: Vec<Service>,
    next_global: u32,
    globals: Vec<GlobalVar>,
    trace: Vec<Move>,
    replica_limit: u32,
}

struct Target {
    node: NodeId,
    parent: Option<(NodeId, Edge)>,
    positive: bool,
    shared: bool,
}

impl Configuration {
    /// Expands the named services. The output service is stored last.
    pub fn init(table: &DirectoryTable, inputs: &[Symbol], output: &Symbol) -> Result<Self, InitError> {
        let mut services = Vec::new();
        for (name, side) in inputs.iter().map(|n| (n, Side::Input)).chain([(output, Side::Output)]) {
            if services.iter().any(|s: &Service| &s.name == name) {
                return Err(InitError::Duplicate(name.clone()));
            }
            let def = table.get(name).ok_or_else(|| InitError::Undefined(name.clone()))?;
            if def.arity() != 0 {
                return Err(InitError::Parameterized(name.clone()));
            }
            let r = DirRef { name: name.clone(), args: vec![], copy: true };
            let graph = table.expand(&r, DEFAULT_DEPTH_LIMIT)?;
            services.push(Service { name: name.clone(), side, graph });
        }
        Ok(Configuration {
            services,
            next_global: 1,
            globals: Vec::new(),
            trace: Vec::new(),
            replica_limit: DEFAULT_REPLICA_LIMIT,
        })
    }

    /// Builds a configuration from already expanded formulas.
    pub fn from_formulas(inputs: &[(&str, Formula)], output: (&str, Formula)) -> Option<Self> {
        let mut services = Vec::new();
        for (name, f) in inputs {
            services.push(Service { name: Symbol::new(name), side: Side::Input, graph: FormulaGraph::from_formula(f)? });
        }
        services.push(Service {
            name: Symbol::new(output.0),
            side: Side::Output,
            graph: FormulaGraph::from_formula(&output.1)?,
        });
        Some(Configuration { services, next_global: 1, globals: Vec::new(), trace: Vec::new(), replica_limit: DEFAULT_REPLICA_LIMIT })
    }

    pub fn with_replica_limit(mut self, limit: u32) -> Self {
        self.replica_limit = limit;
        self
    }

    pub fn replica_limit(&self) -> u32 {
        self.replica_limit
    }

    pub fn services(&self) -> &[Service] {
        &self.services
    }

    pub fn inputs(&self) -> &[Service] {
        &self.services[..self.services.len() - 1]
    }

    pub fn output(&self) -> &Service {
        self.services.last().expect("configuration always has an output")
    }

    pub fn service(&self, name: &Symbol) -> Option<&Service> {
        self.services.iter().find(|s| &s.name == name)
    }

    pub fn globals(&self) -> &[GlobalVar] {
        &self.globals
    }

    pub fn trace(&self) -> &[Move] {
        &self.trace
    }

    fn service_index(&self, name: &Symbol) -> Result<usize, MoveError> {
        self.services.iter().position(|s| &s.name == name).ok_or_else(|| MoveError::UnknownService(name.clone()))
    }

    fn locate(&self, at: &Location) -> Result<Target, MoveError> {
        let svc = &self.services[self.service_index(&at.dir)?];
        let g = &svc.graph;
        let deg = g.in_degrees();
        let mut target = Target {
            node: g.root(),
            parent: None,
            positive: svc.side == Side::Output,
            shared: false,
        };
        for (depth, &index) in at.indices.iter().enumerate() {
            let here = Location { dir: at.dir.clone(), indices: at.indices[..depth].to_vec() };
            let node = g.node(target.node);
            let (edge, flip) = match node {
                Node::Recur { replicas, .. } => {
                    if !replicas.contains_key(&index) {
                        return Err(MoveError::MissingReplica { at: here, index });
                    }
                    (Edge::Replica(index), false)
                }
                Node::ChAll(..) | Node::ChExists(..) => return Err(MoveError::NotPrincipal { at: at.clone() }),
                Node::Neg(_) if index == 1 => (Edge::Child(1), true),
                Node::Implies(..) if index == 1 => (Edge::Child(1), true),
                Node::Implies(..) | Node::And(..) | Node::Or(..) if index == 1 || index == 2 => {
                    (Edge::Child(index), false)
                }
                other => {
                    return Err(MoveError::BadPath {
                        at: at.clone(),
                        reason: format!("{} has no child {index}", other.label()),
                    })
                }
            };
            target.shared |= deg.get(&target.node).copied().unwrap_or(0) > 1;
            let child = g.child(target.node, edge).expect("edge checked above");
            target.parent = Some((target.node, edge));
            target.node = child;
            target.positive ^= flip;
        }
        target.shared |= deg.get(&target.node).copied().unwrap_or(0) > 1;
        Ok(target)
    }

    /// Like `locate`, creating missing replicas along the way.
    fn locate_on_demand(&mut self, at: &Location) -> Result<Target, MoveError> {
        loop {
            match self.locate(at) {
                Err(MoveError::MissingReplica { at: recur, index }) => self.replicate_in_place(&recur, index)?,
                other => return other,
            }
        }
    }

    fn set_target(&mut self, at: &Location, target: &Target, to: NodeId) {
        let idx = self.service_index(&at.dir).expect("located");
        let g = &mut self.services[idx].graph;
        match target.parent {
            Some((parent, edge)) => g.set_child(parent, edge, to),
            None => g.set_root(to),
        }
    }

    pub(crate) fn replicate_in_place(&mut self, at: &Location, index: u32) -> Result<(), MoveError> {
        if index == 0 {
            return Err(MoveError::BadPath { at: at.clone(), reason: "replica indices start at 1".into() });
        }
        let target = self.locate_on_demand(at)?;
        if target.shared {
            return Err(MoveError::Shared { at: at.clone() });
        }
        let idx = self.service_index(&at.dir)?;
        let g = &mut self.services[idx].graph;
        let (body, count) = match g.node(target.node) {
            Node::Recur { body, replicas } => {
                if replicas.contains_key(&index) {
                    return Err(MoveError::ReplicaExists { at: at.clone(), index });
                }
                (*body, replicas.len())
            }
            _ => return Err(MoveError::NotRecurrence { at: at.clone() }),
        };
        if count as u32 >= self.replica_limit {
            return Err(MoveError::ReplicaLimit { at: at.clone(), limit: self.replica_limit });
        }
        let deg = g.in_degrees();
        let copy = g.copy_subgraph(body, &|id| deg.get(&id).copied().unwrap_or(0) > 1);
        match g.node_mut(target.node) {
            Node::Recur { replicas, .. } => {
                replicas.insert(index, copy);
            }
            _ => unreachable!(),
        }
        self.trace.push(Move::Replicate { at: at.clone(), index });
        Ok(())
    }

    /// Peels the quantifier at `at` (or directly under a replica-free
    /// recurrence there), substituting `value` for its variable.
    fn peel(&mut self, at: &Location, wanted: Role, value: &Term) -> Result<Symbol, MoveError> {
        let target = self.locate_on_demand(at)?;
        if target.shared {
            return Err(MoveError::Shared { at: at.clone() });
        }
        let idx = self.service_index(&at.dir)?;
        let g = &self.services[idx].graph;
        let quant = match g.node(target.node) {
            Node::ChAll(..) | Node::ChExists(..) => target.node,
            Node::Recur { replicas, .. } if !replicas.is_empty() => {
                return Err(MoveError::AmbiguousRecurrence { at: at.clone() })
            }
            Node::Recur { body, .. } => match g.node(*body) {
                Node::ChAll(..) | Node::ChExists(..) => *body,
                other => return Err(MoveError::WrongConnective { at: at.clone(), found: node_kind(other) }),
            },
            other => return Err(MoveError::WrongConnective { at: at.clone(), found: node_kind(other) }),
        };
        let (var, body, actual) = match g.node(quant) {
            Node::ChAll(v, b) => (v.clone(), *b, role_of(true, target.positive)),
            Node::ChExists(v, b) => (v.clone(), *b, role_of(false, target.positive)),
            _ => unreachable!(),
        };
        if actual != wanted {
            return Err(MoveError::WrongPolarity { at: at.clone(), wanted, actual });
        }
        let g = &mut self.services[idx].graph;
        let v = var.clone();
        let replaced = g.rewrite_terms(body, Some(&var), &|t| t.replace_bound(&v, value));
        self.set_target(at, &target, replaced);
        Ok(var)
    }

    fn commit(&mut self, mut next: Configuration) {
        for s in &mut next.services {
            s.graph = s.graph.canonical();
        }
        *self = next;
    }

    /// An environment move: the value chosen for the quantifier at `at`.
    pub fn read(&mut self, at: &Location, value: u64, var: &Symbol) -> Result<(), MoveError> {
        self.read_term(at, Term::Num(value), var)
    }

    pub(crate) fn read_term(&mut self, at: &Location, value: Term, var: &Symbol) -> Result<(), MoveError> {
        self.transact(|c| c.read_unchecked(at, value, var))
    }

    /// A machine move introducing a fresh global variable.
    pub fn write(&mut self, at: &Location) -> Result<GlobalVar, MoveError> {
        self.transact(|c| c.write_unchecked(at))
    }

    /// A machine move choosing a specific term.
    pub fn write_term(&mut self, at: &Location, value: Term) -> Result<(), MoveError> {
        self.transact(|c| c.write_term_unchecked(at, value))
    }

    pub fn replicate(&mut self, at: &Location, index: u32) -> Result<(), MoveError> {
        self.transact(|c| c.replicate_in_place(at, index))
    }

    fn transact<R>(&mut self, f: impl FnOnce(&mut Self) -> Result<R, MoveError>) -> Result<R, MoveError> {
        let mut next = self.clone();
        let r = f(&mut next)?;
        self.commit(next);
        Ok(r)
    }

    /// Consumes `self`; on error the partially updated value is dropped.
    pub(crate) fn into_moved<R>(
        mut self,
        f: impl FnOnce(&mut Self) -> Result<R, MoveError>,
    ) -> Result<(Self, R), MoveError> {
        let r = f(&mut self)?;
        for s in &mut self.services {
            s.graph = s.graph.canonical();
        }
        Ok((self, r))
    }

    pub(crate) fn read_unchecked(&mut self, at: &Location, value: Term, var: &Symbol) -> Result<(), MoveError> {
        self.peel(at, Role::Environment, &value)?;
        self.trace.push(Move::Read { at: at.clone(), value, var: var.clone() });
        Ok(())
    }

    pub(crate) fn write_unchecked(&mut self, at: &Location) -> Result<GlobalVar, MoveError> {
        let w = GlobalVar(self.next_global);
        self.peel(at, Role::Machine, &Term::Global(w))?;
        self.next_global += 1;
        self.globals.push(w);
        self.trace.push(Move::Write { at: at.clone(), choice: WriteChoice::Fresh(w) });
        Ok(w)
    }

    pub(crate) fn write_term_unchecked(&mut self, at: &Location, value: Term) -> Result<(), MoveError> {
        self.peel(at, Role::Machine, &value)?;
        self.trace.push(Move::Write { at: at.clone(), choice: WriteChoice::Term(value) });
        Ok(())
    }

    pub fn apply_read(&self, at: &Location, value: u64, var: &Symbol) -> Result<Self, MoveError> {
        Ok(self.clone().into_moved(|c| c.read_unchecked(at, Term::Num(value), var))?.0)
    }

    pub fn apply_write(&self, at: &Location) -> Result<Self, MoveError> {
        Ok(self.clone().into_moved(|c| c.write_unchecked(at))?.0)
    }

    pub fn apply_replicate(&self, at: &Location, index: u32) -> Result<Self, MoveError> {
        Ok(self.clone().into_moved(|c| c.replicate_in_place(at, index))?.0)
    }

    /// Re-applies a recorded move.
    pub fn apply(&mut self, m: &Move) -> Result<(), MoveError> {
        match m {
            Move::Read { at, value, var } => self.read_term(at, value.clone(), var),
            Move::Write { at, choice: WriteChoice::Fresh(expected) } => {
                let got = self.write(at)?;
                if got != *expected {
                    return Err(MoveError::GlobalMismatch { expected: *expected, got });
                }
                Ok(())
            }
            Move::Write { at, choice: WriteChoice::Term(t) } => self.write_term(at, t.clone()),
            Move::Replicate { at, index } => self.replicate(at, *index),
        }
    }

    /// Folds `moves` over `initial`.
    pub fn replay(initial: &Configuration, moves: &[Move]) -> Result<Configuration, MoveError> {
        let mut c = initial.clone();
        for m in moves {
            c.apply(m)?;
        }
        Ok(c)
    }

    /// Principal positions in canonical order: services in order (inputs
    /// first), nodes in preorder, replicas by index. Shared nodes and
    /// everything below them are skipped.
    pub fn positions(&self) -> Vec<Position> {
        let mut out = Vec::new();
        for svc in &self.services {
            let deg = svc.graph.in_degrees();
            let loc = Location::root(svc.name.clone());
            walk_positions(&svc.graph, &deg, svc.graph.root(), svc.side == Side::Output, loc, svc.side, &mut out);
        }
        out
    }

    pub fn legal_moves(&self) -> Vec<LegalMove> {
        let mut out = Vec::new();
        for p in self.positions() {
            match &p.kind {
                PositionKind::Quantifier { role, .. } => out.push(LegalMove {
                    kind: if *role == Role::Machine { MoveKind::Write } else { MoveKind::Read },
                    at: p.at.clone(),
                    index: None,
                }),
                PositionKind::Recurrence { replicas, next_index, single_use } => {
                    if (*replicas as u32) < self.replica_limit {
                        out.push(LegalMove { kind: MoveKind::Replicate, at: p.at.clone(), index: Some(*next_index) });
                    }
                    if let Some((role, _, _)) = single_use {
                        out.push(LegalMove {
                            kind: if *role == Role::Machine { MoveKind::Write } else { MoveKind::Read },
                            at: p.at.clone(),
                            index: None,
                        });
                    }
                }
            }
        }
        out
    }

    /// The variable of the quantifier a read or write at `at` would resolve.
    pub fn quantifier_var(&self, at: &Location) -> Option<Symbol> {
        self.positions().into_iter().find(|p| &p.at == at).and_then(|p| match p.kind {
            PositionKind::Quantifier { var, .. } => Some(var),
            PositionKind::Recurrence { single_use, .. } => single_use.map(|(_, v, _)| v),
        })
    }

    /// Number of replicas of the recurrence at `at`, if it is one.
    pub fn replica_count(&self, at: &Location) -> Option<usize> {
        let t = self.locate(at).ok()?;
        let g = &self.service(&at.dir)?.graph;
        match g.node(t.node) {
            Node::Recur { replicas, .. } => Some(replicas.len()),
            _ => None,
        }
    }

    /// True when `at` names an existing node, or a replica that addressing
    /// would create on demand.
    pub fn resolves(&self, at: &Location) -> bool {
        match self.locate(at) {
            Ok(_) => true,
            Err(MoveError::MissingReplica { .. }) => {
                let mut c = self.clone();
                c.locate_on_demand(at).is_ok()
            }
            Err(_) => false,
        }
    }

    /// Constants and numerals occurring in reachable atoms.
    pub fn term_universe(&self) -> Vec<Term> {
        fn collect(t: &Term, out: &mut Vec<Term>) {
            match t {
                Term::Num(_) | Term::Const(_) => {
                    if !out.contains(t) {
                        out.push(t.clone())
                    }
                }
                Term::App(_, args) => args.iter().for_each(|a| collect(a, out)),
                _ => {}
            }
        }
        let mut out = Vec::new();
        for svc in &self.services {
            for id in svc.graph.reachable() {
                if let Node::Atom(_, args) = svc.graph.node(id) {
                    args.iter().for_each(|a| collect(a, &mut out));
                }
            }
        }
        out
    }

    /// The output service with `resolve` applied to every term. A recurrence
    /// with replicas is shown as the conjunction of its replicas.
    pub fn output_formula(&self, resolve: &dyn Fn(&Term) -> Term) -> Formula {
        fn go(g: &FormulaGraph, id: NodeId, r: &dyn Fn(&Term) -> Term) -> Formula {
            match g.node(id) {
                Node::Atom(p, args) => Formula::Atom(p.clone(), args.iter().map(r).collect()),
                Node::Neg(a) => Formula::neg(go(g, *a, r)),
                Node::And(a, b) => Formula::and(go(g, *a, r), go(g, *b, r)),
                Node::Or(a, b) => Formula::or(go(g, *a, r), go(g, *b, r)),
                Node::Implies(a, b) => Formula::implies(go(g, *a, r), go(g, *b, r)),
                Node::ChAll(v, a) => Formula::ChAll(v.clone(), Box::new(go(g, *a, r))),
                Node::ChExists(v, a) => Formula::ChExists(v.clone(), Box::new(go(g, *a, r))),
                Node::Recur { body, replicas } if replicas.is_empty() => Formula::recur(go(g, *body, r)),
                Node::Recur { replicas, .. } => replicas
                    .values()
                    .map(|id| go(g, *id, r))
                    .reduce(Formula::and)
                    .expect("non-empty"),
            }
        }
        let g = &self.output().graph;
        go(g, g.root(), resolve)
    }

    /// A rendering that is equal for configurations differing only in the
    /// names of global variables and eigen-constants.
    pub fn fingerprint(&self) -> String {
        let mut raw = String::new();
        for s in &self.services {
            raw.push_str(&format!("/{}={};", s.name, s.graph.render(s.graph.root())));
        }
        canonical_names(&raw)
    }
}

fn role_of(universal: bool, positive: bool) -> Role {
    if universal == positive {
        Role::Environment
    } else {
        Role::Machine
    }
}

fn node_kind(n: &Node) -> &'static str {
    match n {
        Node::Atom(..) => "atom",
        Node::Neg(_) => "negation",
        Node::And(..) => "conjunction",
        Node::Or(..) => "disjunction",
        Node::Implies(..) => "implication",
        Node::ChAll(..) => "choice universal",
        Node::ChExists(..) => "choice existential",
        Node::Recur { .. } => "recurrence",
    }
}

fn quantifier_info(g: &FormulaGraph, id: NodeId, positive: bool) -> Option<(Role, Symbol, bool)> {
    let (universal, var, body) = match g.node(id) {
        Node::ChAll(v, b) => (true, v, *b),
        Node::ChExists(v, b) => (false, v, *b),
        _ => return None,
    };
    let arithmetic = g.reachable_from(body).into_iter().any(|n| match g.node(n) {
        Node::Atom(_, args) => args.iter().any(|t| t.occurs_bound_under_arith(var)),
        _ => false,
    });
    Some((role_of(universal, positive), var.clone(), arithmetic))
}

fn walk_positions(
    g: &FormulaGraph,
    deg: &HashMap<NodeId, usize>,
    id: NodeId,
    positive: bool,
    loc: Location,
    side: Side,
    out: &mut Vec<Position>,
) {
    if deg.get(&id).copied().unwrap_or(0) > 1 {
        return;
    }
    crate::deep(|| walk_node(g, deg, id, positive, loc, side, out));
}

fn walk_node(
    g: &FormulaGraph,
    deg: &HashMap<NodeId, usize>,
    id: NodeId,
    positive: bool,
    loc: Location,
    side: Side,
    out: &mut Vec<Position>,
) {
    match g.node(id) {
        Node::Atom(..) => {}
        Node::Neg(a) => walk_positions(g, deg, *a, !positive, loc.child(1), side, out),
        Node::Implies(a, b) => {
            walk_positions(g, deg, *a, !positive, loc.child(1), side, out);
            walk_positions(g, deg, *b, positive, loc.child(2), side, out);
        }
        Node::And(a, b) | Node::Or(a, b) => {
            walk_positions(g, deg, *a, positive, loc.child(1), side, out);
            walk_positions(g, deg, *b, positive, loc.child(2), side, out);
        }
        Node::ChAll(..) | Node::ChExists(..) => {
            let (role, var, arithmetic) = quantifier_info(g, id, positive).expect("quantifier");
            out.push(Position { at: loc, side, kind: PositionKind::Quantifier { role, var, arithmetic } });
        }
        Node::Recur { body, replicas } => {
            let next_index = (1..).find(|i| !replicas.contains_key(i)).expect("unbounded");
            let single_use = if replicas.is_empty() { quantifier_info(g, *body, positive) } else { None };
            out.push(Position {
                at: loc.clone(),
                side,
                kind: PositionKind::Recurrence { replicas: replicas.len(), next_index, single_use },
            });
            for (k, r) in replicas {
                walk_positions(g, deg, *r, positive, loc.child(*k), side, out);
            }
        }
    }
}

/// Renames `W<k>` and `_e<k>` tokens in order of first appearance.
fn canonical_names(raw: &str) -> String {
    let bytes = raw.as_bytes();
    let mut out = String::with_capacity(raw.len());
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut i = 0;
    while i < bytes.len() {
        let starts_name = i == 0 || !(bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'_');
        let prefix_len = if bytes[i] == b'W' {
            1
        } else if bytes[i..].starts_with(b"_e") {
            2
        } else {
            0
        };
        if starts_name && prefix_len > 0 {
            let mut j = i + prefix_len;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > i + prefix_len {
                let name = &raw[i..j];
                let n = seen.len();
                let k = *seen.entry(name).or_insert(n);
                out.push_str(&format!("{}{k}", &raw[i..i + prefix_len]));
                i = j;
                continue;
            }
        }
        out.push(bytes[i] as char);
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_kb;

    const FACT: &str = "/c = fact(0,1)\n/d = $@x.@y.(fact(x,y) -> fact(x+1,x*y+y))\n/query = @y.#z.fact(y,z)\nquery /query\n";

    fn fact_config() -> Configuration {
        let kb = parse_kb(FACT).unwrap();
        Configuration::init(&kb.table, &kb.default_inputs(), &"query".into()).unwrap()
    }

    fn loc(text: &str) -> Location {
        let mut parts = text.trim_start_matches('/').split('.');
        let dir = Symbol::new(parts.next().unwrap());
        Location { dir, indices: parts.map(|p| p.parse().unwrap()).collect() }
    }

    fn show(c: &Configuration, name: &str) -> String {
        let g = &c.service(&name.into()).unwrap().graph;
        g.render(g.root())
    }

    #[test]
    fn init_expands_services() {
        let c = fact_config();
        assert_eq!(c.inputs().len(), 2);
        assert_eq!(show(&c, "c"), "fact(0,1)");
        assert_eq!(show(&c, "d"), "$@x. @y. (fact(x,y) -> fact(x+1,x*y+y))");
        assert_eq!(show(&c, "query"), "@y. #z. fact(y,z)");
        assert!(c.trace().is_empty());
    }

    #[test]
    fn init_errors() {
        let kb = parse_kb(FACT).unwrap();
        assert!(matches!(
            Configuration::init(&kb.table, &["d".into()], &"missing".into()),
            Err(InitError::Undefined(_))
        ));
        let kb = parse_kb("/query = p").unwrap();
        let c = Configuration::init(&kb.table, &[], &"query".into()).unwrap();
        assert!(c.inputs().is_empty());
        assert!(c.legal_moves().is_empty());
    }

    #[test]
    fn initial_legal_moves() {
        let c = fact_config();
        let moves = c.legal_moves();
        assert!(moves.contains(&LegalMove { kind: MoveKind::Read, at: loc("/query"), index: None }));
        assert!(moves.contains(&LegalMove { kind: MoveKind::Replicate, at: loc("/d"), index: Some(1) }));
        // consuming /d once (without replication) is also a machine move
        assert!(moves.contains(&LegalMove { kind: MoveKind::Write, at: loc("/d"), index: None }));
        assert_eq!(moves.len(), 3);
    }

    #[test]
    fn read_then_write_output() {
        let mut c = fact_config();
        c.read(&loc("/query"), 3, &"n".into()).unwrap();
        assert_eq!(show(&c, "query"), "#z. fact(3,z)");
        assert!(c.legal_moves().contains(&LegalMove { kind: MoveKind::Write, at: loc("/query"), index: None }));
        let w = c.write(&loc("/query")).unwrap();
        assert_eq!(w, GlobalVar(1));
        assert_eq!(show(&c, "query"), "fact(3,W1)");
    }

    #[test]
    fn read_zero_and_polarity_error() {
        let c = fact_config();
        let c0 = c.apply_read(&loc("/query"), 0, &"n".into()).unwrap();
        assert_eq!(show(&c0, "query"), "#z. fact(0,z)");
        let err = c0.apply_read(&loc("/query"), 1, &"m".into()).unwrap_err();
        assert!(matches!(err, MoveError::WrongPolarity { .. }), "{err}");
        // writing the environment's quantifier is refused as well
        assert!(matches!(c.apply_write(&loc("/query")), Err(MoveError::WrongPolarity { .. })));
    }

    #[test]
    fn writes_in_replicas_peel_successively() {
        let mut c = fact_config();
        c.write(&loc("/query")).unwrap_err();
        c.read(&loc("/query"), 3, &"n".into()).unwrap();
        c.write(&loc("/query")).unwrap();
        c.write(&loc("/d.1")).unwrap();
        c.write(&loc("/d.1")).unwrap();
        assert_eq!(show(&c, "d"), "$@x. @y. (fact(x,y) -> fact(x+1,x*y+y))[1: fact(W2,W3) -> fact(W2+1,W2*W3+W3)]");
        assert_eq!(
            c.trace().iter().map(|m| m.to_string()).collect::<Vec<_>>(),
            vec![
                "MOVE read /query value=3 var=n",
                "MOVE write /query var=W1",
                "MOVE replicate /d idx=1",
                "MOVE write /d.1 var=W2",
                "MOVE write /d.1 var=W3",
            ]
        );
    }

    #[test]
    fn replicate_explicit_and_on_demand() {
        let mut c = fact_config();
        c.replicate(&loc("/d"), 1).unwrap();
        assert_eq!(c.replica_count(&loc("/d")), Some(1));
        assert!(matches!(c.replicate(&loc("/d"), 1), Err(MoveError::ReplicaExists { .. })));
        c.write(&loc("/d.2")).unwrap();
        assert_eq!(c.replica_count(&loc("/d")), Some(2));
        assert!(matches!(c.replicate(&loc("/c"), 1), Err(MoveError::NotRecurrence { .. })));
    }

    #[test]
    fn replica_limit() {
        let mut c = fact_config().with_replica_limit(2);
        c.replicate(&loc("/d"), 1).unwrap();
        c.replicate(&loc("/d"), 5).unwrap();
        assert!(matches!(c.replicate(&loc("/d"), 3), Err(MoveError::ReplicaLimit { .. })));
        assert!(!c.legal_moves().iter().any(|m| m.kind == MoveKind::Replicate));
    }

    #[test]
    fn write_on_atom_fails() {
        let c = fact_config();
        assert!(matches!(c.apply_write(&loc("/c")), Err(MoveError::WrongConnective { .. })));
    }

    #[test]
    fn failed_move_leaves_state_untouched() {
        let mut c = fact_config();
        let before = c.clone();
        assert!(c.write(&loc("/c")).is_err());
        assert_eq!(c, before);
    }

    #[test]
    fn shared_nodes_are_read_only() {
        let kb = parse_kb("/m = #x.p(x)\n/o = /m /\\ /m\nquery /o\n").unwrap();
        let c = Configuration::init(&kb.table, &[], &"o".into()).unwrap();
        assert!(matches!(c.apply_write(&loc("/o.1")), Err(MoveError::Shared { .. })));
        assert!(c.legal_moves().is_empty());
        let kb = parse_kb("/m = #x.p(x)\n/n = !/m /\\ !/m\nquery /n\n").unwrap();
        let c = Configuration::init(&kb.table, &[], &"n".into()).unwrap();
        assert_eq!(c.legal_moves().len(), 2);
        c.apply_write(&loc("/n.1")).unwrap();
    }

    #[test]
    fn single_use_recurrence_on_output() {
        let kb = parse_kb("/q = $#x.p(x) \\/ q(a)\nquery /q\n").unwrap();
        let mut c = Configuration::init(&kb.table, &[], &"q".into()).unwrap();
        c.write(&loc("/q.1")).unwrap();
        assert_eq!(show(&c, "q"), "p(W1) \\/ q(a)");
    }

    #[test]
    fn polarity_flips_in_antecedent() {
        let kb = parse_kb("/o = (#x.p(x)) -> (#y.q(y))\nquery /o\n").unwrap();
        let c = Configuration::init(&kb.table, &[], &"o".into()).unwrap();
        let moves = c.legal_moves();
        assert!(moves.contains(&LegalMove { kind: MoveKind::Read, at: loc("/o.1"), index: None }));
        assert!(moves.contains(&LegalMove { kind: MoveKind::Write, at: loc("/o.2"), index: None }));
    }

    #[test]
    fn replay_reproduces_state() {
        let initial = fact_config();
        let mut c = initial.clone();
        c.read(&loc("/query"), 2, &"n".into()).unwrap();
        for i in 1..=2 {
            c.write(&loc(&format!("/d.{i}"))).unwrap();
            c.write(&loc(&format!("/d.{i}"))).unwrap();
        }
        c.write(&loc("/query")).unwrap();
        let replayed = Configuration::replay(&initial, c.trace()).unwrap();
        assert_eq!(replayed, c);
    }

    #[test]
    fn fingerprint_ignores_global_names() {
        assert_eq!(canonical_names("p(W7,W3,W7) q(_e4) W"), "p(W0,W1,W0) q(_e2) W");
    }
}
