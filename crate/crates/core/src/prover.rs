//! Bounded strategy extraction: the semantics of `prove`.
//!
//! The search is depth-first over machine moves. At each node it tries, in
//! order: closing the configuration, peeling the first environment
//! quantifier of the output with an eigen-constant, the first pending
//! machine write (fresh variable first, then the term universe), and finally
//! recurrence moves. Restrictions set by `choose`/`schoose` mask rules at
//! specific locations and reorder positions.
//!
//! The search fans out at the first node with two or more children. Each
//! child is explored with its own step budget and visited set, so sequential
//! and parallel runs return the same strategy and the same step count.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use thiserror::Error;

use crate::config::{Configuration, Move, MoveError, PositionKind, Role, Side};
use crate::par::{self, Parallelism};
use crate::path::Location;
use crate::solver::closure::close_with_budget;
use crate::solver::{is_elementary, ClosureError};
use crate::term::{Symbol, Term};

pub const DEFAULT_MAX_DEPTH: usize = 64;
pub const DEFAULT_MAX_REPLICAS: u32 = 32;
pub const DEFAULT_MAX_STEPS: usize = 5_000;
/// Closure search nodes per attempt inside the prover.
const CLOSE_BUDGET: usize = 5_000;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum ProofRule {
    Read,
    Write,
    Replicate,
    Close,
}

impl ProofRule {
    pub fn name(self) -> &'static str {
        match self {
            ProofRule::Read => "read",
            ProofRule::Write => "write",
            ProofRule::Replicate => "replicate",
            ProofRule::Close => "close",
        }
    }
}

impl fmt::Display for ProofRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown rule `{0}` (expected read, write, replicate or close)")]
pub struct UnknownRule(pub String);

impl FromStr for ProofRule {
    type Err = UnknownRule;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "read" => Ok(ProofRule::Read),
            "write" => Ok(ProofRule::Write),
            "replicate" => Ok(ProofRule::Replicate),
            "close" => Ok(ProofRule::Close),
            other => Err(UnknownRule(other.to_string())),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Restriction {
    pub at: Location,
    pub rules: Vec<ProofRule>,
    /// Set by `schoose`: earlier restrictions are tried first.
    pub prioritized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RestrictionError {
    #[error("restriction at {0}: location does not exist")]
    Dangling(Location),
    #[error("restriction at {0}: no rules listed")]
    Empty(Location),
}

/// The accumulated restrictions of a session. A later restriction at the
/// same location replaces the earlier one.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Restrictions {
    list: Vec<Restriction>,
}

impl Restrictions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Restriction> {
        self.list.iter()
    }

    pub fn set(&mut self, config: &Configuration, restrictions: Vec<Restriction>) -> Result<(), RestrictionError> {
        for r in &restrictions {
            if r.rules.is_empty() {
                return Err(RestrictionError::Empty(r.at.clone()));
            }
            if !config.resolves(&r.at) {
                return Err(RestrictionError::Dangling(r.at.clone()));
            }
        }
        for r in restrictions {
            self.list.retain(|old| old.at != r.at);
            self.list.push(r);
        }
        Ok(())
    }

    pub fn get(&self, at: &Location) -> Option<&Restriction> {
        self.list.iter().find(|r| &r.at == at)
    }

    pub fn allows(&self, at: &Location, rule: ProofRule) -> bool {
        self.get(at).is_none_or(|r| r.rules.contains(&rule))
    }

    fn priority(&self, at: &Location) -> usize {
        self.list.iter().filter(|r| r.prioritized).position(|r| &r.at == at).unwrap_or(usize::MAX)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Bounds {
    pub max_depth: usize,
    pub max_replicas: u32,
    /// Candidate terms for machine writes besides a fresh variable. `None`
    /// uses the numerals and constants of the configuration plus `0`.
    pub term_universe: Option<Vec<Term>>,
    /// Search nodes per branch before giving up.
    pub max_steps: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_depth: DEFAULT_MAX_DEPTH,
            max_replicas: DEFAULT_MAX_REPLICAS,
            term_universe: None,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Candidate {
    Fresh,
    Term(Term),
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum StrategyMove {
    Write { at: Location, candidate: Candidate },
    Replicate { at: Location, index: u32 },
}

impl StrategyMove {
    pub fn at(&self) -> &Location {
        match self {
            StrategyMove::Write { at, .. } | StrategyMove::Replicate { at, .. } => at,
        }
    }

    pub fn apply(&self, config: &Configuration) -> Result<Configuration, MoveError> {
        let c = config.clone();
        let (c, ()) = match self {
            StrategyMove::Write { at, candidate: Candidate::Fresh } => c.into_moved(|c| c.write_unchecked(at).map(drop))?,
            StrategyMove::Write { at, candidate: Candidate::Term(t) } => {
                c.into_moved(|c| c.write_term_unchecked(at, t.clone()))?
            }
            StrategyMove::Replicate { at, index } => c.into_moved(|c| c.replicate_in_place(at, *index))?,
        };
        Ok(c)
    }
}

impl fmt::Display for StrategyMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyMove::Write { at, candidate: Candidate::Fresh } => write!(f, "write {at} fresh"),
            StrategyMove::Write { at, candidate: Candidate::Term(t) } => write!(f, "write {at} term={t}"),
            StrategyMove::Replicate { at, index } => write!(f, "replicate {at} idx={index}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum BranchKey {
    Value(u64),
    /// Accepts any value, which replaces the eigen-constant.
    Eigen(Symbol),
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Strategy {
    Close,
    Step { mv: StrategyMove, next: Box<Strategy> },
    EnvBranch { at: Location, var: Symbol, branches: Vec<(BranchKey, Strategy)> },
}

impl Strategy {
    /// Machine moves along the first branch.
    pub fn moves(&self) -> Vec<&StrategyMove> {
        let mut out = Vec::new();
        let mut s = self;
        loop {
            match s {
                Strategy::Close => return out,
                Strategy::Step { mv, next } => {
                    out.push(mv);
                    s = next;
                }
                Strategy::EnvBranch { branches, .. } => match branches.first() {
                    Some((_, b)) => s = b,
                    None => return out,
                },
            }
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(s: &Strategy, indent: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let pad = "  ".repeat(indent);
            match s {
                Strategy::Close => writeln!(f, "{pad}close"),
                Strategy::Step { mv, next } => {
                    writeln!(f, "{pad}{mv}")?;
                    go(next, indent, f)
                }
                Strategy::EnvBranch { at, var, branches } => {
                    for (key, b) in branches {
                        match key {
                            BranchKey::Value(v) => writeln!(f, "{pad}env {at} ({var}) = {v}:")?,
                            BranchKey::Eigen(e) => writeln!(f, "{pad}env {at} ({var}) = any {e}:")?,
                        }
                        go(b, indent + 1, f)?;
                    }
                    Ok(())
                }
            }
        }
        go(self, 0, f)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Proof {
    pub strategy: Strategy,
    pub steps: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FailureKind {
    /// The search space under the restrictions was empty.
    Exhausted,
    /// A depth, replica, step or closure bound cut the search.
    Bounded,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureKind::Exhausted => "exhausted",
            FailureKind::Bounded => "bounded",
        })
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Error)]
#[error("prove failed ({kind}) after {steps} steps")]
pub struct ProveFailure {
    pub kind: FailureKind,
    pub steps: usize,
    /// The longest run explored.
    pub deepest: Vec<Move>,
}

pub fn prove(config: &Configuration, restrictions: &Restrictions, bounds: &Bounds) -> Result<Proof, ProveFailure> {
    prove_with(config, restrictions, bounds, Parallelism::default())
}

pub fn prove_with(
    config: &Configuration,
    restrictions: &Restrictions,
    bounds: &Bounds,
    mode: Parallelism,
) -> Result<Proof, ProveFailure> {
    let universe = match &bounds.term_universe {
        Some(u) => u.clone(),
        None => default_universe(config),
    };
    let ctx = Ctx { restrictions, bounds, universe: &universe, start: config.trace().len(), mode };
    let mut s = Searcher::new(ctx, true);
    let found = s.node(config, 0);
    match found {
        Some(strategy) => {
            let inputs: HashSet<Symbol> = config.inputs().iter().map(|s| s.name.clone()).collect();
            Ok(Proof { strategy: normalize(strategy, &inputs), steps: s.steps })
        }
        None => Err(ProveFailure {
            kind: if s.bounded { FailureKind::Bounded } else { FailureKind::Exhausted },
            steps: s.steps,
            deepest: s.deepest,
        }),
    }
}

/// Numerals ascending, then constants by name.
fn default_universe(config: &Configuration) -> Vec<Term> {
    let mut u: Vec<Term> = config
        .term_universe()
        .into_iter()
        .filter(|t| !matches!(t, Term::Const(c) if c.as_str().starts_with('_')))
        .collect();
    u.push(Term::Num(0));
    u.sort_by(|a, b| match (a, b) {
        (Term::Num(x), Term::Num(y)) => x.cmp(y),
        (Term::Num(_), _) => std::cmp::Ordering::Less,
        (_, Term::Num(_)) => std::cmp::Ordering::Greater,
        _ => a.cmp(b),
    });
    u.dedup();
    u
}

/// Within each run of consecutive machine moves, moves on input services go
/// before moves on the output. Moves on different services commute.
fn normalize(s: Strategy, inputs: &HashSet<Symbol>) -> Strategy {
    let mut chain = Vec::new();
    let mut s = s;
    while let Strategy::Step { mv, next } = s {
        chain.push(mv);
        s = *next;
    }
    let tail = match s {
        Strategy::EnvBranch { at, var, branches } => Strategy::EnvBranch {
            at,
            var,
            branches: branches.into_iter().map(|(k, b)| (k, normalize(b, inputs))).collect(),
        },
        other => other,
    };
    chain.sort_by_key(|mv| !inputs.contains(&mv.at().dir));
    chain.into_iter().rev().fold(tail, |next, mv| Strategy::Step { mv, next: Box::new(next) })
}

#[derive(Clone, Copy)]
struct Ctx<'a> {
    restrictions: &'a Restrictions,
    bounds: &'a Bounds,
    universe: &'a [Term],
    start: usize,
    mode: Parallelism,
}

enum Expansion {
    Dead,
    Env { at: Location, var: Symbol },
    Moves(Vec<StrategyMove>),
}

struct Report {
    steps: usize,
    bounded: bool,
    deepest: Vec<Move>,
}

struct Searcher<'a> {
    ctx: Ctx<'a>,
    fan_out: bool,
    steps: usize,
    bounded: bool,
    out_of_steps: bool,
    visited: HashMap<String, usize>,
    deepest: Vec<Move>,
}

impl<'a> Searcher<'a> {
    fn new(ctx: Ctx<'a>, fan_out: bool) -> Self {
        Searcher {
            ctx,
            fan_out,
            steps: 0,
            bounded: false,
            out_of_steps: false,
            visited: HashMap::new(),
            deepest: Vec::new(),
        }
    }

    fn node(&mut self, cfg: &Configuration, depth: usize) -> Option<Strategy> {
        if self.out_of_steps {
            return None;
        }
        self.steps += 1;
        if self.steps > self.ctx.bounds.max_steps {
            self.out_of_steps = true;
            self.bounded = true;
            return None;
        }
        let run = &cfg.trace()[self.ctx.start..];
        if run.len() > self.deepest.len() {
            self.deepest = run.to_vec();
        }
        let out_root = Location::root(cfg.output().name.clone());
        if self.ctx.restrictions.allows(&out_root, ProofRule::Close) && is_elementary(cfg) {
            match close_with_budget(cfg, CLOSE_BUDGET) {
                Ok(_) => return Some(Strategy::Close),
                Err(ClosureError::IterationBound(_)) => self.bounded = true,
                Err(_) => {}
            }
        }
        if depth >= self.ctx.bounds.max_depth {
            self.bounded = true;
            return None;
        }
        let fp = cfg.fingerprint();
        match self.visited.get(&fp) {
            Some(&d) if d <= depth => return None,
            _ => {
                self.visited.insert(fp, depth);
            }
        }
        match self.expand(cfg) {
            Expansion::Dead => None,
            Expansion::Env { at, var } => {
                let reads = run.iter().filter(|m| matches!(m, Move::Read { .. })).count();
                let eigen = Symbol::new(&format!("_e{}", reads + 1));
                let mut next = cfg.clone();
                next.read_term(&at, Term::Const(eigen.clone()), &var).ok()?;
                let s = self.node(&next, depth + 1)?;
                Some(Strategy::EnvBranch { at, var, branches: vec![(BranchKey::Eigen(eigen), s)] })
            }
            Expansion::Moves(moves) => {
                if self.fan_out && moves.len() >= 2 {
                    let children: Vec<(StrategyMove, Configuration)> =
                        moves.into_iter().filter_map(|m| m.apply(cfg).ok().map(|c| (m, c))).collect();
                    if children.len() >= 2 {
                        self.fan_out = false;
                        return self.fan(children, depth);
                    }
                    return children.into_iter().find_map(|(mv, c)| {
                        self.node(&c, depth + 1).map(|s| Strategy::Step { mv, next: Box::new(s) })
                    });
                }
                for mv in moves {
                    let Ok(c) = mv.apply(cfg) else { continue };
                    if let Some(s) = self.node(&c, depth + 1) {
                        return Some(Strategy::Step { mv, next: Box::new(s) });
                    }
                    if self.out_of_steps {
                        break;
                    }
                }
                None
            }
        }
    }

    fn fan(&mut self, children: Vec<(StrategyMove, Configuration)>, depth: usize) -> Option<Strategy> {
        let ctx = self.ctx;
        let reports: Vec<Mutex<Option<Report>>> = children.iter().map(|_| Mutex::new(None)).collect();
        let found = par::find_map_first(ctx.mode, &children, |i, (mv, c)| {
            let mut s = Searcher::new(ctx, false);
            let r = s.node(c, depth + 1);
            *reports[i].lock().expect("report slot") =
                Some(Report { steps: s.steps, bounded: s.bounded, deepest: s.deepest });
            r.map(|next| (i, Strategy::Step { mv: mv.clone(), next: Box::new(next) }))
        });
        let last = found.as_ref().map_or(children.len() - 1, |(i, _)| *i);
        for slot in &reports[..=last] {
            let report = slot.lock().expect("report slot").take().expect("earlier children complete");
            self.steps += report.steps;
            self.bounded |= report.bounded;
            if report.deepest.len() > self.deepest.len() {
                self.deepest = report.deepest;
            }
        }
        found.map(|(_, s)| s)
    }

    fn candidates(&self, at: &Location) -> Vec<StrategyMove> {
        std::iter::once(Candidate::Fresh)
            .chain(self.ctx.universe.iter().cloned().map(Candidate::Term))
            .map(|candidate| StrategyMove::Write { at: at.clone(), candidate })
            .collect()
    }

    fn expand(&mut self, cfg: &Configuration) -> Expansion {
        let r = self.ctx.restrictions;
        let mut positions = cfg.positions();
        positions.sort_by_key(|p| r.priority(&p.at));

        for p in &positions {
            if let (Side::Output, PositionKind::Quantifier { role: Role::Environment, var, .. }) = (p.side, &p.kind) {
                if !r.allows(&p.at, ProofRule::Read) {
                    return Expansion::Dead;
                }
                return Expansion::Env { at: p.at.clone(), var: var.clone() };
            }
        }
        for p in &positions {
            if let PositionKind::Quantifier { role: Role::Machine, .. } = p.kind {
                if r.allows(&p.at, ProofRule::Write) {
                    return Expansion::Moves(self.candidates(&p.at));
                }
            }
        }
        let limit = self.ctx.bounds.max_replicas.min(cfg.replica_limit());
        let mut moves = Vec::new();
        for p in &positions {
            let PositionKind::Recurrence { replicas, next_index, single_use } = &p.kind else {
                continue;
            };
            let rules = match r.get(&p.at) {
                Some(restriction) => restriction.rules.clone(),
                None => vec![ProofRule::Replicate],
            };
            for rule in rules {
                match rule {
                    ProofRule::Replicate if (*replicas as u32) < limit => {
                        moves.push(StrategyMove::Replicate { at: p.at.clone(), index: *next_index })
                    }
                    ProofRule::Replicate => self.bounded = true,
                    ProofRule::Write if matches!(single_use, Some((Role::Machine, _, _))) => {
                        moves.extend(self.candidates(&p.at))
                    }
                    _ => {}
                }
            }
        }
        if moves.is_empty() {
            Expansion::Dead
        } else {
            Expansion::Moves(moves)
        }
    }
}
