use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use super::ast::{Expr, Script, Stmt, StmtKind};
use crate::config::{Configuration, InitError, MoveError};
use crate::kb::Kb;
use crate::par::{self, Parallelism};
use crate::path::{Location, Path};
use crate::prover::{
    prove_with, BranchKey, Bounds, Candidate, FailureKind, ProveFailure, Restriction, RestrictionError, Restrictions,
    Strategy, StrategyMove,
};
use crate::solver::{close_elementary, Closure, ClosureError};
use crate::term::{Symbol, Term};

/// Source of environment moves, consumed strictly in order.
pub trait InputChannel {
    /// The environment's choice for the quantifier binding `var` at `at`.
    fn next_value(&mut self, at: &Location, var: &Symbol) -> Result<u64, ChannelError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("input channel exhausted")]
    Exhausted,
    #[error("{0}")]
    Invalid(String),
}

/// A fixed list of values, as given by `--inputs`.
#[derive(Clone, Debug, Default)]
pub struct VecChannel {
    values: VecDeque<u64>,
}

impl VecChannel {
    pub fn new(values: impl IntoIterator<Item = u64>) -> Self {
        VecChannel { values: values.into_iter().collect() }
    }

    pub fn remaining(&self) -> usize {
        self.values.len()
    }
}

impl InputChannel for VecChannel {
    fn next_value(&mut self, _: &Location, _: &Symbol) -> Result<u64, ChannelError> {
        self.values.pop_front().ok_or(ChannelError::Exhausted)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LostReason {
    Prove(FailureKind),
    NoDerivation,
    NotElementary,
    Unsupported,
    ClosureBound,
    NoExecute,
}

impl LostReason {
    /// True when the loss came from hitting a search bound rather than from
    /// a definite failure.
    pub fn is_bounded(&self) -> bool {
        matches!(self, LostReason::Prove(FailureKind::Bounded) | LostReason::ClosureBound)
    }

    fn from_closure(e: &ClosureError) -> Self {
        match e {
            ClosureError::NotElementary(_) => LostReason::NotElementary,
            ClosureError::Unsupported(_) => LostReason::Unsupported,
            ClosureError::NoDerivation => LostReason::NoDerivation,
            ClosureError::IterationBound(_) => LostReason::ClosureBound,
        }
    }
}

impl fmt::Display for LostReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LostReason::Prove(kind) => write!(f, "prove-{kind}"),
            LostReason::NoDerivation => f.write_str("no-derivation"),
            LostReason::NotElementary => f.write_str("not-elementary"),
            LostReason::Unsupported => f.write_str("unsupported"),
            LostReason::ClosureBound => f.write_str("bounded"),
            LostReason::NoExecute => f.write_str("no-execute"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Won,
    Lost(LostReason),
}

#[derive(Debug, Error)]
pub enum VmError {
    #[error("line {line}: {source}")]
    Move { line: usize, source: MoveError },
    #[error("line {line}: {source}")]
    Channel { line: usize, source: ChannelError },
    #[error("line {line}: {source}")]
    Restriction { line: usize, source: RestrictionError },
    #[error("line {line}: script variable `{var}` is not defined")]
    Undefined { line: usize, var: Symbol },
    #[error("line {line}: `{expr}` is negative")]
    Negative { line: usize, expr: String },
    #[error("line {line}: value {value} does not fit a path index")]
    IndexRange { line: usize, value: u64 },
    #[error("strategy has no branch for value {value} at {at}")]
    NoBranch { at: Location, value: u64 },
    #[error(transparent)]
    Init(#[from] InitError),
}

impl VmError {
    /// True for errors caused by a configured limit (replicas, depth).
    pub fn is_bound(&self) -> bool {
        matches!(self, VmError::Move { source: MoveError::ReplicaLimit { .. }, .. })
            || matches!(self, VmError::Init(InitError::Expand(crate::directory::ExpandError::DepthExceeded { .. })))
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub bounds: Bounds,
    pub mode: Parallelism,
}

/// Everything a finished session produced.
#[derive(Clone, Debug)]
pub struct Run {
    pub outcome: Outcome,
    pub config: Configuration,
    pub closure: Option<Closure>,
    pub prove_failure: Option<ProveFailure>,
}

impl Run {
    /// The output with the closing substitution applied, e.g. `fact(3,6)`.
    pub fn result(&self) -> Option<String> {
        let closure = self.closure.as_ref()?;
        Some(self.config.output_formula(&|t| closure.subst.apply(t)).to_string())
    }

    /// Final bindings of the global variables.
    pub fn bindings(&self) -> Option<String> {
        self.closure.as_ref().map(|c| c.subst.to_string())
    }
}

/// Builds the initial configuration for a session. The output is taken from
/// `query`, then the script signature, then the knowledge base; inputs come
/// from the signature or default to [`Kb::default_inputs`].
pub fn initial_config(kb: &Kb, script: Option<&Script>, query: Option<&Symbol>) -> Result<Configuration, InitError> {
    let sig = script.and_then(|s| s.signature.as_ref());
    let output = query
        .or(sig.map(|s| &s.output))
        .or(kb.query.as_ref())
        .cloned()
        .ok_or_else(|| InitError::Undefined(Symbol::new("query")))?;
    let inputs = match sig {
        Some(s) => s.inputs.clone(),
        None => kb.default_inputs().into_iter().filter(|n| n != &output).collect(),
    };
    Configuration::init(&kb.table, &inputs, &output)
}

struct Vm<'a> {
    config: Configuration,
    vars: BTreeMap<Symbol, u64>,
    restrictions: Restrictions,
    pending: Option<Strategy>,
    channel: &'a mut dyn InputChannel,
    options: &'a RunOptions,
}

enum Flow {
    Continue,
    Done(Outcome, Option<Closure>, Option<ProveFailure>),
}

pub fn run_script(
    script: &Script,
    config: Configuration,
    channel: &mut dyn InputChannel,
    options: &RunOptions,
) -> Result<Run, VmError> {
    let mut vm = Vm { config, vars: BTreeMap::new(), restrictions: Restrictions::new(), pending: None, channel, options };
    let (outcome, closure, prove_failure) = match vm.block(&script.body)? {
        Flow::Done(o, c, f) => (o, c, f),
        Flow::Continue => (Outcome::Lost(LostReason::NoExecute), None, None),
    };
    Ok(Run { outcome, config: vm.config, closure, prove_failure })
}

impl Vm<'_> {
    fn block(&mut self, body: &[Stmt]) -> Result<Flow, VmError> {
        for stmt in body {
            if let Flow::Done(o, c, f) = self.stmt(stmt)? {
                return Ok(Flow::Done(o, c, f));
            }
        }
        Ok(Flow::Continue)
    }

    fn eval(&self, e: &Expr, line: usize) -> Result<u64, VmError> {
        Ok(match e {
            Expr::Num(n) => *n,
            Expr::Var(v) => {
                *self.vars.get(v).ok_or_else(|| VmError::Undefined { line, var: v.clone() })?
            }
            Expr::Add(a, b) => self.eval(a, line)?.saturating_add(self.eval(b, line)?),
            Expr::Sub(a, b) => self
                .eval(a, line)?
                .checked_sub(self.eval(b, line)?)
                .ok_or_else(|| VmError::Negative { line, expr: e.to_string() })?,
        })
    }

    fn resolve(&self, p: &Path, line: usize) -> Result<Location, VmError> {
        p.resolve(|v| {
            let value = *self.vars.get(v).ok_or_else(|| VmError::Undefined { line, var: v.clone() })?;
            u32::try_from(value).map_err(|_| VmError::IndexRange { line, value })
        })
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<Flow, VmError> {
        let line = stmt.line;
        let mv = |source| VmError::Move { line, source };
        match &stmt.kind {
            StmtKind::Read { path, var } => {
                let at = self.resolve(path, line)?;
                let qvar = self.config.quantifier_var(&at).unwrap_or_else(|| var.clone());
                let value =
                    self.channel.next_value(&at, &qvar).map_err(|source| VmError::Channel { line, source })?;
                self.config.read(&at, value, var).map_err(mv)?;
                self.vars.insert(var.clone(), value);
            }
            StmtKind::Write { path } => {
                let at = self.resolve(path, line)?;
                self.config.write(&at).map_err(mv)?;
            }
            StmtKind::Choose(specs) | StmtKind::Schoose(specs) => {
                let prioritized = matches!(stmt.kind, StmtKind::Schoose(_));
                let mut list = Vec::new();
                for s in specs {
                    list.push(Restriction { at: self.resolve(&s.path, line)?, rules: s.rules.clone(), prioritized });
                }
                self.restrictions
                    .set(&self.config, list)
                    .map_err(|source| VmError::Restriction { line, source })?;
            }
            StmtKind::For { var, from, to, body } => {
                let (a, b) = (self.eval(from, line)?, self.eval(to, line)?);
                let saved = self.vars.get(var).copied();
                let mut i = a;
                while i <= b {
                    self.vars.insert(var.clone(), i);
                    if let Flow::Done(o, c, f) = self.block(body)? {
                        return Ok(Flow::Done(o, c, f));
                    }
                    i += 1;
                }
                match saved {
                    Some(v) => self.vars.insert(var.clone(), v),
                    None => self.vars.remove(var),
                };
            }
            StmtKind::If { cond, then, otherwise } => {
                let (a, b) = (self.eval(&cond.lhs, line)?, self.eval(&cond.rhs, line)?);
                let branch = if cond.op.holds(a, b) { then } else { otherwise };
                return self.block(branch);
            }
            StmtKind::Prove => {
                match prove_with(&self.config, &self.restrictions, &self.options.bounds, self.options.mode) {
                    Ok(proof) => self.pending = Some(proof.strategy),
                    Err(failure) => {
                        let reason = LostReason::Prove(failure.kind);
                        return Ok(Flow::Done(Outcome::Lost(reason), None, Some(failure)));
                    }
                }
            }
            StmtKind::Execute => {
                let (outcome, closure) = match self.pending.take() {
                    Some(strategy) => {
                        let (outcome, config, closure) = execute_strategy(&strategy, &self.config, self.channel)
                            .map_err(|e| match e {
                                VmError::Move { source, .. } => VmError::Move { line, source },
                                VmError::Channel { source, .. } => VmError::Channel { line, source },
                                other => other,
                            })?;
                        self.config = config;
                        (outcome, closure)
                    }
                    None => match close_elementary(&self.config) {
                        Ok(c) => (Outcome::Won, Some(c)),
                        Err(e) => (Outcome::Lost(LostReason::from_closure(&e)), None),
                    },
                };
                return Ok(Flow::Done(outcome, closure, None));
            }
        }
        Ok(Flow::Continue)
    }
}

/// Walks `strategy` from `config`, taking environment choices from
/// `channel`, and closes at the leaf.
pub fn execute_strategy(
    strategy: &Strategy,
    config: &Configuration,
    channel: &mut dyn InputChannel,
) -> Result<(Outcome, Configuration, Option<Closure>), VmError> {
    let mut config = config.clone();
    let mut eigen: Vec<(Symbol, u64)> = Vec::new();
    let mut s = strategy;
    loop {
        match s {
            Strategy::Close => {
                return Ok(match close_elementary(&config) {
                    Ok(c) => (Outcome::Won, config, Some(c)),
                    Err(e) => (Outcome::Lost(LostReason::from_closure(&e)), config, None),
                });
            }
            Strategy::Step { mv, next } => {
                let mv = match mv {
                    StrategyMove::Write { at, candidate: Candidate::Term(t) } => {
                        let t = eigen.iter().fold(t.clone(), |t, (e, v)| t.replace_const(e, &Term::Num(*v)));
                        StrategyMove::Write { at: at.clone(), candidate: Candidate::Term(t.eval_ground()) }
                    }
                    other => other.clone(),
                };
                config = mv.apply(&config).map_err(|source| VmError::Move { line: 0, source })?;
                s = next;
            }
            Strategy::EnvBranch { at, var, branches } => {
                let value = channel.next_value(at, var).map_err(|source| VmError::Channel { line: 0, source })?;
                let (key, next) = branches
                    .iter()
                    .find(|(k, _)| *k == BranchKey::Value(value))
                    .or_else(|| branches.iter().find(|(k, _)| matches!(k, BranchKey::Eigen(_))))
                    .ok_or_else(|| VmError::NoBranch { at: at.clone(), value })?;
                if let BranchKey::Eigen(e) = key {
                    eigen.push((e.clone(), value));
                }
                config.read(at, value, var).map_err(|source| VmError::Move { line: 0, source })?;
                s = next;
            }
        }
    }
}

/// Runs the same script once per input list.
pub fn run_many(
    script: &Script,
    config: &Configuration,
    inputs: &[Vec<u64>],
    options: &RunOptions,
    mode: Parallelism,
) -> Vec<Result<Run, VmError>> {
    par::map(mode, inputs, |_, values| {
        let mut channel = VecChannel::new(values.iter().copied());
        run_script(script, config.clone(), &mut channel, options)
    })
}

/// Executes `strategy` against each list of environment choices and reports
/// whether the machine won.
pub fn verify_strategy(
    strategy: &Strategy,
    config: &Configuration,
    inputs: &[Vec<u64>],
    mode: Parallelism,
) -> Vec<Result<Outcome, VmError>> {
    par::map(mode, inputs, |_, values| {
        let mut channel = VecChannel::new(values.iter().copied());
        execute_strategy(strategy, config, &mut channel).map(|(o, _, _)| o)
    })
}
