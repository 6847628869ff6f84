//! Closing an elementary configuration.
//!
//! Once every quantifier of the output has been resolved, the remaining
//! question is classical: do the input facts, together with the input
//! implications used as one-shot rules, derive the output? The search fires
//! rules depth-first (facts newest first) and checks the goal after every
//! step. All global variables are shared between rules and goal, so a
//! successful derivation fixes the machine's written values.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use super::unify::{unify_args, Substitution};
use crate::config::{Configuration, Side};
use crate::graph::{FormulaGraph, Node, NodeId};
use crate::term::{GlobalVar, Symbol, Term};

/// Search nodes explored before giving up with [`ClosureError::IterationBound`].
pub const NODE_BUDGET: usize = 150_000;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Atom {
    pub pred: Symbol,
    pub args: Vec<Term>,
}

impl Atom {
    fn apply(&self, s: &Substitution) -> Atom {
        Atom { pred: self.pred.clone(), args: self.args.iter().map(|t| s.apply(t)).collect() }
    }

    fn globals(&self, out: &mut Vec<GlobalVar>) {
        self.args.iter().for_each(|t| t.globals(out));
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pred)?;
        if !self.args.is_empty() {
            let args: Vec<String> = self.args.iter().map(|t| t.to_string()).collect();
            write!(f, "({})", args.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Goal {
    Atom(Atom),
    All(Vec<Goal>),
    Any(Vec<Goal>),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rule {
    pub premise: Atom,
    pub conclusions: Vec<Atom>,
}

/// The classical problem extracted from a configuration.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Problem {
    pub facts: Vec<Atom>,
    pub rules: Vec<Rule>,
    pub goal: Goal,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Closure {
    pub subst: Substitution,
    /// Indices of fired rules, in firing order.
    pub fired: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClosureError {
    #[error("output is not elementary: unresolved {0}")]
    NotElementary(&'static str),
    #[error("output contains {0}, which closure does not support")]
    Unsupported(&'static str),
    #[error("no derivation of the output from the inputs")]
    NoDerivation,
    #[error("closure search exceeded {0} nodes")]
    IterationBound(usize),
}

/// True when the output contains no quantifiers and no unreplicated
/// recurrences.
pub fn is_elementary(config: &Configuration) -> bool {
    goal_of(&config.output().graph, config.output().graph.root()).is_ok()
}

pub fn extract(config: &Configuration) -> Result<Problem, ClosureError> {
    let out = &config.output().graph;
    let goal = goal_of(out, out.root())?;
    let mut facts = Vec::new();
    let mut rules = Vec::new();
    for svc in config.services().iter().filter(|s| s.side == Side::Input) {
        let mut seen = HashSet::new();
        collect_inputs(&svc.graph, svc.graph.root(), &mut seen, &mut facts, &mut rules);
    }
    Ok(Problem { facts, rules, goal })
}

fn goal_of(g: &FormulaGraph, id: NodeId) -> Result<Goal, ClosureError> {
    crate::deep(|| goal_node(g, id))
}

fn goal_node(g: &FormulaGraph, id: NodeId) -> Result<Goal, ClosureError> {
    Ok(match g.node(id) {
        Node::Atom(p, args) => Goal::Atom(Atom { pred: p.clone(), args: args.clone() }),
        Node::And(a, b) => Goal::All(vec![goal_of(g, *a)?, goal_of(g, *b)?]),
        Node::Or(a, b) => Goal::Any(vec![goal_of(g, *a)?, goal_of(g, *b)?]),
        Node::Recur { replicas, .. } if !replicas.is_empty() => {
            Goal::All(replicas.values().map(|r| goal_of(g, *r)).collect::<Result<_, _>>()?)
        }
        Node::Recur { .. } => return Err(ClosureError::NotElementary("recurrence")),
        Node::ChAll(..) => return Err(ClosureError::NotElementary("choice universal")),
        Node::ChExists(..) => return Err(ClosureError::NotElementary("choice existential")),
        Node::Neg(_) => return Err(ClosureError::Unsupported("negation")),
        Node::Implies(..) => return Err(ClosureError::Unsupported("implication")),
    })
}

fn atoms_of(g: &FormulaGraph, id: NodeId, out: &mut Vec<Atom>) -> bool {
    match g.node(id) {
        Node::Atom(p, args) => {
            out.push(Atom { pred: p.clone(), args: args.clone() });
            true
        }
        Node::And(a, b) => atoms_of(g, *a, out) && atoms_of(g, *b, out),
        _ => false,
    }
}

fn collect_inputs(
    g: &FormulaGraph,
    id: NodeId,
    seen: &mut HashSet<NodeId>,
    facts: &mut Vec<Atom>,
    rules: &mut Vec<Rule>,
) {
    if !seen.insert(id) {
        return;
    }
    crate::deep(|| collect_node(g, id, seen, facts, rules));
}

fn collect_node(
    g: &FormulaGraph,
    id: NodeId,
    seen: &mut HashSet<NodeId>,
    facts: &mut Vec<Atom>,
    rules: &mut Vec<Rule>,
) {
    match g.node(id) {
        Node::Atom(p, args) => facts.push(Atom { pred: p.clone(), args: args.clone() }),
        Node::And(a, b) => {
            collect_inputs(g, *a, seen, facts, rules);
            collect_inputs(g, *b, seen, facts, rules);
        }
        Node::Recur { replicas, .. } => {
            for r in replicas.values() {
                collect_inputs(g, *r, seen, facts, rules);
            }
        }
        Node::Implies(a, b) => {
            if let Node::Atom(p, args) = g.node(*a) {
                let mut conclusions = Vec::new();
                if atoms_of(g, *b, &mut conclusions) {
                    let premise = Atom { pred: p.clone(), args: args.clone() };
                    rules.push(Rule { premise, conclusions });
                }
            }
        }
        _ => {}
    }
}

/// Closes the configuration, returning the substitution that grounds the
/// output.
pub fn close_elementary(config: &Configuration) -> Result<Closure, ClosureError> {
    close_with_budget(config, NODE_BUDGET)
}

/// [`close_elementary`] with an explicit node budget.
pub fn close_with_budget(config: &Configuration, budget: usize) -> Result<Closure, ClosureError> {
    let problem = extract(config)?;
    let mut required = Vec::new();
    for id in config.output().graph.reachable() {
        if let Node::Atom(_, args) = config.output().graph.node(id) {
            args.iter().for_each(|t| t.globals(&mut required));
        }
    }
    solve(&problem, &required, budget)
}

/// Searches for a derivation of `problem.goal` grounding every variable in
/// `required`.
pub fn solve(problem: &Problem, required: &[GlobalVar], budget: usize) -> Result<Closure, ClosureError> {
    if !relevant(&problem.goal, problem) {
        return Err(ClosureError::NoDerivation);
    }
    let mut search = Search { problem, required, budget, nodes: 0, seen: HashSet::new() };
    let state = State { subst: Substitution::new(), facts: problem.facts.clone(), fired: Vec::new() };
    match search.dfs(&state)? {
        Some(c) => Ok(c),
        None => Err(ClosureError::NoDerivation),
    }
}

struct State {
    subst: Substitution,
    facts: Vec<Atom>,
    fired: Vec<usize>,
}

struct Search<'a> {
    problem: &'a Problem,
    required: &'a [GlobalVar],
    budget: usize,
    nodes: usize,
    /// Fired rules (as a set) and bindings of states already explored.
    seen: HashSet<(Vec<usize>, Substitution)>,
}

impl Search<'_> {
    fn grounded(&self, s: &Substitution) -> bool {
        self.required.iter().all(|v| s.apply(&Term::Global(*v)).is_ground())
    }

    fn dfs(&mut self, state: &State) -> Result<Option<Closure>, ClosureError> {
        let mut key = state.fired.clone();
        key.sort_unstable();
        if !self.seen.insert((key, state.subst.clone())) {
            return Ok(None);
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(ClosureError::IterationBound(self.budget));
        }
        let mut found = None;
        satisfy(&[&self.problem.goal], &state.subst, &state.facts, &mut |s| {
            if self.grounded(s) {
                found = Some(s.clone());
                true
            } else {
                false
            }
        });
        if let Some(subst) = found {
            return Ok(Some(Closure { subst, fired: state.fired.clone() }));
        }
        let unfired: Vec<usize> = (0..self.problem.rules.len()).filter(|i| !state.fired.contains(i)).collect();
        let shared = self.shared_globals(state, &unfired);
        let mut tried = HashSet::new();
        for &r in &unfired {
            let rule = &self.problem.rules[r];
            let shape = rule_shape(rule, &state.subst, &shared);
            for (fi, fact) in state.facts.iter().enumerate().rev() {
                if fact.pred != rule.premise.pred {
                    continue;
                }
                if !tried.insert((shape.clone(), fi)) {
                    continue;
                }
                let Ok(subst) = unify_args(&rule.premise.args, &fact.args, &state.subst) else {
                    continue;
                };
                let mut facts = state.facts.clone();
                facts.extend(rule.conclusions.iter().map(|c| c.apply(&subst)));
                let mut fired = state.fired.clone();
                fired.push(r);
                if let Some(c) = self.dfs(&State { subst, facts, fired })? {
                    return Ok(Some(c));
                }
            }
        }
        Ok(None)
    }

    /// Unbound globals that occur outside a single unfired rule.
    fn shared_globals(&self, state: &State, unfired: &[usize]) -> HashSet<GlobalVar> {
        let mut count: HashMap<GlobalVar, usize> = HashMap::new();
        let bump = |atoms: &mut dyn Iterator<Item = &Atom>, count: &mut HashMap<GlobalVar, usize>| {
            let mut vs = Vec::new();
            for a in atoms {
                a.apply(&state.subst).globals(&mut vs);
            }
            for v in vs.into_iter().collect::<BTreeSet<_>>() {
                *count.entry(v).or_default() += 1;
            }
        };
        bump(&mut state.facts.iter(), &mut count);
        let mut goal_atoms = Vec::new();
        goal_atoms_of(&self.problem.goal, &mut goal_atoms);
        bump(&mut goal_atoms.into_iter(), &mut count);
        for &r in unfired {
            let rule = &self.problem.rules[r];
            bump(&mut std::iter::once(&rule.premise).chain(&rule.conclusions), &mut count);
        }
        let mut shared: HashSet<GlobalVar> = count.into_iter().filter(|(_, n)| *n > 1).map(|(v, _)| v).collect();
        shared.extend(self.required.iter().copied());
        shared
    }
}

fn goal_atoms_of<'a>(g: &'a Goal, out: &mut Vec<&'a Atom>) {
    match g {
        Goal::Atom(a) => out.push(a),
        Goal::All(gs) | Goal::Any(gs) => gs.iter().for_each(|g| goal_atoms_of(g, out)),
    }
}

/// The rule under `subst`, with its local unbound globals renumbered by
/// first occurrence. Rules with equal shapes behave identically.
fn rule_shape(rule: &Rule, subst: &Substitution, shared: &HashSet<GlobalVar>) -> String {
    let mut local: HashMap<GlobalVar, usize> = HashMap::new();
    let mut rename = |t: &Term| -> Term {
        t.map_leaves(&mut |leaf| match leaf {
            Term::Global(v) if !shared.contains(v) => {
                let n = local.len();
                let k = *local.entry(*v).or_insert(n);
                Some(Term::Const(Symbol::new(&format!("_l{k}"))))
            }
            _ => None,
        })
    };
    let mut out = String::new();
    for a in std::iter::once(&rule.premise).chain(&rule.conclusions) {
        let a = a.apply(subst);
        let args: Vec<String> = a.args.iter().map(|t| rename(t).to_string()).collect();
        out.push_str(&format!("{}({});", a.pred, args.join(",")));
    }
    out
}

/// Enumerates substitutions satisfying all `goals` against `facts`, newest
/// fact first, stopping as soon as `accept` returns true.
fn satisfy(goals: &[&Goal], subst: &Substitution, facts: &[Atom], accept: &mut dyn FnMut(&Substitution) -> bool) -> bool {
    let Some((first, rest)) = goals.split_first() else {
        return accept(subst);
    };
    match first {
        Goal::Atom(a) => {
            for f in facts.iter().rev() {
                if f.pred != a.pred {
                    continue;
                }
                if let Ok(s) = unify_args(&a.args, &f.args, subst) {
                    if satisfy(rest, &s, facts, accept) {
                        return true;
                    }
                }
            }
            false
        }
        Goal::All(gs) => {
            let mut all: Vec<&Goal> = gs.iter().collect();
            all.extend_from_slice(rest);
            satisfy(&all, subst, facts, accept)
        }
        Goal::Any(gs) => gs.iter().any(|g| {
            let mut next = vec![g];
            next.extend_from_slice(rest);
            satisfy(&next, subst, facts, accept)
        }),
    }
}

/// Could `a` and `b` ever be made equal? Globals match anything; non-ground
/// arithmetic matches anything but a symbolic constant.
fn loosely_matches(a: &Term, b: &Term) -> bool {
    let (a, b) = (a.eval_ground(), b.eval_ground());
    let arith = |t: &Term| t.is_arith() && !t.is_ground();
    // arithmetic only ever yields numerals
    if (arith(&a) && matches!(b, Term::Const(_))) || (arith(&b) && matches!(a, Term::Const(_))) {
        return false;
    }
    if matches!(a, Term::Global(_)) || matches!(b, Term::Global(_)) || arith(&a) || arith(&b) {
        return true;
    }
    match (&a, &b) {
        (Term::App(f, xs), Term::App(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| loosely_matches(x, y))
        }
        _ => a == b,
    }
}

fn derivable(a: &Atom, p: &Problem) -> bool {
    let hit = |b: &Atom| {
        b.pred == a.pred && b.args.len() == a.args.len() && a.args.iter().zip(&b.args).all(|(x, y)| loosely_matches(x, y))
    };
    p.facts.iter().any(hit) || p.rules.iter().flat_map(|r| &r.conclusions).any(hit)
}

fn relevant(g: &Goal, p: &Problem) -> bool {
    match g {
        Goal::Atom(a) => derivable(a, p),
        Goal::All(gs) => gs.iter().all(|g| relevant(g, p)),
        Goal::Any(gs) => gs.iter().any(|g| relevant(g, p)),
    }
}
