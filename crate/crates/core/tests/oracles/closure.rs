//! Exhaustive enumeration of rule firing orders.
//!
//! Every input implication may fire at most once, on any fact its premise
//! unifies with. All reachable states are visited, and in each one every way
//! of satisfying the output is recorded. The result is the set of bindings of
//! the output's global variables that some derivation produces.

use std::collections::BTreeSet;

use coli::config::{Configuration, MoveKind, Side};
use coli::formula::Formula;
use coli::term::{GlobalVar, Term};
use rand::rngs::StdRng;
use rand::Rng;

use super::robinson::{from_term, resolve, unify_into, Subst, T};

#[derive(Clone, Debug)]
struct Atom {
    pred: String,
    args: Vec<T>,
}

#[derive(Clone, Debug)]
struct Rule {
    premise: Atom,
    conclusions: Vec<Atom>,
}

#[derive(Clone, Debug)]
enum Goal {
    Atom(Atom),
    All(Box<Goal>, Box<Goal>),
    Any(Box<Goal>, Box<Goal>),
}

fn atom(f: &Formula) -> Option<Atom> {
    match f {
        Formula::Atom(p, args) => Some(Atom { pred: p.to_string(), args: args.iter().map(from_term).collect() }),
        _ => None,
    }
}

fn conjuncts(f: &Formula, out: &mut Vec<Formula>) {
    match f {
        Formula::And(a, b) => {
            conjuncts(a, out);
            conjuncts(b, out);
        }
        _ => out.push(f.clone()),
    }
}

fn goal(f: &Formula) -> Goal {
    match f {
        Formula::And(a, b) => Goal::All(Box::new(goal(a)), Box::new(goal(b))),
        Formula::Or(a, b) => Goal::Any(Box::new(goal(a)), Box::new(goal(b))),
        _ => Goal::Atom(atom(f).expect("elementary output")),
    }
}

fn unify_atoms(a: &Atom, b: &Atom, s: &Subst) -> Option<Subst> {
    if a.pred != b.pred || a.args.len() != b.args.len() {
        return None;
    }
    let mut s = s.clone();
    let pa = T::F("args".into(), a.args.clone());
    let pb = T::F("args".into(), b.args.clone());
    unify_into(&pa, &pb, &mut s).then_some(s)
}

fn satisfy(g: &Goal, facts: &[Atom], s: &Subst, out: &mut Vec<Subst>) {
    match g {
        Goal::Atom(a) => out.extend(facts.iter().filter_map(|f| unify_atoms(a, f, s))),
        Goal::Any(a, b) => {
            satisfy(a, facts, s, out);
            satisfy(b, facts, s, out);
        }
        Goal::All(a, b) => {
            let mut left = Vec::new();
            satisfy(a, facts, s, &mut left);
            for s in left {
                satisfy(b, facts, &s, out);
            }
        }
    }
}

fn is_ground(t: &T) -> bool {
    match t {
        T::V(_) => false,
        T::F(_, args) => args.iter().all(is_ground),
    }
}

/// Every ground binding of the output's globals, in index order, that some
/// firing order derives.
pub fn derivable_bindings(config: &Configuration) -> BTreeSet<Vec<Term>> {
    let mut facts = Vec::new();
    let mut rules = Vec::new();
    for svc in config.services().iter().filter(|s| s.side == Side::Input) {
        let mut parts = Vec::new();
        conjuncts(&svc.graph.to_formula(), &mut parts);
        for p in parts {
            match &p {
                Formula::Atom(..) => facts.push(atom(&p).unwrap()),
                Formula::Implies(a, b) => {
                    let mut cs = Vec::new();
                    conjuncts(b, &mut cs);
                    rules.push(Rule {
                        premise: atom(a).expect("atomic premise"),
                        conclusions: cs.iter().map(|c| atom(c).expect("atomic conclusion")).collect(),
                    });
                }
                other => panic!("oracle does not model input {other}"),
            }
        }
    }
    let out = config.output().graph.to_formula();
    let g = goal(&out);
    let mut required = Vec::new();
    collect_globals(&out, &mut required);
    required.sort_unstable();

    let mut found = BTreeSet::new();
    explore(&rules, &g, &required, facts, Subst::new(), vec![false; rules.len()], &mut found);
    found
}

fn collect_globals(f: &Formula, out: &mut Vec<u32>) {
    fn term(t: &Term, out: &mut Vec<u32>) {
        match t {
            Term::Global(GlobalVar(k)) if !out.contains(k) => out.push(*k),
            Term::App(_, args) => args.iter().for_each(|a| term(a, out)),
            _ => {}
        }
    }
    match f {
        Formula::Atom(_, args) => args.iter().for_each(|a| term(a, out)),
        _ => f.children().into_iter().for_each(|c| collect_globals(c, out)),
    }
}

fn explore(
    rules: &[Rule],
    g: &Goal,
    required: &[u32],
    facts: Vec<Atom>,
    s: Subst,
    fired: Vec<bool>,
    found: &mut BTreeSet<Vec<Term>>,
) {
    let mut sols = Vec::new();
    satisfy(g, &facts, &s, &mut sols);
    for sol in sols {
        let vals: Vec<T> = required.iter().map(|k| resolve(&sol, &T::V(*k))).collect();
        if vals.iter().all(is_ground) {
            found.insert(vals.iter().map(super::robinson::to_term).collect());
        }
    }
    for (r, rule) in rules.iter().enumerate() {
        if fired[r] {
            continue;
        }
        for fact in &facts {
            let Some(s2) = unify_atoms(&rule.premise, fact, &s) else { continue };
            let mut facts2 = facts.clone();
            facts2.extend(rule.conclusions.iter().cloned());
            let mut fired2 = fired.clone();
            fired2[r] = true;
            explore(rules, g, required, facts2, s2, fired2, found);
        }
    }
}

const PREDS: [&str; 3] = ["p", "q", "r"];
const CONSTS: [&str; 3] = ["a", "b", "c"];

fn pick<'a>(rng: &mut StdRng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

fn arg(rng: &mut StdRng, var: Option<&str>) -> Term {
    match var {
        Some(v) if rng.gen_bool(0.6) => Term::bound(v),
        _ => Term::constant(pick(rng, &CONSTS)),
    }
}

fn random_rule(rng: &mut StdRng) -> Formula {
    let quantified = rng.gen_bool(0.6);
    let var = quantified.then_some("x");
    let premise = Formula::atom(pick(rng, &PREDS), vec![arg(rng, var)]);
    let mut concl = Formula::atom(pick(rng, &PREDS), vec![arg(rng, var)]);
    if rng.gen_bool(0.3) {
        concl = Formula::and(concl, Formula::atom(pick(rng, &PREDS), vec![arg(rng, var)]));
    }
    let body = Formula::implies(premise, concl);
    if quantified {
        Formula::all("x", body)
    } else {
        body
    }
}

/// A random configuration with up to two implications over the constants
/// a, b, c, made elementary by writing at every machine quantifier.
pub fn random_elementary(rng: &mut StdRng) -> Configuration {
    let mut inputs: Vec<(String, Formula)> = Vec::new();
    for i in 0..rng.gen_range(1..=3) {
        let f = Formula::atom(pick(rng, &PREDS), vec![Term::constant(pick(rng, &CONSTS))]);
        inputs.push((format!("f{i}"), f));
    }
    for i in 0..rng.gen_range(0..=2) {
        inputs.push((format!("r{i}"), random_rule(rng)));
    }
    let existential = rng.gen_bool(0.6);
    let two = existential && rng.gen_bool(0.4);
    let mut out = Formula::atom(pick(rng, &PREDS), vec![arg(rng, existential.then_some("z"))]);
    if two || rng.gen_bool(0.4) {
        let other = Formula::atom(pick(rng, &PREDS), vec![arg(rng, existential.then_some(if two { "w" } else { "z" }))]);
        out = if rng.gen_bool(0.5) { Formula::and(out, other) } else { Formula::or(out, other) };
    }
    if two {
        out = Formula::exists("w", out);
    }
    if existential {
        out = Formula::exists("z", out);
    }
    let named: Vec<(&str, Formula)> = inputs.iter().map(|(n, f)| (n.as_str(), f.clone())).collect();
    let mut config = Configuration::from_formulas(&named, ("goal", out)).expect("no directory references");
    while let Some(m) = config.legal_moves().into_iter().find(|m| m.kind == MoveKind::Write) {
        config.write(&m.at).expect("legal write");
    }
    config
}
