//! Textbook recursive unification with a triangular substitution.

use std::collections::BTreeMap;

use coli::term::{GlobalVar, Term};
use rand::rngs::StdRng;
use rand::Rng;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum T {
    V(u32),
    F(String, Vec<T>),
}

pub type Subst = BTreeMap<u32, T>;

pub fn from_term(t: &Term) -> T {
    match t {
        Term::Global(GlobalVar(k)) => T::V(*k),
        Term::Const(c) => T::F(c.to_string(), vec![]),
        Term::Num(n) => T::F(n.to_string(), vec![]),
        Term::App(f, args) => T::F(f.to_string(), args.iter().map(from_term).collect()),
        other => panic!("oracle does not model {other:?}"),
    }
}

pub fn to_term(t: &T) -> Term {
    match t {
        T::V(k) => Term::global(*k),
        T::F(c, args) if args.is_empty() => Term::constant(c),
        T::F(f, args) => Term::app(f, args.iter().map(to_term).collect()),
    }
}

pub fn resolve(s: &Subst, t: &T) -> T {
    match t {
        T::V(k) => match s.get(k) {
            Some(b) => resolve(s, b),
            None => t.clone(),
        },
        T::F(f, args) => T::F(f.clone(), args.iter().map(|a| resolve(s, a)).collect()),
    }
}

fn occurs(k: u32, t: &T) -> bool {
    match t {
        T::V(j) => *j == k,
        T::F(_, args) => args.iter().any(|a| occurs(k, a)),
    }
}

pub fn unify_into(a: &T, b: &T, s: &mut Subst) -> bool {
    let (a, b) = (resolve(s, a), resolve(s, b));
    match (&a, &b) {
        (T::V(x), T::V(y)) if x == y => true,
        (T::V(x), t) | (t, T::V(x)) => {
            if occurs(*x, t) {
                return false;
            }
            s.insert(*x, t.clone());
            true
        }
        (T::F(f, xs), T::F(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| unify_into(x, y, s))
        }
    }
}

pub fn mgu(a: &T, b: &T) -> Option<Subst> {
    let mut s = Subst::new();
    unify_into(a, b, &mut s).then_some(s)
}

/// True when some variable of the pair would have to contain itself.
pub fn needs_occurs_check(a: &T, b: &T) -> bool {
    fn go(a: &T, b: &T, s: &mut Subst) -> Option<bool> {
        let (a, b) = (resolve(s, a), resolve(s, b));
        match (&a, &b) {
            (T::V(x), T::V(y)) if x == y => Some(false),
            (T::V(x), t) | (t, T::V(x)) => {
                if occurs(*x, t) {
                    return Some(true);
                }
                s.insert(*x, t.clone());
                Some(false)
            }
            (T::F(f, xs), T::F(g, ys)) if f == g && xs.len() == ys.len() => {
                for (x, y) in xs.iter().zip(ys) {
                    if go(x, y, s)? {
                        return Some(true);
                    }
                }
                Some(false)
            }
            _ => None,
        }
    }
    go(a, b, &mut Subst::new()).unwrap_or(false)
}

/// Terms over constants a, b, c, unary f, binary g and variables W1..W3.
pub fn random_term(rng: &mut StdRng, depth: u32) -> T {
    let leaf = depth == 0 || rng.gen_bool(0.35);
    if leaf {
        if rng.gen_bool(0.5) {
            T::V(rng.gen_range(1..=3))
        } else {
            T::F(["a", "b", "c"][rng.gen_range(0..3)].to_string(), vec![])
        }
    } else if rng.gen_bool(0.5) {
        T::F("f".into(), vec![random_term(rng, depth - 1)])
    } else {
        T::F("g".into(), vec![random_term(rng, depth - 1), random_term(rng, depth - 1)])
    }
}

/// `t` with some subterms replaced by variables, so that the pair has a
/// reasonable chance of unifying.
pub fn perturb(rng: &mut StdRng, t: &T) -> T {
    if rng.gen_bool(0.25) {
        return T::V(rng.gen_range(1..=3));
    }
    match t {
        T::V(_) => t.clone(),
        T::F(f, args) => T::F(f.clone(), args.iter().map(|a| perturb(rng, a)).collect()),
    }
}
