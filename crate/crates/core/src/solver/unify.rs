//! Syntactic unification over global variables.
//!
//! Ground arithmetic is evaluated before terms are compared, so `2+1`
//! unifies with `3`. Equations with a non-ground arithmetic side are never
//! solved: `W1+1` against `3` is a clash, while `W1+1` against `W2+1`
//! unifies `W1` with `W2` structurally.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::term::{GlobalVar, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnifyError {
    #[error("cannot unify {0} with {1}")]
    Clash(Term, Term),
    #[error("{0} occurs in {1}")]
    Occurs(GlobalVar, Term),
}

/// An idempotent substitution: no bound variable occurs in any binding.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Substitution {
    map: BTreeMap<GlobalVar, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: GlobalVar) -> Option<&Term> {
        self.map.get(&v)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (GlobalVar, &Term)> {
        self.map.iter().map(|(v, t)| (*v, t))
    }

    /// Applies the substitution and evaluates ground arithmetic.
    pub fn apply(&self, t: &Term) -> Term {
        fn go(s: &Substitution, t: &Term) -> Term {
            match t {
                Term::Global(v) => match s.map.get(v) {
                    Some(b) => go(s, b),
                    None => t.clone(),
                },
                Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| go(s, a)).collect()),
                _ => t.clone(),
            }
        }
        go(self, t).eval_ground()
    }

    /// Adds `v := t`, keeping the substitution idempotent.
    fn bind(&mut self, v: GlobalVar, t: Term) {
        let single = Substitution { map: BTreeMap::from([(v, t.clone())]) };
        for b in self.map.values_mut() {
            *b = single.apply(b);
        }
        self.map.insert(v, t);
    }

    /// `self` followed by `other`.
    pub fn compose(&self, other: &Substitution) -> Substitution {
        let mut map: BTreeMap<GlobalVar, Term> = self.map.iter().map(|(v, t)| (*v, other.apply(t))).collect();
        for (v, t) in &other.map {
            map.entry(*v).or_insert_with(|| t.clone());
        }
        map.retain(|v, t| *t != Term::Global(*v));
        Substitution { map }
    }

    fn unify_into(&mut self, a: &Term, b: &Term) -> Result<(), UnifyError> {
        let mut work = vec![(a.clone(), b.clone())];
        while let Some((a, b)) = work.pop() {
            let (a, b) = (self.apply(&a), self.apply(&b));
            if a == b {
                continue;
            }
            match (&a, &b) {
                (Term::Global(v), t) | (t, Term::Global(v)) => {
                    if t.occurs_global(*v) {
                        return Err(UnifyError::Occurs(*v, t.clone()));
                    }
                    self.bind(*v, t.clone());
                }
                (Term::App(f, xs), Term::App(g, ys)) if f == g && xs.len() == ys.len() => {
                    work.extend(xs.iter().cloned().zip(ys.iter().cloned()).rev());
                }
                _ => return Err(UnifyError::Clash(a, b)),
            }
        }
        Ok(())
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}={t}")?;
        }
        f.write_str("}")
    }
}

impl FromIterator<(GlobalVar, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (GlobalVar, Term)>>(iter: I) -> Self {
        let mut s = Substitution::new();
        for (v, t) in iter {
            let t = s.apply(&t);
            s.bind(v, t);
        }
        s
    }
}

/// The most general unifier of `a` and `b`.
pub fn unify(a: &Term, b: &Term) -> Result<Substitution, UnifyError> {
    unify_with(a, b, &Substitution::new())
}

/// Extends `base` to a unifier of `a` and `b`.
pub fn unify_with(a: &Term, b: &Term, base: &Substitution) -> Result<Substitution, UnifyError> {
    let mut s = base.clone();
    s.unify_into(a, b)?;
    Ok(s)
}

/// Pairwise unification of two argument lists.
pub fn unify_args(xs: &[Term], ys: &[Term], base: &Substitution) -> Result<Substitution, UnifyError> {
    let mut s = base.clone();
    if xs.len() != ys.len() {
        return Err(UnifyError::Clash(Term::app("args", xs.to_vec()), Term::app("args", ys.to_vec())));
    }
    for (x, y) in xs.iter().zip(ys) {
        s.unify_into(x, y)?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_term;

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    #[test]
    fn binds_variables() {
        let s = unify(&t("f(W1,b)"), &t("f(a,W2)")).unwrap();
        assert_eq!(s.to_string(), "{W1=a,W2=b}");
    }

    #[test]
    fn chains_are_resolved() {
        let s = unify(&t("g(W1,W2)"), &t("g(W2,c)")).unwrap();
        assert_eq!(s.apply(&t("W1")), t("c"));
        assert_eq!(s.get(GlobalVar(1)), Some(&t("c")));
    }

    #[test]
    fn occurs_check() {
        assert!(matches!(unify(&t("W1"), &t("f(W1)")), Err(UnifyError::Occurs(..))));
    }

    #[test]
    fn arithmetic() {
        assert!(unify(&t("2+1"), &t("3")).unwrap().is_empty());
        assert!(matches!(unify(&t("W1+1"), &t("3")), Err(UnifyError::Clash(..))));
        let s = unify(&t("fact(W1+1,W2)"), &t("fact(W3+1,6)")).unwrap();
        assert_eq!(s.to_string(), "{W1=W3,W2=6}");
        let s = unify_args(&[t("W1"), t("W1*2")], &[t("4"), t("8")], &Substitution::new()).unwrap();
        assert_eq!(s.to_string(), "{W1=4}");
    }

    #[test]
    fn identical_terms() {
        assert!(unify(&t("f(W1,g(a,W2))"), &t("f(W1,g(a,W2))")).unwrap().is_empty());
    }

    #[test]
    fn compose_applies_in_order() {
        let s1: Substitution = [(GlobalVar(1), t("f(W2)"))].into_iter().collect();
        let s2: Substitution = [(GlobalVar(2), t("a"))].into_iter().collect();
        let c = s1.compose(&s2);
        assert_eq!(c.apply(&t("W1")), s2.apply(&s1.apply(&t("W1"))));
    }
}
