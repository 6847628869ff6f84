//! First-order terms over naturals, constants, bound variables, directory
//! parameters and global variables.

use std::fmt;
use std::sync::Arc;

/// An interned-by-value identifier. Cheap to clone and safe to send.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Symbol {
    fn from(name: &str) -> Self {
        Symbol::new(name)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

/// A placeholder introduced by a write move. Printed as `W<k>`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct GlobalVar(pub u32);

impl fmt::Display for GlobalVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W{}", self.0)
    }
}

pub const SUCC: &str = "s";
pub const PLUS: &str = "+";
pub const TIMES: &str = "*";

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Term {
    Num(u64),
    Const(Symbol),
    /// A variable bound by an enclosing choice quantifier.
    Bound(Symbol),
    /// An upper-case parameter of a directory clause.
    Param(Symbol),
    Global(GlobalVar),
    App(Symbol, Vec<Term>),
}

impl Term {
    pub fn num(n: u64) -> Term {
        Term::Num(n)
    }

    pub fn constant(name: &str) -> Term {
        Term::Const(Symbol::new(name))
    }

    pub fn bound(name: &str) -> Term {
        Term::Bound(Symbol::new(name))
    }

    pub fn global(k: u32) -> Term {
        Term::Global(GlobalVar(k))
    }

    pub fn app(name: &str, args: Vec<Term>) -> Term {
        Term::App(Symbol::new(name), args)
    }

    pub fn succ(t: Term) -> Term {
        Term::app(SUCC, vec![t])
    }

    pub fn plus(a: Term, b: Term) -> Term {
        Term::app(PLUS, vec![a, b])
    }

    pub fn times(a: Term, b: Term) -> Term {
        Term::app(TIMES, vec![a, b])
    }

    pub fn is_arith(&self) -> bool {
        matches!(self, Term::App(f, _) if is_arith_symbol(f.as_str()))
    }

    /// True when the term contains no variables of any kind.
    pub fn is_ground(&self) -> bool {
        match self {
            Term::Num(_) | Term::Const(_) => true,
            Term::Bound(_) | Term::Param(_) | Term::Global(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn occurs_global(&self, v: GlobalVar) -> bool {
        match self {
            Term::Global(w) => *w == v,
            Term::App(_, args) => args.iter().any(|a| a.occurs_global(v)),
            _ => false,
        }
    }

    pub fn occurs_bound(&self, name: &Symbol) -> bool {
        match self {
            Term::Bound(n) => n == name,
            Term::App(_, args) => args.iter().any(|a| a.occurs_bound(name)),
            _ => false,
        }
    }

    /// True when `name` occurs strictly below an arithmetic function symbol.
    pub fn occurs_bound_under_arith(&self, name: &Symbol) -> bool {
        match self {
            Term::App(f, args) if is_arith_symbol(f.as_str()) => {
                args.iter().any(|a| a.occurs_bound(name))
            }
            Term::App(_, args) => args.iter().any(|a| a.occurs_bound_under_arith(name)),
            _ => false,
        }
    }

    pub fn globals(&self, out: &mut Vec<GlobalVar>) {
        match self {
            Term::Global(v) => {
                if !out.contains(v) {
                    out.push(*v)
                }
            }
            Term::App(_, args) => args.iter().for_each(|a| a.globals(out)),
            _ => {}
        }
    }

    /// Replaces every occurrence of the bound variable `name` by `by`.
    pub fn replace_bound(&self, name: &Symbol, by: &Term) -> Term {
        self.map_leaves(&mut |t| match t {
            Term::Bound(n) if n == name => Some(by.clone()),
            _ => None,
        })
    }

    pub fn replace_param(&self, name: &Symbol, by: &Term) -> Term {
        self.map_leaves(&mut |t| match t {
            Term::Param(n) if n == name => Some(by.clone()),
            _ => None,
        })
    }

    pub fn replace_const(&self, name: &Symbol, by: &Term) -> Term {
        self.map_leaves(&mut |t| match t {
            Term::Const(n) if n == name => Some(by.clone()),
            _ => None,
        })
    }

    pub(crate) fn map_leaves(&self, f: &mut impl FnMut(&Term) -> Option<Term>) -> Term {
        if let Some(t) = f(self) {
            return t;
        }
        match self {
            Term::App(name, args) => {
                Term::App(name.clone(), args.iter().map(|a| a.map_leaves(f)).collect())
            }
            other => other.clone(),
        }
    }

    /// Reduces every ground arithmetic subterm (`s`, `+`, `*` over numerals)
    /// to a numeral. Non-ground subterms are left as they are; so is any
    /// operation that would overflow `u64`.
    pub fn eval_ground(&self) -> Term {
        match self {
            Term::App(f, args) => {
                let args: Vec<Term> = args.iter().map(Term::eval_ground).collect();
                let value = match (f.as_str(), args.as_slice()) {
                    (SUCC, [Term::Num(a)]) => a.checked_add(1),
                    (PLUS, [Term::Num(a), Term::Num(b)]) => a.checked_add(*b),
                    (TIMES, [Term::Num(a), Term::Num(b)]) => a.checked_mul(*b),
                    _ => None,
                };
                match value {
                    Some(n) => Term::Num(n),
                    None => Term::App(f.clone(), args),
                }
            }
            other => other.clone(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Term::App(f, args) if args.len() == 2 && f.as_str() == PLUS => 1,
            Term::App(f, args) if args.len() == 2 && f.as_str() == TIMES => 2,
            _ => 3,
        }
    }
}

pub fn is_arith_symbol(name: &str) -> bool {
    matches!(name, SUCC | PLUS | TIMES)
}

pub fn eval_ground(t: &Term) -> Term {
    t.eval_ground()
}

fn write_operand(f: &mut fmt::Formatter<'_>, t: &Term, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({t})")
    } else {
        write!(f, "{t}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Num(n) => write!(f, "{n}"),
            Term::Const(s) | Term::Bound(s) | Term::Param(s) => write!(f, "{s}"),
            Term::Global(v) => write!(f, "{v}"),
            Term::App(op, args) if args.len() == 2 && is_infix(op) => {
                // left-associative: the right operand needs parens at equal precedence
                let p = self.precedence();
                write_operand(f, &args[0], args[0].precedence() < p)?;
                write!(f, "{op}")?;
                write_operand(f, &args[1], args[1].precedence() <= p)
            }
            Term::App(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn is_infix(op: &Symbol) -> bool {
    matches!(op.as_str(), PLUS | TIMES)
}
