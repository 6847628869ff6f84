use std::fmt;

use crate::path::Path;
use crate::prover::ProofRule;
use crate::term::Symbol;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Script {
    pub name: Symbol,
    pub signature: Option<Signature>,
    pub body: Vec<Stmt>,
}

/// `algorithm Fact({/c,/d}, /query)`: the input services and the output.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Signature {
    pub inputs: Vec<Symbol>,
    pub output: Symbol,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Stmt {
    pub line: usize,
    pub kind: StmtKind,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum StmtKind {
    Read { path: Path, var: Symbol },
    Write { path: Path },
    Choose(Vec<RestrictionSpec>),
    Schoose(Vec<RestrictionSpec>),
    For { var: Symbol, from: Expr, to: Expr, body: Vec<Stmt> },
    If { cond: Cond, then: Vec<Stmt>, otherwise: Vec<Stmt> },
    Prove,
    Execute,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RestrictionSpec {
    pub path: Path,
    pub rules: Vec<ProofRule>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Expr {
    Num(u64),
    Var(Symbol),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CmpOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Cond {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
}

impl CmpOp {
    pub fn holds(self, a: u64, b: u64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

impl Expr {
    pub fn vars(&self, out: &mut Vec<Symbol>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => out.push(v.clone()),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(n) => write!(f, "{n}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Add(a, b) => write!(f, "{a}+{b}"),
            Expr::Sub(a, b) => write!(f, "{a}-({b})"),
        }
    }
}
