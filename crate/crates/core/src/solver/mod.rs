//! Unification and closure of elementary configurations.

pub mod closure;
pub mod unify;

pub use closure::{close_elementary, is_elementary, Closure, ClosureError};
pub use unify::{unify, unify_with, Substitution, UnifyError};
