//! Computability-logic proof scripts: formulas and terms, a directory store
//! of named services, the game configuration, a unification-based closure
//! solver, a bounded strategy prover and the script interpreter.

pub mod config;
pub mod directory;
pub mod formula;
pub mod graph;
pub mod kb;
pub mod path;
pub mod solver;
pub mod syntax;
pub mod term;
pub mod par;
pub mod prover;
pub mod script;

/// Runs `f`, first moving to a fresh stack segment when little of the
/// current one is left. Used by the recursions whose depth follows the
/// input, such as directory expansion.
pub(crate) fn deep<R>(f: impl FnOnce() -> R) -> R {
    stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, f)
}
