//! Proof scripts: parsing and the interpreter.

pub mod ast;
pub mod parser;
pub mod vm;

pub use ast::{Script, Stmt, StmtKind};
pub use parser::{parse_script, ScriptError};
pub use vm::{
    execute_strategy, initial_config, run_many, run_script, verify_strategy, ChannelError, InputChannel, LostReason,
    Outcome, Run, RunOptions, VecChannel, VmError,
};
