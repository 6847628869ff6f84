use std::fs;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use coli::config::{Configuration, InitError};
use coli::directory::{ExpandError, DEFAULT_DEPTH_LIMIT};
use coli::kb::{parse_kb, Kb};
use coli::par::Parallelism;
use coli::path::Location;
use coli::prover::{prove_with, Bounds, FailureKind, ProveFailure, Restrictions, DEFAULT_MAX_DEPTH, DEFAULT_MAX_REPLICAS};
use coli::script::{
    execute_strategy, initial_config, parse_script, run_script, ChannelError, InputChannel, LostReason, Outcome,
    RunOptions, VecChannel, VmError,
};
use coli::solver::Closure;
use coli::syntax::parse_formula;
use coli::term::Symbol;

const WON: u8 = 0;
const LOST: u8 = 1;
const FAILED: u8 = 2;
const BOUNDED: u8 = 3;

#[derive(Parser)]
#[command(name = "coli", version, about = "Run computability-logic proof scripts against a knowledge base")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a proof script.
    Run(Session),
    /// Extract a strategy for the query and execute it.
    Prove(Session),
    /// Expand a directory reference.
    Expand {
        #[arg(long)]
        kb: PathBuf,
        /// Directory reference, e.g. "/m(s(s(0)))".
        reference: String,
        /// Print the node graph with in-degrees instead of the formula.
        #[arg(long)]
        graph: bool,
    },
    /// Parse a knowledge base and optionally a script.
    Check {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        script: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Session {
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    script: Option<PathBuf>,
    /// Output service, e.g. /query. Defaults to the script signature or the
    /// knowledge base's query line.
    #[arg(long)]
    query: Option<String>,
    /// Environment choices, consumed in order.
    #[arg(long, value_delimiter = ',', conflicts_with = "interactive")]
    inputs: Vec<u64>,
    /// Prompt for environment choices on standard input.
    #[arg(long)]
    interactive: bool,
    /// Print every move.
    #[arg(long)]
    trace: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH as u64, value_parser = clap::value_parser!(u64).range(1..))]
    max_depth: u64,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    max_replicas: Option<u32>,
}

struct Prompt {
    attempts: usize,
}

impl InputChannel for Prompt {
    fn next_value(&mut self, at: &Location, var: &Symbol) -> Result<u64, ChannelError> {
        let stdin = io::stdin();
        for _ in 0..self.attempts {
            print!("ENV move at {at} (@{var}): ");
            io::stdout().flush().map_err(|e| ChannelError::Invalid(e.to_string()))?;
            let mut line = String::new();
            let n = stdin.lock().read_line(&mut line).map_err(|e| ChannelError::Invalid(e.to_string()))?;
            if n == 0 {
                println!();
                return Err(ChannelError::Exhausted);
            }
            match line.trim().parse::<u64>() {
                Ok(v) => return Ok(v),
                Err(_) => eprintln!("not a natural number: {}", line.trim()),
            }
        }
        Err(ChannelError::Invalid(format!("no valid value after {} attempts", self.attempts)))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("ERROR {e:#}");
            let bounded = e.downcast_ref::<VmError>().is_some_and(VmError::is_bound)
                || matches!(e.downcast_ref::<ExpandError>(), Some(ExpandError::DepthExceeded { .. }))
                || matches!(e.downcast_ref::<InitError>(), Some(InitError::Expand(ExpandError::DepthExceeded { .. })));
            ExitCode::from(if bounded { BOUNDED } else { FAILED })
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Run(s) => cmd_run(&s),
        Command::Prove(s) => cmd_prove(&s),
        Command::Expand { kb, reference, graph } => cmd_expand(&load_kb(&kb)?, &reference, graph),
        Command::Check { kb, script } => {
            let kb = load_kb(&kb)?;
            println!("OK kb directories={}", kb.order.len());
            if let Some(path) = script {
                let s = parse_script(&read(&path)?).with_context(|| format!("{}", path.display()))?;
                println!("OK script {} statements={}", s.name, s.body.len());
            }
            Ok(WON)
        }
    }
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_kb(path: &PathBuf) -> Result<Kb> {
    parse_kb(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn query_name(q: &Option<String>) -> Option<Symbol> {
    q.as_ref().map(|q| Symbol::new(q.trim_start_matches('/')))
}

impl Session {
    fn options(&self) -> RunOptions {
        let bounds = Bounds {
            max_depth: usize::try_from(self.max_depth).unwrap_or(usize::MAX),
            max_replicas: self.max_replicas.unwrap_or(DEFAULT_MAX_REPLICAS),
            ..Bounds::default()
        };
        RunOptions { bounds, mode: Parallelism::default() }
    }

    fn limit(&self, config: Configuration) -> Configuration {
        match self.max_replicas {
            Some(n) => config.with_replica_limit(n),
            None => config,
        }
    }

    fn channel(&self) -> Box<dyn InputChannel> {
        if self.interactive {
            Box::new(Prompt { attempts: 3 })
        } else {
            Box::new(VecChannel::new(self.inputs.iter().copied()))
        }
    }
}

fn print_moves(config: &Configuration, from: usize) {
    for m in &config.trace()[from..] {
        println!("{m}");
    }
}

fn print_win(config: &Configuration, closure: &Closure, trace: bool) {
    if trace {
        println!("CLOSE subst={}", closure.subst);
    }
    println!("RESULT {}", config.output_formula(&|t| closure.subst.apply(t)));
}

fn print_prove_failure(f: &ProveFailure, trace: bool) -> u8 {
    if trace {
        for m in &f.deepest {
            println!("PROVE run {m}");
        }
    }
    println!("PROVE fail reason={} steps={}", f.kind, f.steps);
    match f.kind {
        FailureKind::Exhausted => LOST,
        FailureKind::Bounded => BOUNDED,
    }
}

fn lost(reason: &LostReason) -> u8 {
    println!("LOST reason={reason}");
    if reason.is_bounded() {
        BOUNDED
    } else {
        LOST
    }
}

fn cmd_run(s: &Session) -> Result<u8> {
    let kb = load_kb(&s.kb)?;
    let path = s.script.as_ref().ok_or_else(|| anyhow!("run needs --script"))?;
    let script = parse_script(&read(path)?).with_context(|| format!("{}", path.display()))?;
    let config = s.limit(initial_config(&kb, Some(&script), query_name(&s.query).as_ref())?);
    let mut channel = s.channel();
    let run = run_script(&script, config, channel.as_mut(), &s.options())?;
    if s.trace {
        print_moves(&run.config, 0);
    }
    if let Some(f) = &run.prove_failure {
        return Ok(print_prove_failure(f, s.trace));
    }
    match (&run.outcome, &run.closure) {
        (Outcome::Won, Some(c)) => {
            print_win(&run.config, c, s.trace);
            Ok(WON)
        }
        (Outcome::Lost(reason), _) => Ok(lost(reason)),
        (Outcome::Won, None) => unreachable!("a won session always carries its closure"),
    }
}

fn cmd_prove(s: &Session) -> Result<u8> {
    let kb = load_kb(&s.kb)?;
    let config = s.limit(initial_config(&kb, None, query_name(&s.query).as_ref())?);
    let options = s.options();
    let proof = match prove_with(&config, &Restrictions::new(), &options.bounds, options.mode) {
        Ok(p) => p,
        Err(f) => return Ok(print_prove_failure(&f, s.trace)),
    };
    println!("PROVE ok steps={}", proof.steps);
    if s.trace {
        for line in proof.strategy.to_string().lines() {
            println!("STRATEGY {line}");
        }
    }
    let mut channel = s.channel();
    let (outcome, end, closure) = execute_strategy(&proof.strategy, &config, channel.as_mut())?;
    if s.trace {
        print_moves(&end, 0);
    }
    match (outcome, closure) {
        (Outcome::Won, Some(c)) => {
            print_win(&end, &c, s.trace);
            Ok(WON)
        }
        (Outcome::Lost(reason), _) => Ok(lost(&reason)),
        (Outcome::Won, None) => unreachable!("a won session always carries its closure"),
    }
}

fn cmd_expand(kb: &Kb, reference: &str, graph: bool) -> Result<u8> {
    let f = parse_formula(reference).with_context(|| format!("reference `{reference}`"))?;
    let g = kb.table.expand_formula(&f, DEFAULT_DEPTH_LIMIT)?;
    if graph {
        for line in g.listing() {
            println!("{line}");
        }
    } else {
        println!("{}", g.to_formula());
    }
    Ok(WON)
}
