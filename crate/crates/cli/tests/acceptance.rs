//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use coli::config::Configuration;
use coli::kb::parse_kb;
use coli::par::Parallelism;
use coli::prover::{prove, Bounds, Restrictions, Strategy};
use coli::script::{execute_strategy, initial_config, verify_strategy, Outcome, VecChannel};
use coli::solver::{close_elementary, unify, ClosureError, UnifyError};
use coli::syntax::parse_formula;
use coli::term::Term;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn samples() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../samples")
}

fn coli(args: &[&str]) -> (Output, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_coli")).current_dir(samples()).args(args).output().unwrap();
    (out, start.elapsed())
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn factorial_service() -> Check {
    let (o, t) = coli(&["run", "--kb", "fact.kb", "--script", "fact.coli", "--inputs", "3"]);
    ensure(o.status.code() == Some(0), || format!("exit {:?}", o.status.code()))?;
    ensure(text(&o) == "RESULT fact(3,6)\n", || format!("stdout {:?}", text(&o)))?;
    ensure(t < Duration::from_millis(100), || format!("took {t:?}"))?;
    Ok(format!("RESULT fact(3,6) in {t:?}"))
}

fn factorial_generalization() -> Check {
    let mut total = Duration::ZERO;
    for n in 0..=8u64 {
        let (o, t) = coli(&["run", "--kb", "fact.kb", "--script", "fact.coli", "--inputs", &n.to_string()]);
        total += t;
        let want = format!("RESULT fact({n},{})\n", oracles::factorial(n));
        ensure(o.status.code() == Some(0) && text(&o) == want, || format!("n={n}: {:?}", text(&o)))?;
    }
    ensure(total < Duration::from_secs(1), || format!("took {total:?}"))?;
    Ok(format!("n = 0..8 in {total:?}"))
}

fn result_and_bindings(script: &str, n: u64) -> Result<(String, String), String> {
    let (o, _) = coli(&["run", "--kb", "fact.kb", "--script", script, "--inputs", &n.to_string(), "--trace"]);
    let out = text(&o);
    let find = |prefix: &str| out.lines().find(|l| l.starts_with(prefix)).map(str::to_string);
    match (find("RESULT "), find("CLOSE ")) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(format!("{script} n={n}: {out:?}")),
    }
}

fn script_equivalence() -> Check {
    for n in 0..=6 {
        let full = result_and_bindings("fact.coli", n)?;
        let short = result_and_bindings("fact_short.coli", n)?;
        ensure(full == short, || format!("n={n}: {full:?} vs {short:?}"))?;
    }
    Ok("n = 0..6 identical RESULT and CLOSE lines".into())
}

fn restriction_semantics() -> Check {
    let (o, t) = coli(&["run", "--kb", "q.kb", "--script", "q_restricted.coli"]);
    ensure(o.status.code() == Some(1), || format!("restricted exit {:?}", o.status.code()))?;
    ensure(text(&o).contains("reason=exhausted"), || format!("restricted stdout {:?}", text(&o)))?;
    ensure(t < Duration::from_millis(100), || format!("restricted took {t:?}"))?;
    let (o, _) = coli(&["run", "--kb", "q.kb", "--script", "q_prove.coli", "--max-replicas", "32", "--trace"]);
    ensure(o.status.code() == Some(3), || format!("unrestricted exit {:?}", o.status.code()))?;
    let replicates = text(&o).lines().filter(|l| l.contains("MOVE replicate ")).count();
    ensure(replicates >= 32, || format!("{replicates} replicate moves"))?;
    Ok(format!("exhausted in {t:?}; bounded with {replicates} replicate moves"))
}

fn directory_expansion() -> Check {
    let (o, _) = coli(&["expand", "--kb", "dirs.kb", "/m(s(s(s(0))))"]);
    ensure(text(&o) == "p /\\ (p /\\ (p /\\ q))\n", || format!("expand {:?}", text(&o)))?;
    let atoms = |name: &str| -> Vec<String> {
        let (o, _) = coli(&["expand", "--kb", "dirs.kb", name, "--graph"]);
        text(&o).lines().filter(|l| l.contains("atom p(a)")).map(str::to_string).collect()
    };
    let n = atoms("/n");
    ensure(n.len() == 2 && n.iter().all(|l| l.ends_with("indeg=1")), || format!("/n {n:?}"))?;
    let o = atoms("/o");
    ensure(o.len() == 1 && o[0].ends_with("indeg=2"), || format!("/o {o:?}"))?;
    let kb = parse_kb(&std::fs::read_to_string(samples().join("dirs.kb")).unwrap()).unwrap();
    for k in 0..=16 {
        let numeral = (0..k).fold("0".to_string(), |t, _| format!("s({t})"));
        let g = kb.table.expand_formula(&parse_formula(&format!("!/m({numeral})")).unwrap(), 1024).map_err(|e| e.to_string())?;
        ensure(g.depth() == k, || format!("k={k}: depth {}", g.depth()))?;
    }
    Ok("worked example, copy/shared graphs, depth k for k = 0..16".into())
}

fn unification_suite() -> Check {
    use oracles::robinson::{mgu, needs_occurs_check, perturb, random_term, to_term};
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(6);
    let (mut ok, mut failed, mut occurs) = (0, 0, 0);
    for _ in 0..1000 {
        let a = random_term(&mut rng, 3);
        let b = if rng.gen_bool(0.6) { perturb(&mut rng, &a) } else { random_term(&mut rng, 3) };
        let (ta, tb) = (to_term(&a), to_term(&b));
        match (unify(&ta, &tb), mgu(&a, &b)) {
            (Ok(s), Some(_)) => {
                ensure(s.apply(&ta) == s.apply(&tb), || format!("{s} does not unify {ta} and {tb}"))?;
                ok += 1;
            }
            (Err(e), None) => {
                if needs_occurs_check(&a, &b) {
                    ensure(matches!(e, UnifyError::Occurs(..)), || format!("{ta} ~ {tb}: {e}"))?;
                    occurs += 1;
                }
                failed += 1;
            }
            (ours, _) => return Err(format!("{ta} ~ {tb}: library {ours:?} disagrees with the oracle")),
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(5), || format!("took {t:?}"))?;
    Ok(format!("{ok} unified, {failed} failed ({occurs} by occurs check) in {t:?}"))
}

fn closure_oracle() -> Check {
    use oracles::closure::{derivable_bindings, random_elementary};
    let mut rng = StdRng::seed_from_u64(7);
    let (mut won, mut lost) = (0, 0);
    for _ in 0..1500 {
        let config = random_elementary(&mut rng);
        let expected = derivable_bindings(&config);
        let mut globals = Vec::new();
        for id in config.output().graph.reachable() {
            if let coli::graph::Node::Atom(_, args) = config.output().graph.node(id) {
                for a in args {
                    a.globals(&mut globals);
                }
            }
        }
        globals.sort_unstable();
        globals.dedup();
        match close_elementary(&config) {
            Ok(c) => {
                let got: Vec<Term> = globals.iter().map(|v| c.subst.apply(&Term::Global(*v))).collect();
                ensure(expected.contains(&got), || format!("{}: {got:?} not derivable", config.fingerprint()))?;
                won += 1;
            }
            Err(ClosureError::NoDerivation) => {
                ensure(expected.is_empty(), || format!("{}: oracle derives {expected:?}", config.fingerprint()))?;
                lost += 1;
            }
            Err(e) => return Err(format!("{}: {e}", config.fingerprint())),
        }
    }
    Ok(format!("{} configurations ({won} closed, {lost} without derivation)", won + lost))
}

const PROVABLE: [&str; 5] = [
    "/i = $@z.p(z,z)\n/o = @x.#y.p(x,y)\nquery /o\n",
    "/i = p(a)\n/o = #x.p(x)\nquery /o\n",
    "/i = q(b)\n/r = $@x.(q(x) -> p(x))\n/o = #y.p(y)\nquery /o\n",
    "/f = $@x.s(x,x+1)\n/o = @x.#y.s(x,y)\nquery /o\n",
    "/e = $@x.e(x,x)\n/o = @x.@y.(#z.e(x,z) /\\ #w.e(y,w))\nquery /o\n",
];

fn env_depth(s: &Strategy) -> usize {
    match s {
        Strategy::Close => 0,
        Strategy::Step { next, .. } => env_depth(next),
        Strategy::EnvBranch { branches, .. } => 1 + branches.iter().map(|(_, b)| env_depth(b)).max().unwrap_or(0),
    }
}

fn soundness_and_replay() -> Check {
    let mut runs = 0;
    for kb in PROVABLE {
        let config = initial_config(&parse_kb(kb).unwrap(), None, None).unwrap();
        let proof = prove(&config, &Restrictions::new(), &Bounds::default()).map_err(|f| format!("{kb:?}: {f:?}"))?;
        let inputs: Vec<Vec<u64>> = (0..env_depth(&proof.strategy)).fold(vec![vec![]], |acc, _| {
            acc.into_iter().flat_map(|p| (0..=6).map(move |v| [p.clone(), vec![v]].concat())).collect()
        });
        for (values, outcome) in inputs.iter().zip(verify_strategy(&proof.strategy, &config, &inputs, Parallelism::default())) {
            ensure(matches!(outcome, Ok(Outcome::Won)), || format!("{kb:?} inputs {values:?}: {outcome:?}"))?;
            let (_, end, _) = execute_strategy(&proof.strategy, &config, &mut VecChannel::new(values.clone()))
                .map_err(|e| e.to_string())?;
            let replayed = Configuration::replay(&config, end.trace()).map_err(|e| e.to_string())?;
            ensure(replayed == end, || format!("{kb:?} inputs {values:?}: replay differs"))?;
            runs += 1;
        }
    }
    for (script, n) in [("fact.coli", "5"), ("fact_short.coli", "5")] {
        let args = ["run", "--kb", "fact.kb", "--script", script, "--inputs", n, "--trace"];
        let (a, b) = (coli(&args).0, coli(&args).0);
        ensure(a.stdout == b.stdout, || format!("{script}: traces differ between runs"))?;
    }
    Ok(format!("{runs} strategy executions won and replayed; traces byte-identical"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("factorial service", factorial_service),
        ("factorial generalization", factorial_generalization),
        ("script equivalence", script_equivalence),
        ("restriction semantics", restriction_semantics),
        ("directory expansion", directory_expansion),
        ("unification suite", unification_suite),
        ("closure oracle equivalence", closure_oracle),
        ("strategy soundness and replay", soundness_and_replay),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
