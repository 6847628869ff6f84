use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use coli::kb::parse_kb;
use coli::par::Parallelism;
use coli::prover::{prove_with, Bounds, Restrictions};
use coli::script::{initial_config, parse_script, run_many, RunOptions};

const FACT_KB: &str = "/c = fact(0,1)\n/d = $@x.@y.(fact(x,y) -> fact(x+1,x*y+y))\n/query = @y.#z.fact(y,z)\nquery /query\n";
const SHORT: &str = "algorithm Fact({/c,/d}, /query) { /query.read(n); prove; execute; }";
const Q_KB: &str = "/q = $#x.p(x) \\/ q(a)\nquery /q\n";

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn prove_bounded(c: &mut Criterion) {
    let config = initial_config(&parse_kb(Q_KB).unwrap(), None, None).unwrap();
    let bounds = Bounds { max_replicas: 8, max_steps: 1_000, ..Bounds::default() };
    let mut group = c.benchmark_group("prove_bounded_q");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| b.iter(|| prove_with(&config, &Restrictions::new(), &bounds, mode).unwrap_err()));
    }
    group.finish();
}

fn factorial_sweep(c: &mut Criterion) {
    let kb = parse_kb(FACT_KB).unwrap();
    let script = parse_script(SHORT).unwrap();
    let config = initial_config(&kb, Some(&script), None).unwrap();
    let options = RunOptions::default();
    let mut group = c.benchmark_group("factorial_sweep");
    group.sample_size(10);
    for width in [4u64, 8] {
        let inputs: Vec<Vec<u64>> = (0..width).map(|n| vec![n]).collect();
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, width), &inputs, |b, inputs| {
                b.iter(|| run_many(&script, &config, inputs, &options, mode))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, prove_bounded, factorial_sweep);
criterion_main!(benches);
