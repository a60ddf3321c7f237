use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use astral::absdomain::Ladder;
use astral::bench::{genbench, run_bench, BenchOptions, BenchSpec};
use astral::concrete::{enumerate_reachable, run_sampled, RunOutcome};
use astral::frontend::{compile, ValidProgram};
use astral::interpreter::{analyze_program, AnalysisConfig};
use astral::parallel::transport::WORKER_ENV;
use astral::parallel::{analyze_parallel, find_dispatch_points, worker, ParallelOptions, Strategy, Transport};
use astral::report::{emit_report, Report};

const EXIT_CLEAN: u8 = 0;
const EXIT_WARNINGS: u8 = 1;
const EXIT_ANALYSIS: u8 = 2;
const EXIT_USAGE: u8 = 3;

/// Sound interval analysis of mini-C programs, optionally in parallel.
#[derive(Parser, Debug)]
#[command(name = "astral", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    analyze: AnalyzeArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyze a program (the default when no subcommand is given).
    Analyze(AnalyzeArgs),
    /// Print a generated sequencer benchmark program.
    Genbench(GenArgs),
    /// Time the analysis of a benchmark at several worker counts.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Block,
    Shuffle,
    Greedy,
}

#[derive(Args, Debug, Clone)]
struct EngineArgs {
    /// Analyze dispatch points with this many workers.
    #[arg(long)]
    workers: Option<usize>,
    /// inproc, proc, or tcp=host:port,host:port,...
    #[arg(long, default_value = "inproc")]
    transport: String,
    #[arg(long, value_enum, default_value = "block")]
    strategy: StrategyArg,
    /// Seed of the shuffle strategy.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated widening thresholds; negated values are added.
    #[arg(long)]
    ladder: Option<String>,
    #[arg(long)]
    iter_bound: Option<u32>,
    /// Smallest branch count for automatically detected dispatch points.
    #[arg(long, default_value_t = 2)]
    min_branches: usize,
    /// Only use annotated dispatch points.
    #[arg(long)]
    no_auto_dispatch: bool,
    /// Write a JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct AnalyzeArgs {
    /// Program to analyze.
    input: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
    /// Print loop invariants and include them in the report.
    #[arg(long)]
    emit_invariants: bool,
    /// Also run the program once with inputs drawn from this seed.
    #[arg(long)]
    concrete_run: Option<u64>,
    /// Also enumerate all reachable states, up to this many configurations.
    #[arg(long)]
    enumerate: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct SpecArgs {
    #[arg(long, default_value_t = 8)]
    handlers: usize,
    #[arg(long, default_value_t = 10)]
    stmts: usize,
    #[arg(long, default_value_t = 100)]
    vars: usize,
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    depth: usize,
    #[arg(long, default_value_t = 4)]
    trips: u32,
    #[arg(long = "bench-seed", default_value_t = 0)]
    bench_seed: u64,
}

impl SpecArgs {
    fn spec(&self) -> BenchSpec {
        BenchSpec {
            handlers: self.handlers,
            stmts: self.stmts,
            vars: self.vars,
            fraction: self.fraction,
            depth: self.depth,
            trips: self.trips,
            seed: self.bench_seed,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct GenArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Write the program here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct BenchArgs {
    /// Benchmark an existing program instead of a generated one.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Worker counts to time, comma-separated.
    #[arg(long, default_value = "1,2")]
    worker_counts: String,
    #[arg(long, default_value_t = 3)]
    reps: usize,
}

struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Usage {
        Usage(e.to_string())
    }
}

fn config(e: &EngineArgs) -> Result<AnalysisConfig, Usage> {
    let mut c = AnalysisConfig::default();
    if let Some(l) = &e.ladder {
        let mut values = Vec::new();
        for part in l.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let v: f64 = part.parse().map_err(|_| Usage(format!("bad ladder value {part:?}")))?;
            values.push(v);
            values.push(-v);
        }
        c.ladder = Ladder::new(values);
    }
    if let Some(k) = e.iter_bound {
        if k == 0 {
            return Err(Usage("--iter-bound must be positive".into()));
        }
        c.iteration_bound = k;
    }
    Ok(c)
}

fn strategy(e: &EngineArgs) -> Result<Strategy, Usage> {
    match (e.strategy, e.seed) {
        (StrategyArg::Shuffle, Some(s)) => Ok(Strategy::Shuffle(s)),
        (StrategyArg::Shuffle, None) => Err(Usage("--strategy shuffle needs --seed".into())),
        (_, Some(_)) => Err(Usage("--seed only applies to --strategy shuffle".into())),
        (StrategyArg::Block, None) => Ok(Strategy::Block),
        (StrategyArg::Greedy, None) => Ok(Strategy::Greedy),
    }
}

fn transport(e: &EngineArgs) -> Result<Transport, Usage> {
    match e.transport.as_str() {
        "inproc" => Ok(Transport::Inproc),
        "proc" => Ok(Transport::Proc(std::env::current_exe()?)),
        t => match t.strip_prefix("tcp=") {
            Some(list) if !list.is_empty() => Ok(Transport::Tcp(list.split(',').map(str::to_string).collect())),
            _ => Err(Usage(format!("unknown transport {t:?}"))),
        },
    }
}

fn load(path: &PathBuf) -> Result<ValidProgram, Usage> {
    let src = std::fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    compile(&src).map_err(|e| Usage(format!("{}: {e}", path.display())))
}

enum Failure {
    Usage(String),
    Analysis(String),
}

impl From<Usage> for Failure {
    fn from(u: Usage) -> Failure {
        Failure::Usage(u.0)
    }
}

fn analyze(a: &AnalyzeArgs) -> Result<u8, Failure> {
    let path = a.input.as_ref().ok_or_else(|| Usage("no input program".into()))?;
    let p = load(path)?;
    let cfg = config(&a.engine)?;
    let strat = strategy(&a.engine)?;
    let trans = transport(&a.engine)?;

    if let Some(seed) = a.concrete_run {
        let run = run_sampled(&p, seed, 1_000_000);
        println!("concrete run (seed {seed}): {} steps, {}", run.steps, match run.outcome {
            RunOutcome::Terminated => "terminated",
            RunOutcome::BudgetExhausted => "step budget exhausted",
        });
        if let Some(s) = &run.final_state {
            println!("  final {s}");
        }
        for e in &run.errors {
            println!("  error {e}");
        }
    }
    if let Some(bound) = a.enumerate {
        match enumerate_reachable(&p, bound) {
            Ok(r) => {
                println!("enumeration: {} configurations, {} final states", r.configurations, r.finals.len());
                for s in &r.finals {
                    println!("  final {s}");
                }
                for e in &r.errors {
                    println!("  error {e}");
                }
            }
            Err(e) => println!("enumeration: {e}"),
        }
    }

    let name = path.display().to_string();
    let (result, report) = match a.engine.workers {
        None => {
            let r = analyze_program(&p, cfg).map_err(|e| Failure::Analysis(e.to_string()))?;
            let report = Report::new(&name).with_result(&p, &r, a.emit_invariants);
            (r, report)
        }
        Some(workers) => {
            if workers == 0 {
                return Err(Usage("--workers must be at least 1".into()).into());
            }
            let points: Vec<_> =
                find_dispatch_points(&p, a.engine.min_branches, !a.engine.no_auto_dispatch).iter().map(|d| d.stmt).collect();
            let opts = ParallelOptions { workers, transport: trans, strategy: strat, fault: None };
            let (r, stats) = analyze_parallel(&p, cfg, &opts, &points).map_err(|e| Failure::Analysis(e.to_string()))?;
            for f in &stats.failures {
                eprintln!("astral: {f}; its branches were analyzed locally");
            }
            let report = Report::new(&name).with_result(&p, &r, a.emit_invariants).with_exec(&stats);
            (r, report)
        }
    };

    for w in result.warnings.to_vec() {
        println!("warning: {w}");
    }
    if a.emit_invariants {
        for inv in &report.invariants {
            match &inv.cells {
                None => println!("invariant {}:{}: unreachable", inv.line, inv.col),
                Some(c) => {
                    let body: Vec<String> = c.iter().map(|(k, v)| format!("{k} in {v}")).collect();
                    println!("invariant {}:{}: {}", inv.line, inv.col, body.join(", "));
                }
            }
        }
    }
    println!("digest {}", report.digest);
    if let Some(path) = &a.engine.report {
        emit_report(&report, path).map_err(|e| Usage(e.to_string()))?;
    }
    Ok(if result.warnings.is_empty() { EXIT_CLEAN } else { EXIT_WARNINGS })
}

fn gen(g: &GenArgs) -> Result<u8, Failure> {
    let text = genbench(&g.spec.spec()).map_err(Usage::from)?;
    match &g.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Usage(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(EXIT_CLEAN)
}

fn bench(b: &BenchArgs) -> Result<u8, Failure> {
    let (p, spec, name) = match &b.input {
        Some(path) => (load(path)?, None, path.display().to_string()),
        None => {
            let spec = b.spec.spec();
            let text = genbench(&spec).map_err(Usage::from)?;
            (compile(&text).map_err(Usage::from)?, Some(spec), "<generated>".to_string())
        }
    };
    let mut counts = Vec::new();
    for part in b.worker_counts.split(',').map(str::trim) {
        let n: usize = part.parse().map_err(|_| Usage(format!("bad worker count {part:?}")))?;
        if n == 0 {
            return Err(Usage("worker counts must be positive".into()).into());
        }
        counts.push(n);
    }
    let opts = BenchOptions {
        worker_counts: counts,
        reps: b.reps,
        transport: transport(&b.engine)?,
        strategy: strategy(&b.engine)?,
        config: config(&b.engine)?,
        min_branches: b.engine.min_branches,
        fault: None,
    };
    let run = run_bench(&p, &opts).map_err(|e| Failure::Analysis(e.to_string()))?;
    let report = Report::new(&name).with_result(&p, &run.result, false).with_bench(spec, &run);
    print!("{}", report.to_table());
    if let Some(path) = &b.engine.report {
        emit_report(&report, path).map_err(|e| Usage(e.to_string()))?;
    }
    Ok(EXIT_CLEAN)
}

fn main() -> ExitCode {
    if let Ok(addr) = std::env::var(WORKER_ENV) {
        return match worker::listen(&addr) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("astral worker: {e}");
                ExitCode::from(EXIT_ANALYSIS)
            }
        };
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_CLEAN };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        None => analyze(&cli.analyze),
        Some(Command::Analyze(a)) => analyze(a),
        Some(Command::Genbench(g)) => gen(g),
        Some(Command::Bench(b)) => bench(b),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(m)) => {
            eprintln!("astral: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Analysis(m)) => {
            eprintln!("astral: {m}");
            ExitCode::from(EXIT_ANALYSIS)
        }
    }
}
