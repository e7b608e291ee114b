//! `mwconsensus` command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 divergence, 3 I/O error.

mod output;
mod report;
mod source;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mwconsensus::analysis::{self, RunSummary};
use mwconsensus::builtin::A12Variant;
use mwconsensus::sim::Engine;
use mwconsensus::{Baseline, Error, Execution, ScenarioFile};

use crate::source::{Overrides, Which};

const DEFAULT_OUT: &str = "runs";
const THREADS_VAR: &str = "MWC_THREADS";

#[derive(Parser)]
#[command(name = "mwconsensus", version, about = "Dynamic event-triggered consensus on matrix-weighted networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a scenario and report weights, balance and assumptions.
    Check(SourceArgs),
    /// Run a scenario and write its artifacts.
    Run {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// List the Laplacian spectrum (and the grounded one in leader-follower mode).
    Spectrum(SourceArgs),
    /// Run one of the built-in reference scenarios.
    ReplicatePaper {
        #[arg(value_enum)]
        which: Which,
        #[arg(long, value_enum, default_value_t = A12Arg::Gram)]
        a12: A12Arg,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a scenario over several seeds concurrently.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        /// Seeds as `a..b` (half-open) or a comma-separated list.
        #[arg(long, default_value = "0..4")]
        seeds: String,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Clone)]
struct SourceArgs {
    /// Scenario file, or `paper:leaderless` / `paper:lf`.
    scenario: String,
    /// How the built-in network's non-symmetric `A12` is made usable.
    #[arg(long, value_enum, default_value_t = A12Arg::Gram)]
    a12: A12Arg,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon.
    #[arg(long = "T", value_name = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; one directory per run is created beneath it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run even when the standing assumptions fail.
    #[arg(long)]
    force: bool,
    #[arg(long, value_enum)]
    baseline: Option<BaselineArg>,
    /// Write the resolved scenario to this path (`-` for stdout) and exit.
    #[arg(long, value_name = "PATH")]
    dump_config: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            dt: self.dt,
            horizon: self.horizon,
            seed: self.seed,
            baseline: self.baseline.map(Into::into),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum A12Arg {
    Gram,
    PsdProjection,
    Printed,
}

impl From<A12Arg> for A12Variant {
    fn from(a: A12Arg) -> Self {
        match a {
            A12Arg::Gram => A12Variant::Gram,
            A12Arg::PsdProjection => A12Variant::PsdProjection,
            A12Arg::Printed => A12Variant::Printed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BaselineArg {
    Dynamic,
    Static,
}

impl From<BaselineArg> for Baseline {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::Dynamic => Baseline::Dynamic,
            BaselineArg::Static => Baseline::Static,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Diverged(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Diverged(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn context(self, what: &str) -> Self {
        match self {
            Failure::Validation(m) => Failure::Validation(format!("{what}: {m}")),
            Failure::Diverged(m) => Failure::Diverged(format!("{what}: {m}")),
            Failure::Io(m) => Failure::Io(format!("{what}: {m}")),
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Diverged(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.to_string()),
            Error::Diverged { .. } => Failure::Diverged(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load(src: &str, a12: A12Arg, overrides: &Overrides) -> CliResult<ScenarioFile> {
    let mut file = source::load(src, a12.into()).map_err(|e| Failure::from(e).context(src))?;
    overrides.apply(&mut file);
    Ok(file)
}

fn dump(file: &ScenarioFile, path: &Path) -> CliResult {
    if path == Path::new("-") {
        let mut out = std::io::stdout().lock();
        writeln!(out, "{}", file.to_json())?;
    } else {
        file.save(path)?;
    }
    Ok(())
}

fn out_root(run: &RunArgs, file: &ScenarioFile) -> PathBuf {
    run.out
        .clone()
        .or_else(|| file.outputs.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

struct Finished {
    dir: PathBuf,
    summary: RunSummary,
    diverged: Option<String>,
}

/// Runs one resolved scenario file and writes its artifacts. A diverged
/// run still writes what it recorded.
fn execute(file: &ScenarioFile, root: &Path, force: bool) -> CliResult<Finished> {
    let scenario = file.to_scenario()?;
    let engine = if force {
        Engine::new_unchecked(&scenario)
    } else {
        Engine::new(&scenario)?
    };
    let start = Instant::now();
    let outcome = engine.with_execution(Execution::Sequential).run();
    let elapsed = start.elapsed();
    let (record, diverged) = match outcome {
        Ok(r) => (r, None),
        Err(Error::Diverged { time, reason, record }) => {
            (*record, Some(format!("simulation diverged at t = {time}: {reason}")))
        }
        Err(e) => return Err(e.into()),
    };
    let mut summary = analysis::event_stats(&scenario, &record);
    summary.wall_clock_seconds = Some(elapsed.as_secs_f64());
    let dir = output::run_dir(root, &scenario);
    output::write_all(
        &dir,
        &output::Artifacts {
            file,
            scenario: &scenario,
            record: &record,
            summary: &summary,
            elapsed,
        },
    )?;
    Ok(Finished { dir, summary, diverged })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "n/a".into())
}

fn print_run(f: &Finished) {
    let s = &f.summary;
    println!("run directory: {}", f.dir.display());
    println!("mode: {}, steps: {}, completed: {}", s.mode, s.steps, s.completed);
    println!("final error: {} (relative {})", fmt_opt(s.final_error), fmt_opt(s.final_relative_error));
    println!("final magnitude error: {}", fmt_opt(s.final_magnitude_error));
    println!("fitted decay rate: {}", fmt_opt(s.fitted_decay_rate));
    let counts: Vec<String> = s.event_counts.iter().map(ToString::to_string).collect();
    println!("events per agent: {}", counts.join(", "));
    for w in &s.warnings {
        println!("warning: {w}");
    }
}

fn cmd_run(src: &str, a12: A12Arg, run: &RunArgs) -> CliResult {
    let file = load(src, a12, &run.overrides())?;
    if let Some(path) = &run.dump_config {
        return dump(&file, path);
    }
    let f = execute(&file, &out_root(run, &file), run.force)?;
    print_run(&f);
    match f.diverged {
        Some(msg) => Err(Failure::Diverged(msg)),
        None => Ok(()),
    }
}

fn cmd_check(args: &SourceArgs) -> CliResult {
    let file = load(&args.scenario, args.a12, &Overrides::default())?;
    let published = args.scenario.starts_with("paper:");
    let r = report::check(&file, published)?;
    print!("{}", r.text);
    if r.ok {
        Ok(())
    } else {
        Err(Failure::Validation("scenario check failed".into()))
    }
}

fn cmd_spectrum(args: &SourceArgs) -> CliResult {
    let file = load(&args.scenario, args.a12, &Overrides::default())?;
    print!("{}", report::spectrum(&file)?);
    Ok(())
}

fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = || Failure::Validation(format!("invalid --seeds '{s}': expected a..b or a,b,c"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| bad()))
        .collect()
}

fn thread_cap() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::Validation(format!("{THREADS_VAR} must be a positive integer, got '{v}'"))),
        },
    }
}

#[cfg(feature = "parallel")]
fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> CliResult<R> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| Failure::Io(e.to_string()))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn in_pool<R: Send>(_threads: Option<usize>, f: impl FnOnce() -> R + Send) -> CliResult<R> {
    Ok(f())
}

fn cmd_sweep(args: &SourceArgs, seeds: &str, run: &RunArgs) -> CliResult {
    let seeds = parse_seeds(seeds)?;
    let base = load(&args.scenario, args.a12, &run.overrides())?;
    let files: Vec<ScenarioFile> = seeds
        .iter()
        .map(|&s| {
            let mut f = base.clone();
            f.sim.seed = Some(s);
            f
        })
        .collect();
    if let Some(path) = &run.dump_config {
        return dump(&files[0], path);
    }
    let root = out_root(run, &base);
    let threads = thread_cap()?;
    let results = in_pool(threads, || {
        Execution::Parallel.map(&files, |f| execute(f, &root, run.force))
    })?;

    std::fs::create_dir_all(&root)?;
    let mut table = String::from("seed,directory,completed,final_error,final_relative_error,total_events,max_lyapunov_increase\n");
    let mut worst: Option<Failure> = None;
    for (seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(f) => {
                let s = &f.summary;
                let total: usize = s.event_counts.iter().sum();
                let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                table.push_str(&format!(
                    "{seed},{},{},{},{},{total},{}\n",
                    f.dir.display(),
                    s.completed,
                    cell(s.final_error),
                    cell(s.final_relative_error),
                    cell(s.max_lyapunov_increase)
                ));
                println!(
                    "seed {seed}: final error {} ({} events) -> {}",
                    fmt_opt(s.final_error),
                    total,
                    f.dir.display()
                );
                if let Some(msg) = f.diverged {
                    worst = pick_worse(worst, Failure::Diverged(format!("seed {seed}: {msg}")));
                }
            }
            Err(e) => {
                println!("seed {seed}: {}", e.message());
                table.push_str(&format!("{seed},,false,,,,\n"));
                worst = pick_worse(worst, e);
            }
        }
    }
    std::fs::write(root.join("sweep.csv"), table)?;
    match worst {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn pick_worse(current: Option<Failure>, new: Failure) -> Option<Failure> {
    match current {
        Some(c) if c.code() >= new.code() => Some(c),
        _ => Some(new),
    }
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Check(args) => cmd_check(&args),
        Command::Spectrum(args) => cmd_spectrum(&args),
        Command::Run { source, run } => cmd_run(&source.scenario, source.a12, &run),
        Command::ReplicatePaper { which, a12, run } => cmd_run(which.source(), a12, &run),
        Command::Sweep { source, seeds, run } => cmd_sweep(&source, &seeds, &run),
    }
}

fn main() -> ExitCode {
    // Usage errors map to the validation code, not clap's default of 2.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
