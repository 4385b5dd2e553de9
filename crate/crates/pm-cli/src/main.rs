//! `pm`: run particle-method instances on either interpreter, verify
//! that both name the same states, and tabulate predicted speedups.
//!
//! Exit codes: 0 on success, 1 when a run or a verification fails,
//! 2 for invalid input.

mod format;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use pm_core::complexity::{self, ComplexityParams, SpeedupModel, Sweep};
use pm_core::methods;
use pm_core::seq;
use pm_core::verify::{self, Tolerance};
use pm_core::{parallel_run, ExecMode, Instance, ParallelOptions, RunOptions, State};

#[derive(Parser)]
#[command(name = "pm", version, about = "Particle methods on a sequential and a cell-list interpreter")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an instance to its stop condition and report the final state.
    Run(RunArgs),
    /// Replay an instance on both interpreters and compare, or run the
    /// built-in law suite.
    Verify(VerifyArgs),
    /// Print predicted speedups over a sweep as CSV.
    Speedup(SpeedupArgs),
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Engine {
    /// Sequential reference interpreter.
    Seq,
    /// Distributed cell-list runtime over simulated processes.
    Par,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    /// Deterministic process-by-process schedule.
    Reference,
    /// Thread-pool schedule; bit-identical to reference.
    Concurrent,
}

impl Mode {
    fn exec(self) -> ExecMode {
        match self {
            Mode::Reference => ExecMode::Reference,
            Mode::Concurrent => ExecMode::Concurrent,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Mode::Reference => "reference",
            Mode::Concurrent => "concurrent",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteKind {
    /// Index round trips, scheduling laws and pipeline invariants.
    Lemmas,
}

#[derive(Args)]
struct RunArgs {
    /// Instance file (JSON).
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Engine::Seq)]
    engine: Engine,
    /// Process schedule (par engine only).
    #[arg(long, value_enum, default_value_t = Mode::Reference)]
    mode: Mode,
    /// Write the final state as a reloadable instance file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write every visited state (seq engine only).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Where to write the communication log CSV (par engine only).
    /// With --out the log lands next to the dump by default.
    #[arg(long)]
    audit: Option<PathBuf>,
    /// Write the final per-process storage view (par engine only).
    #[arg(long)]
    procs_view: Option<PathBuf>,
    /// Cap on transitions before the run counts as non-terminating.
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: u64,
    /// Refuse grids with more cells than this (par engine only).
    #[arg(long, default_value_t = 1_000_000)]
    max_cells: u64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Instance file (JSON); required unless --suite is given.
    instance: Option<PathBuf>,
    /// Run a built-in check suite instead of an instance.
    #[arg(long, value_enum)]
    suite: Option<SuiteKind>,
    /// Process schedule for the distributed replay.
    #[arg(long, value_enum, default_value_t = Mode::Reference)]
    mode: Mode,
    /// Cap on transitions for the paired runs.
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: u64,
    /// Largest grid considered: a cell cap for instance replays, the
    /// family bound for the suite. Defaults to 729 with --suite and to
    /// 1000000 otherwise.
    #[arg(long)]
    max_cells: Option<u64>,
    /// Seed for the suite's randomized checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SpeedupArgs {
    /// Prediction model: cell, amdahl or gustafson.
    #[arg(long)]
    model: String,
    /// Inclusive sweep start:end[:step]; particle bound for the cell
    /// model, processor count otherwise.
    #[arg(long)]
    sweep: String,
    /// Grid dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Number of grid cells.
    #[arg(long)]
    n_cell: Option<u64>,
    /// Largest particle count of any cell.
    #[arg(long)]
    n_max: Option<u64>,
    /// Total particle bound.
    #[arg(long)]
    np_max: Option<u64>,
    /// Transitions priced.
    #[arg(long)]
    steps: Option<u64>,
    /// Cost of one interaction.
    #[arg(long)]
    tau_i: Option<f64>,
    /// Cost of one particle evolution.
    #[arg(long)]
    tau_e: Option<f64>,
    /// Cost of the stop condition.
    #[arg(long)]
    tau_f: Option<f64>,
    /// Cost of one global-variable evolution.
    #[arg(long)]
    tau_edot: Option<f64>,
    /// Cost of one neighborhood check, per axis.
    #[arg(long)]
    c_u: Option<f64>,
    /// Cost of the position-to-compartment map, per axis.
    #[arg(long)]
    c_alpha: Option<f64>,
    /// Cost of resolving a neighbor process, per axis.
    #[arg(long)]
    c_beta: Option<f64>,
    /// Cost of resolving an active process, per axis.
    #[arg(long)]
    c_gamma: Option<f64>,
    /// Cost of the mirror-compartment lookup, per axis.
    #[arg(long)]
    c_c: Option<f64>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A terminal failure with its process exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn run(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    fn from_core(e: pm_core::Error) -> Self {
        Failure {
            code: if e.is_invalid_input() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl From<format::LoadError> for Failure {
    fn from(e: format::LoadError) -> Self {
        Failure::input(e.to_string())
    }
}

fn read_instance(path: &Path) -> Result<Instance, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(format::load_instance(&text)?)
}

fn write_output(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::run(format!("writing {}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn digest_of(dump: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(dump.as_bytes());
    format!("sha256:{:x}", hasher.finalize())
}

#[derive(Serialize)]
struct RunReport<'a> {
    engine: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<&'a str>,
    method: String,
    t: u64,
    t_max: u64,
    states_visited: u64,
    transitions: u64,
    particles: usize,
    digest: String,
    elapsed_ms: f64,
    ms_per_transition: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    audit: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    procs_view: Option<String>,
}

/// Paths of the side files a run produced.
#[derive(Default)]
struct Artifacts {
    out: Option<PathBuf>,
    trace: Option<PathBuf>,
    audit: Option<PathBuf>,
    procs_view: Option<PathBuf>,
}

fn shown(path: &Option<PathBuf>) -> Option<String> {
    path.as_ref().map(|p| p.display().to_string())
}

fn report_run(
    instance: &Instance,
    engine: &str,
    mode: Option<&str>,
    state: &State,
    states_visited: u64,
    elapsed_ms: f64,
    artifacts: &Artifacts,
) -> Result<(), Failure> {
    let dump = format::dump_state(instance, state);
    if let Some(path) = &artifacts.out {
        write_output(path, &dump)?;
    }
    let transitions = states_visited.saturating_sub(1);
    print_json(&RunReport {
        engine,
        mode,
        method: instance.method.name.to_string(),
        t: state.global.t,
        t_max: state.global.t_max,
        states_visited,
        transitions,
        particles: state.particles.len(),
        digest: digest_of(&dump),
        elapsed_ms,
        ms_per_transition: if transitions == 0 { 0.0 } else { elapsed_ms / transitions as f64 },
        out: shown(&artifacts.out),
        trace: shown(&artifacts.trace),
        audit: shown(&artifacts.audit),
        procs_view: shown(&artifacts.procs_view),
    });
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<i32, Failure> {
    let instance = read_instance(&args.instance)?;
    match args.engine {
        Engine::Seq => {
            for (flag, given) in [
                ("--audit", args.audit.is_some()),
                ("--procs-view", args.procs_view.is_some()),
            ] {
                if given {
                    return Err(Failure::input(format!("{flag} applies only to --engine par")));
                }
            }
            let opts = RunOptions {
                max_transitions: args.max_steps,
                record_trace: args.trace.is_some(),
            };
            let start = Instant::now();
            let outcome = seq::run(&instance, &opts).map_err(Failure::from_core)?;
            let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            if let Some(path) = &args.trace {
                let trace = outcome.trace.as_deref().expect("trace was recorded");
                write_output(path, &format::dump_trace(&instance, trace))?;
            }
            let artifacts = Artifacts {
                out: args.out.clone(),
                trace: args.trace.clone(),
                ..Artifacts::default()
            };
            report_run(
                &instance,
                "seq",
                None,
                &outcome.state,
                outcome.states_visited,
                elapsed_ms,
                &artifacts,
            )?;
        }
        Engine::Par => {
            if args.trace.is_some() {
                return Err(Failure::input("--trace applies only to --engine seq"));
            }
            // A state dump comes with its communication log unless the
            // log was routed elsewhere explicitly.
            let audit_path = args.audit.clone().or_else(|| {
                args.out.as_ref().map(|p| p.with_extension("audit.csv"))
            });
            let opts = ParallelOptions {
                max_transitions: args.max_steps,
                max_cells: args.max_cells,
                audit: audit_path.is_some(),
            };
            let start = Instant::now();
            let outcome =
                parallel_run(&instance, args.mode.exec(), &opts).map_err(Failure::from_core)?;
            let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            if let Some(path) = &audit_path {
                let log = outcome.audit.as_ref().expect("audit was recorded");
                write_output(path, &log.to_csv())?;
            }
            if let Some(path) = &args.procs_view {
                write_output(path, &format::dump_processes(&instance, &outcome.state))?;
            }
            let merged = State {
                global: outcome.state.global().clone(),
                particles: outcome.state.merged_particles(),
            };
            let artifacts = Artifacts {
                out: args.out.clone(),
                audit: audit_path,
                procs_view: args.procs_view.clone(),
                ..Artifacts::default()
            };
            report_run(
                &instance,
                "par",
                Some(args.mode.name()),
                &merged,
                outcome.states_visited,
                elapsed_ms,
                &artifacts,
            )?;
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct VerifyReport {
    method: String,
    mode: &'static str,
    equivalence: verify::EquivalenceReport,
    motion: verify::MotionReport,
    pass: bool,
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32, Failure> {
    match (&args.instance, args.suite) {
        (Some(_), Some(_)) => {
            Err(Failure::input("give either an instance file or --suite, not both"))
        }
        (None, None) => Err(Failure::input("an instance file or --suite is required")),
        (None, Some(SuiteKind::Lemmas)) => {
            let report = verify::lemma_suite(args.max_cells.unwrap_or(729), args.seed);
            print_json(&report);
            Ok(if report.pass { 0 } else { 1 })
        }
        (Some(path), None) => {
            let instance = read_instance(path)?;
            let info = methods::method_info(instance.method.name);
            let tol = if info.exact { Tolerance::EXACT } else { Tolerance::FLOAT_DEFAULT };
            let seq_opts = RunOptions {
                max_transitions: args.max_steps,
                record_trace: true,
            };
            let seq_outcome = seq::run(&instance, &seq_opts).map_err(Failure::from_core)?;
            let par_opts = ParallelOptions {
                max_transitions: args.max_steps,
                max_cells: args.max_cells.unwrap_or(1_000_000),
                audit: false,
            };
            let par_outcome = parallel_run(&instance, args.mode.exec(), &par_opts)
                .map_err(Failure::from_core)?;
            let equivalence =
                verify::equivalent_up_to_permutation(&seq_outcome.state, &par_outcome.state, tol);
            let trace = seq_outcome.trace.as_deref().expect("trace was recorded");
            let motion =
                verify::check_motion_constraints(trace, &instance.domain, instance.method.cutoff);
            let pass = equivalence.matches && motion.pass;
            print_json(&VerifyReport {
                method: instance.method.name.to_string(),
                mode: args.mode.name(),
                equivalence,
                motion,
                pass,
            });
            Ok(if pass { 0 } else { 1 })
        }
    }
}

fn cmd_speedup(args: &SpeedupArgs) -> Result<i32, Failure> {
    let model: SpeedupModel = args.model.parse().map_err(Failure::from_core)?;
    let sweep: Sweep = args.sweep.parse().map_err(Failure::from_core)?;
    let base = ComplexityParams::default();
    let params = ComplexityParams {
        d: args.d.unwrap_or(base.d),
        n_cells: args.n_cell.unwrap_or(base.n_cells),
        n_max: args.n_max.unwrap_or(base.n_max),
        n_p_max: args.np_max.unwrap_or(base.n_p_max),
        tau_i: args.tau_i.unwrap_or(base.tau_i),
        tau_e: args.tau_e.unwrap_or(base.tau_e),
        tau_f: args.tau_f.unwrap_or(base.tau_f),
        tau_edot: args.tau_edot.unwrap_or(base.tau_edot),
        c_u: args.c_u.unwrap_or(base.c_u),
        c_alpha: args.c_alpha.unwrap_or(base.c_alpha),
        c_beta: args.c_beta.unwrap_or(base.c_beta),
        c_gamma: args.c_gamma.unwrap_or(base.c_gamma),
        c_c: args.c_c.unwrap_or(base.c_c),
        steps: args.steps.unwrap_or(base.steps),
    };
    let rows = complexity::speedup_sweep(model, &sweep, &params).map_err(Failure::from_core)?;
    let csv = complexity::sweep_to_csv(model, &rows);
    match &args.out {
        Some(path) => write_output(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(raw) = std::env::var("PM_THREADS") {
        let threads: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                Failure::input(format!("PM_THREADS must be a positive integer, got '{raw}'"))
            })?;
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let code = match configure_threads().and_then(|()| match &cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::Speedup(args) => cmd_speedup(args),
    }) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    };
    std::process::exit(code);
}
