//! `satbif` command-line front end.
//!
//! Exit codes: 0 success, 2 a check failed, 3 bad input, 1 anything else.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, ValueEnum};
use satbif::configuration::{BuiltConfig, ConfigDocument, RingSpec, ThreeBodySpec, RESIDUAL_TOLERANCE};
use satbif::continuation::{landmarks, trace_branch, LoopRecord, TraceOptions, DEFAULT_MODES};
use satbif::equilibria::{equilibria_csv, equilibria_of, morse_consistency};
use satbif::ring_sum::{check_csv, check_grid, CheckGrid};
use satbif::spectral::{bifurcation_points, equilibrium_report, DEFAULT_MODE_CUTOFF};
use satbif::validation::{standard_suite, validate_configuration, CriterionOutcome};
use satbif::Execution;
use serde::Serialize;

/// Relative tolerance for the ring-sum table.
const RING_SUM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Equilibria,
    Spectrum,
    Branch,
    Ringsum,
    Validate,
}

/// Equilibria, bifurcation frequencies and periodic-orbit branches of a
/// satellite moving among primaries in a rotating frame.
#[derive(Debug, Parser)]
#[command(name = "satbif", version)]
struct Args {
    /// Command to run (may also be given with --command).
    #[arg(value_enum)]
    command: Option<Command>,

    #[arg(long = "command", value_enum, conflicts_with = "command", value_name = "NAME")]
    command_flag: Option<Command>,

    /// JSON configuration: explicit primaries, or a `three_body` / `ring` builder.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Mass parameter (three-body mu, or the ring's central mass).
    #[arg(long)]
    mu: Option<f64>,

    /// Ring vertex count; selects the ring builder when no config is given.
    #[arg(long)]
    n: Option<usize>,

    /// Force exponent.
    #[arg(long)]
    alpha: Option<f64>,

    /// Equilibrium index, in the order of the equilibria table.
    #[arg(long, default_value_t = 0)]
    eq_index: usize,

    /// Bifurcation index, in the order of the spectrum report.
    #[arg(long, default_value_t = 0)]
    bif_index: usize,

    #[arg(long)]
    max_steps: Option<usize>,

    /// Initial arclength step.
    #[arg(long)]
    delta: Option<f64>,

    /// Fourier cutoff for branches; resonance cutoff for spectra.
    #[arg(long)]
    modes: Option<usize>,

    /// Keep every k-th loop in loops.json (the last loop is always kept).
    #[arg(long, default_value_t = 10)]
    stride: usize,

    /// Evaluate independent items on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug)]
enum Failure {
    Input(anyhow::Error),
    Check(String),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Check(_) => 2,
            Failure::Input(_) => 3,
        }
    }
}

type Outcome = Result<(), Failure>;

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Input(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(3);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(e) => eprintln!("input error: {e:#}"),
                Failure::Check(msg) => eprintln!("check failed: {msg}"),
                Failure::Runtime(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn run(args: &Args) -> Outcome {
    let command = args.command.or(args.command_flag).ok_or_else(|| {
        input(anyhow!("no command given; expected one of equilibria, spectrum, branch, ringsum, validate"))
    })?;
    check_ranges(args)?;
    let built = load_config(args)?;
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display())).map_err(input)?;
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    match command {
        Command::Equilibria => cmd_equilibria(args, &require(built)?, exec),
        Command::Spectrum => cmd_spectrum(args, &require(built)?, exec),
        Command::Branch => cmd_branch(args, &require(built)?, exec),
        Command::Ringsum => cmd_ringsum(args, exec),
        Command::Validate => cmd_validate(args, built.as_ref(), exec),
    }
}

fn check_ranges(args: &Args) -> Outcome {
    let bad = |what: &str| Err(input(anyhow!("{what}")));
    if args.delta.is_some_and(|d| !(d.is_finite() && d > 0.0)) {
        return bad("--delta must be positive");
    }
    if args.modes.is_some_and(|m| m == 0 || m > satbif::continuation::MAX_MODES) {
        return bad("--modes must lie in 1..=256");
    }
    if args.alpha.is_some_and(|a| !(a.is_finite() && a > 1.0)) {
        return bad("--alpha must exceed 1");
    }
    Ok(())
}

fn require(built: Option<BuiltConfig>) -> Result<BuiltConfig, Failure> {
    built.ok_or_else(|| input(anyhow!("this command needs --config, --mu (three-body) or --n (ring)")))
}

/// The configuration file with `--mu/--n/--alpha` overrides applied, or a
/// builder document made from the overrides alone.
fn load_config(args: &Args) -> Result<Option<BuiltConfig>, Failure> {
    let mut doc = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(input)?;
            ConfigDocument::from_json(&text).map_err(input)?
        }
        None => match (args.n, args.mu) {
            (Some(n), mu) => ConfigDocument::Ring { ring: RingSpec { n, mu: mu.unwrap_or(0.0) }, alpha: 2.0 },
            (None, Some(mu)) => ConfigDocument::ThreeBody { three_body: ThreeBodySpec { mu }, alpha: 2.0 },
            (None, None) => return Ok(None),
        },
    };
    match &mut doc {
        ConfigDocument::ThreeBody { three_body, alpha } => {
            if args.n.is_some() {
                return Err(input(anyhow!("--n does not apply to a three-body configuration")));
            }
            three_body.mu = args.mu.unwrap_or(three_body.mu);
            *alpha = args.alpha.unwrap_or(*alpha);
        }
        ConfigDocument::Ring { ring, alpha } => {
            ring.n = args.n.unwrap_or(ring.n);
            ring.mu = args.mu.unwrap_or(ring.mu);
            *alpha = args.alpha.unwrap_or(*alpha);
        }
        ConfigDocument::Explicit { alpha, .. } => {
            if args.n.is_some() || args.mu.is_some() {
                return Err(input(anyhow!("--mu and --n only apply to builder configurations")));
            }
            *alpha = args.alpha.unwrap_or(*alpha);
        }
    }
    let built = doc.build().map_err(input)?;
    Ok(Some(built))
}

fn write(dir: &Path, name: &str, contents: &str) -> Outcome {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display())).map_err(input)
}

fn json<T: Serialize + ?Sized>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(runtime)?;
    s.push('\n');
    Ok(s)
}

fn warn_unbalanced(built: &BuiltConfig) -> Outcome {
    let r = built.config.max_residual().map_err(input)?;
    if r > RESIDUAL_TOLERANCE {
        eprintln!(
            "warning: primaries are not a relative equilibrium (residual {r:.3e}); results describe a frozen frame"
        );
    }
    Ok(())
}

fn cmd_equilibria(args: &Args, built: &BuiltConfig, exec: Execution) -> Outcome {
    warn_unbalanced(built)?;
    let eqs = equilibria_of(built, exec).map_err(runtime)?;
    let report = morse_consistency(&eqs, built.config.len());
    write(&args.out, "equilibria.csv", &equilibria_csv(&eqs))?;
    write(&args.out, "morse.txt", &format!("{report}\n"))?;
    println!("{} equilibria", eqs.len());
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check(report.to_string()))
    }
}

fn cmd_spectrum(args: &Args, built: &BuiltConfig, exec: Execution) -> Outcome {
    warn_unbalanced(built)?;
    let cutoff = args.modes.unwrap_or(DEFAULT_MODE_CUTOFF);
    let eqs = equilibria_of(built, exec).map_err(runtime)?;
    let reports: Vec<_> = eqs.iter().enumerate().map(|(i, e)| equilibrium_report(i, e, cutoff)).collect();
    write(&args.out, "spectrum.json", &json(&reports)?)?;
    for r in &reports {
        let etas: Vec<String> = r.bifurcations.iter().map(|b| format!("{:+}", b.eta)).collect();
        println!(
            "{:>3} ({:+.6}, {:+.6}) {:<10} eta = ({})",
            r.index,
            r.position[0],
            r.position[1],
            r.kind.to_string(),
            etas.join(", ")
        );
        for w in &r.warnings {
            eprintln!("warning: equilibrium {}: {w}", r.index);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct LoopEntry {
    step: usize,
    #[serde(flatten)]
    record: LoopRecord,
}

fn cmd_branch(args: &Args, built: &BuiltConfig, exec: Execution) -> Outcome {
    warn_unbalanced(built)?;
    let eqs = equilibria_of(built, exec).map_err(runtime)?;
    let eq = eqs
        .get(args.eq_index)
        .ok_or_else(|| input(anyhow!("--eq-index {} out of range ({} equilibria)", args.eq_index, eqs.len())))?;
    let (_, points) = bifurcation_points(eq, DEFAULT_MODE_CUTOFF).map_err(input)?;
    let bif = points.get(args.bif_index).ok_or_else(|| {
        input(anyhow!("--bif-index {} out of range ({} bifurcation points)", args.bif_index, points.len()))
    })?;
    let defaults = TraceOptions::default();
    let options = TraceOptions {
        max_steps: args.max_steps.unwrap_or(defaults.max_steps),
        initial_step: args.delta.unwrap_or(defaults.initial_step),
        modes: args.modes.unwrap_or(DEFAULT_MODES),
        landmarks: landmarks(&eqs),
        anchor_index: Some(args.eq_index),
        ..defaults
    };
    let branch = trace_branch(&built.config, eq, bif, &options).map_err(runtime)?;
    let loops: Vec<LoopEntry> =
        branch.loop_records(args.stride).into_iter().map(|(step, record)| LoopEntry { step, record }).collect();
    write(&args.out, "branch.csv", &branch.csv())?;
    write(&args.out, "loops.json", &json(&loops)?)?;
    write(&args.out, "summary.json", &json(&branch.summary())?)?;
    println!(
        "branch from nu = {:.12} (eta {:+}): {} after {} points",
        bif.nu,
        bif.eta,
        branch.termination,
        branch.points.len()
    );
    Ok(())
}

fn cmd_ringsum(args: &Args, exec: Execution) -> Outcome {
    let mut grid = CheckGrid::default();
    if let Some(n) = args.n {
        grid.n = vec![n];
    }
    let rows = check_grid(&grid, exec).map_err(input)?;
    write(&args.out, "ringsum.csv", &check_csv(&rows))?;
    let worst = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    println!("{} queries, worst relative error {worst:.3e}", rows.len());
    if worst < RING_SUM_TOLERANCE {
        Ok(())
    } else {
        Err(Failure::Check(format!("ring-sum relative error {worst:e} exceeds {RING_SUM_TOLERANCE:e}")))
    }
}

fn cmd_validate(args: &Args, built: Option<&BuiltConfig>, exec: Execution) -> Outcome {
    let outcomes: Vec<CriterionOutcome> = match built {
        Some(b) => validate_configuration(b, exec),
        None => standard_suite(exec, true),
    };
    let mut text = String::new();
    for o in &outcomes {
        let _ = writeln!(text, "{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let _ = writeln!(
        text,
        "{}",
        if failed == 0 { "PASS".to_string() } else { format!("FAIL ({failed} of {})", outcomes.len()) }
    );
    write(&args.out, "validate.txt", &text)?;
    print!("{text}");
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Check(format!("{failed} check(s) failed")))
    }
}
