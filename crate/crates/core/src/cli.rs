//! Command-line interface.
//!
//! Every subcommand reads its inputs (a JSON system file or a named
//! built-in example), runs one experiment, prints a JSON report to stdout,
//! and optionally writes the report (plus CSV side files) under `--out`.
//! Runs are fully deterministic: identical invocations produce
//! byte-identical reports.
//!
//! Exit codes: 0 = run completed and every requested check passed;
//! 1 = run completed but a verdict failed; 2 = invalid input (bad flags,
//! malformed JSON, out-of-range parameters).

use crate::catalog;
use crate::classify::{classify_action, BranchStrategy, ClassifyParams};
use crate::ergodicity::{
    backward_minimality_check, covering_time, equidistribution_test, exactness_check,
    invariant_set_closure, running_birkhoff_averages, BranchPolicy, TestObservable,
    DEFAULT_EPS_GRID, DEFAULT_WORD_BUDGET,
};
use crate::error::{Error, Result};
use crate::preball::{
    build_preball, check_bounded_distortion, check_regularity, random_subinterval_pairs,
    verify_contraction, PreballMode,
};
use crate::pliss::{hyperbolic_times, LogPhiSequence};
use crate::report::{csv_string, fmt_f64, write_text, ReportEnvelope};
use crate::rng::CounterRng;
use crate::sysfile::{load_system, SystemFile};
use crate::system::{GeneratorSystem, Word};
use crate::arcs::DomainArc;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};

/// Environment variable capping the global worker-thread count.
pub const THREADS_ENV: &str = "EXPANSION_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "expansion-lab",
    version,
    about = "Expansion diagnostics for one-dimensional generator systems",
    propagate_version = true
)]
pub struct Cli {
    /// Directory to write the JSON report (and CSV side files) into.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress the report on stdout (files are still written).
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compose a word along an orbit and record points and derivatives.
    Simulate(SimulateArgs),
    /// Find hyperbolic times along an orbit's log-contraction sequence.
    Pliss(PlissArgs),
    /// Build and verify a contraction preball at a hyperbolic order.
    Preball(PreballArgs),
    /// Classify a system's expansion type from seeded samples.
    Classify(ClassifyArgs),
    /// Empirical ergodicity experiments (covering, exactness, minimality,
    /// equidistribution, invariant-set closure).
    Ergodicity(ErgodicityArgs),
    /// Emit a built-in example system, optionally verifying its structure.
    Example(ExampleArgs),
}

// ---------------------------------------------------------------------------
// Shared input plumbing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Args)]
pub struct SystemInput {
    /// Path to a JSON system file.
    #[arg(long, value_name = "FILE", conflicts_with = "example")]
    pub system: Option<PathBuf>,
    /// A built-in example instead of a file.
    #[arg(long, value_enum)]
    pub example: Option<ExampleName>,
    /// Perturbation amplitude for --example perturbed (|eps| < 2).
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExampleName {
    /// Degree-2 circle cover x -> 2x.
    Doubling,
    /// Trigonometrically perturbed doubling.
    Perturbed,
    /// Two-generator interval action with region-dependent expansion.
    Interval,
}

impl SystemInput {
    pub fn load(&self) -> Result<GeneratorSystem> {
        match (&self.system, self.example) {
            (Some(path), None) => load_system(path),
            (None, Some(name)) => match name {
                ExampleName::Doubling => Ok(catalog::doubling_system()),
                ExampleName::Perturbed => catalog::perturbed_doubling(self.eps),
                ExampleName::Interval => {
                    catalog::interval_example(&catalog::IntervalExampleParams::default())
                }
            },
            _ => Err(Error::InvalidParameter(
                "provide exactly one of --system FILE or --example NAME".into(),
            )),
        }
    }

    fn describe(&self) -> serde_json::Value {
        match (&self.system, self.example) {
            (Some(p), _) => json!({"system_file": p.display().to_string()}),
            (_, Some(ExampleName::Doubling)) => json!({"example": "doubling"}),
            (_, Some(ExampleName::Perturbed)) => {
                json!({"example": "perturbed", "eps": self.eps})
            }
            (_, Some(ExampleName::Interval)) => json!({"example": "interval"}),
            _ => json!(null),
        }
    }
}

fn parse_letters(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|t| {
            t.trim().parse::<u32>().map_err(|_| {
                Error::InvalidParameter(format!("bad generator index '{t}' in word"))
            })
        })
        .collect()
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!("bad number '{t}' in list"))
            })
        })
        .collect()
}

/// Strategy syntax: `greedy`, `beam:K`, `exhaustive:D`.
fn parse_strategy(s: &str) -> Result<BranchStrategy> {
    let lower = s.to_ascii_lowercase();
    if lower == "greedy" {
        return Ok(BranchStrategy::Greedy);
    }
    if let Some(rest) = lower.strip_prefix("beam:") {
        let width = rest.parse::<usize>().map_err(|_| {
            Error::InvalidParameter(format!("bad beam width in '{s}'"))
        })?;
        return Ok(BranchStrategy::Beam { width });
    }
    if let Some(rest) = lower.strip_prefix("exhaustive:") {
        let depth = rest.parse::<usize>().map_err(|_| {
            Error::InvalidParameter(format!("bad exhaustive depth in '{s}'"))
        })?;
        return Ok(BranchStrategy::Exhaustive { depth });
    }
    Err(Error::InvalidParameter(format!(
        "unknown strategy '{s}' (expected greedy, beam:K, or exhaustive:D)"
    )))
}

/// Policy syntax: `greedy`, `random`, `cycle:1,2`.
fn parse_policy(s: &str) -> Result<BranchPolicy> {
    let lower = s.to_ascii_lowercase();
    if lower == "greedy" {
        return Ok(BranchPolicy::Greedy);
    }
    if lower == "random" {
        return Ok(BranchPolicy::Random);
    }
    if let Some(rest) = s.strip_prefix("cycle:") {
        return Ok(BranchPolicy::Cycle { letters: parse_letters(rest)? });
    }
    Err(Error::InvalidParameter(format!(
        "unknown policy '{s}' (expected greedy, random, or cycle:LETTERS)"
    )))
}

/// Observable syntax: `one`, `cos:K`, `sin:K`, `plateau:LO:HI:RAMP`.
fn parse_observable(s: &str) -> Result<TestObservable> {
    let lower = s.to_ascii_lowercase();
    if lower == "one" {
        return Ok(TestObservable::One);
    }
    if let Some(rest) = lower.strip_prefix("cos:") {
        let k = rest.parse::<u32>().map_err(|_| {
            Error::InvalidParameter(format!("bad frequency in '{s}'"))
        })?;
        return Ok(TestObservable::Cos { k });
    }
    if let Some(rest) = lower.strip_prefix("sin:") {
        let k = rest.parse::<u32>().map_err(|_| {
            Error::InvalidParameter(format!("bad frequency in '{s}'"))
        })?;
        return Ok(TestObservable::Sin { k });
    }
    if let Some(rest) = lower.strip_prefix("plateau:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidParameter(format!(
                "plateau needs LO:HI:RAMP, got '{s}'"
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.parse::<f64>().map_err(|_| {
                    Error::InvalidParameter(format!("bad number '{p}' in '{s}'"))
                })
            })
            .collect::<Result<_>>()?;
        return Ok(TestObservable::Plateau { lo: nums[0], hi: nums[1], ramp: nums[2] });
    }
    Err(Error::InvalidParameter(format!(
        "unknown observable '{s}' (expected one, cos:K, sin:K, plateau:LO:HI:RAMP)"
    )))
}

// ---------------------------------------------------------------------------
// Subcommand argument structs
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: SystemInput,
    /// Base point in [0, 1).
    #[arg(long)]
    pub x0: f64,
    /// Word as comma-separated 1-based letters, e.g. "1,2,1".
    #[arg(long)]
    pub word: String,
    /// Repeat the word pattern until this many letters (default: as given).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Start state for sequence-mode words.
    #[arg(long, default_value_t = 1)]
    pub start_state: u32,
}

#[derive(Debug, Args)]
pub struct PlissArgs {
    #[command(flatten)]
    pub input: SystemInput,
    /// Orbit CSV with a log_deriv column (as written by simulate),
    /// instead of synthesizing an orbit from a system.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["system", "example", "x0", "word"])]
    pub orbit: Option<PathBuf>,
    /// Base point in [0, 1).
    #[arg(long, required_unless_present = "orbit")]
    pub x0: Option<f64>,
    /// Word as comma-separated letters; repeated to --steps if given.
    #[arg(long, required_unless_present = "orbit")]
    pub word: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub start_state: u32,
    /// Expansion margin a > 0; hyperbolic times are certified at
    /// sigma = exp(-a/2).
    #[arg(short, long, default_value_t = 0.2)]
    pub a: f64,
}

#[derive(Debug, Args)]
pub struct PreballArgs {
    #[command(flatten)]
    pub input: SystemInput,
    #[arg(long)]
    pub x0: f64,
    #[arg(long)]
    pub word: String,
    #[arg(long, default_value_t = 1)]
    pub start_state: u32,
    /// Hyperbolic order n (uses the word's first n letters).
    #[arg(long)]
    pub order: usize,
    /// Image-ball radius delta.
    #[arg(long)]
    pub delta: f64,
    /// Contraction rate; default: the tightest certified rate.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Build even if the order is not certified (verification still runs).
    #[arg(long)]
    pub advisory: bool,
    /// Sample points for the contraction check.
    #[arg(long, default_value_t = 64)]
    pub contraction_samples: usize,
    /// Random subinterval pairs for the distortion check.
    #[arg(long, default_value_t = 100)]
    pub distortion_pairs: usize,
    /// RNG seed (distortion pairs are drawn randomly).
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub input: SystemInput,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 400)]
    pub horizon: usize,
    /// Branch search: greedy, beam:K, or exhaustive:D.
    #[arg(long, default_value = "greedy")]
    pub strategy: String,
    /// Expandability threshold on the exponent (average log theta).
    #[arg(short, long, default_value_t = crate::classify::DEFAULT_A_THRESHOLD)]
    pub a: f64,
    /// Sample fraction a verdict needs.
    #[arg(long, default_value_t = 0.99)]
    pub quota: f64,
    /// Known exceptional fixed points (comma-separated); sampled points
    /// within 1e-9 are redrawn. The interval example adds 0,1 itself.
    #[arg(long)]
    pub exceptional: Option<String>,
    /// RNG seed (sample points are drawn randomly).
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ErgodicityArgs {
    #[command(flatten)]
    pub input: SystemInput,
    #[command(subcommand)]
    pub mode: ErgodicityMode,
}

#[derive(Debug, Subcommand)]
pub enum ErgodicityMode {
    /// First time the iterated image of a ball covers the whole space.
    Cover {
        #[arg(long)]
        center: f64,
        #[arg(long)]
        radius: f64,
        /// Word letters; repeated up to --budget steps.
        #[arg(long, default_value = "1")]
        word: String,
        #[arg(long, default_value_t = 64)]
        budget: usize,
        #[arg(long, default_value_t = DEFAULT_EPS_GRID)]
        eps_grid: f64,
    },
    /// Breadth-first search for words whose images jointly cover the space.
    Exact {
        #[arg(long)]
        center: f64,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = DEFAULT_WORD_BUDGET)]
        budget: usize,
        #[arg(long, default_value_t = DEFAULT_EPS_GRID)]
        eps_grid: f64,
    },
    /// Whether forward images of an open arc cover the space.
    Minimal {
        /// Arc start in [0, 1).
        #[arg(long)]
        lo: f64,
        /// Arc length in (0, 1].
        #[arg(long)]
        len: f64,
        #[arg(long, default_value_t = DEFAULT_WORD_BUDGET)]
        budget: usize,
        #[arg(long, default_value_t = DEFAULT_EPS_GRID)]
        eps_grid: f64,
    },
    /// Birkhoff averages of test observables against their integrals.
    Equi {
        /// Letter policy: greedy, random, or cycle:LETTERS.
        #[arg(long, default_value = "random")]
        policy: String,
        /// Comma-separated observables: one, cos:K, sin:K,
        /// plateau:LO:HI:RAMP.
        #[arg(long, default_value = "one,cos:1,sin:1")]
        observables: String,
        #[arg(long, default_value_t = 100_000)]
        horizon: usize,
        #[arg(long, default_value_t = 10)]
        points: usize,
        /// Post-step jitter amplitude; defaults to 2^-40.
        #[arg(long)]
        dither: Option<f64>,
        /// RNG seed (initial points, dither, and random letters).
        #[arg(long)]
        seed: u64,
    },
    /// Smallest forward-invariant cell union containing the seed cells.
    Invariant {
        /// Comma-separated seed cell indices on the epsilon grid.
        #[arg(long)]
        cells: String,
        #[arg(long, default_value_t = DEFAULT_EPS_GRID)]
        eps_grid: f64,
        #[arg(long, default_value_t = 64)]
        iters: usize,
    },
}

#[derive(Debug, Args)]
pub struct ExampleArgs {
    /// Which example to emit.
    #[arg(long, value_enum)]
    pub name: ExampleName,
    /// Perturbation amplitude for --name perturbed.
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    /// Region parameters a,c1,c2,b for --name interval.
    #[arg(long)]
    pub params: Option<String>,
    /// Verify the interval example's structural conditions.
    #[arg(long)]
    pub verify: bool,
    /// Also emit a curve CSV with this many sample rows.
    #[arg(long, default_value_t = 0)]
    pub curve_samples: usize,
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// A completed run: the report text, side files, and the verdict.
pub struct RunOutput {
    /// JSON report (already enveloped and serialized).
    pub report_json: String,
    /// Basename the report is written under inside --out.
    pub report_name: String,
    /// (basename, content) side files, e.g. CSV series.
    pub side_files: Vec<(String, String)>,
    /// Overall verdict; `None` for descriptive runs.
    pub pass: Option<bool>,
}

fn repeat_letters(pattern: &[u32], total: usize) -> Vec<u32> {
    (0..total).map(|i| pattern[i % pattern.len()]).collect()
}

fn envelope<T: Serialize>(
    command: &str,
    params: serde_json::Value,
    seed: Option<u64>,
    pass: Option<bool>,
    report: T,
) -> Result<(String, Option<bool>)> {
    let mut env = ReportEnvelope::new(command, params, report);
    if let Some(s) = seed {
        env = env.with_seed(s);
    }
    if let Some(p) = pass {
        env = env.with_pass(p);
    }
    Ok((env.to_json()?, pass))
}

pub fn run(cli: &Cli) -> Result<RunOutput> {
    match &cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Pliss(args) => run_pliss(args),
        Command::Preball(args) => run_preball(args),
        Command::Classify(args) => run_classify(args),
        Command::Ergodicity(args) => run_ergodicity(args),
        Command::Example(args) => run_example(args),
    }
}

fn run_simulate(args: &SimulateArgs) -> Result<RunOutput> {
    let system = args.input.load()?;
    let pattern = parse_letters(&args.word)?;
    if pattern.is_empty() {
        return Err(Error::InvalidParameter("word must be nonempty".into()));
    }
    let steps = args.steps.unwrap_or(pattern.len());
    let word = Word::with_start(repeat_letters(&pattern, steps), args.start_state);
    let orbit = system.compose_orbit(&word, args.x0, steps)?;
    let params = json!({
        "input": args.input.describe(),
        "x0": args.x0,
        "word_pattern": pattern,
        "steps": steps,
        "start_state": args.start_state,
    });
    let mut rows = Vec::with_capacity(steps + 1);
    for (i, &x) in orbit.points.iter().enumerate() {
        let ld = orbit
            .log_derivs
            .get(i)
            .map(|v| fmt_f64(*v))
            .unwrap_or_default();
        rows.push(vec![i.to_string(), fmt_f64(x), ld]);
    }
    let csv = csv_string(&["step", "x", "log_deriv"], &rows);
    let (report_json, pass) = envelope("simulate", params, None, None, &orbit)?;
    Ok(RunOutput {
        report_json,
        report_name: "simulate.json".into(),
        side_files: vec![("simulate_orbit.csv".into(), csv)],
        pass,
    })
}

/// Reads the log_deriv column of an orbit CSV (as written by `simulate`)
/// and negates it into a pointwise log-contraction sequence. Rows with an
/// empty cell (the final orbit point has no step derivative) are skipped.
fn log_phi_from_orbit_csv(path: &Path) -> Result<LogPhiSequence> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter("orbit CSV is empty".into()))?;
    let col = header
        .split(',')
        .position(|c| c.trim() == "log_deriv")
        .ok_or_else(|| {
            Error::InvalidParameter("orbit CSV needs a log_deriv column".into())
        })?;
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cell = line.split(',').nth(col).map(str::trim).unwrap_or("");
        if cell.is_empty() {
            continue;
        }
        let v = cell.parse::<f64>().map_err(|_| {
            Error::InvalidParameter(format!(
                "orbit CSV line {}: bad log_deriv '{cell}'",
                i + 2
            ))
        })?;
        values.push(-v);
    }
    LogPhiSequence::pointwise(values)
}

fn run_pliss(args: &PlissArgs) -> Result<RunOutput> {
    let (seq, source) = if let Some(path) = &args.orbit {
        (
            log_phi_from_orbit_csv(path)?,
            json!({"orbit_csv": path.display().to_string()}),
        )
    } else {
        let system = args.input.load()?;
        let x0 = args.x0.expect("clap requires --x0 without --orbit");
        let word_text = args.word.as_deref().expect("clap requires --word without --orbit");
        let pattern = parse_letters(word_text)?;
        if pattern.is_empty() {
            return Err(Error::InvalidParameter("word must be nonempty".into()));
        }
        let steps = args.steps.unwrap_or(pattern.len());
        let word = Word::with_start(repeat_letters(&pattern, steps), args.start_state);
        let orbit = system.compose_orbit(&word, x0, steps)?;
        let source = json!({
            "input": args.input.describe(),
            "x0": x0,
            "word_pattern": pattern,
            "steps": steps,
        });
        (LogPhiSequence::from_orbit(&orbit), source)
    };
    let report = hyperbolic_times(&seq, args.a)?;
    let pass = !report.advisory;
    let params = json!({
        "source": source,
        "a": args.a,
    });
    let times: std::collections::BTreeSet<usize> = report.times.iter().copied().collect();
    let mut partial = 0.0;
    let mut rows = Vec::with_capacity(seq.values.len());
    for (i, v) in seq.values.iter().enumerate() {
        partial += v;
        rows.push(vec![
            (i + 1).to_string(),
            fmt_f64(*v),
            fmt_f64(partial),
            u8::from(times.contains(&(i + 1))).to_string(),
        ]);
    }
    let csv = csv_string(&["n", "log_theta", "partial_sum", "is_hyperbolic_time"], &rows);
    let (report_json, pass) = envelope("pliss", params, None, Some(pass), &report)?;
    Ok(RunOutput {
        report_json,
        report_name: "pliss.json".into(),
        side_files: vec![("pliss_times.csv".into(), csv)],
        pass,
    })
}

#[derive(Serialize)]
struct PreballRunReport {
    preball: crate::preball::Preball,
    contraction: crate::preball::ContractionReport,
    regularity: crate::preball::RegularityRecord,
    distortion: crate::preball::DistortionReport,
}

/// Per-level contraction data for plotting: the worst observed ratio
/// d(f^i y, f^i z) / d(f^n y, f^n z) over sampled pairs, against the
/// guaranteed envelope lambda^(n-i).
fn contraction_levels_csv(
    system: &GeneratorSystem,
    pb: &crate::preball::Preball,
    samples: usize,
) -> String {
    let pts = pb.interval.samples(samples.max(2));
    let n = pb.order;
    let orbits: Vec<Vec<f64>> = pts
        .iter()
        .map(|&p0| {
            let mut p = system.domain.canonicalize(p0);
            let mut row = Vec::with_capacity(n + 1);
            row.push(p);
            for &idx in &pb.word.indices[..n] {
                p = system.generators[(idx - 1) as usize].eval(p);
                row.push(p);
            }
            row
        })
        .collect();
    let mut rows = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut max_ratio: f64 = 0.0;
        for s in 0..orbits.len() {
            for t in (s + 1)..orbits.len() {
                let d_final = system.domain.distance(orbits[s][n], orbits[t][n]);
                if d_final > 0.0 {
                    let d_i = system.domain.distance(orbits[s][i], orbits[t][i]);
                    max_ratio = max_ratio.max(d_i / d_final);
                }
            }
        }
        rows.push(vec![
            i.to_string(),
            fmt_f64(max_ratio),
            fmt_f64(pb.lambda.powi((n - i) as i32)),
        ]);
    }
    csv_string(&["level", "max_ratio", "lambda_bound"], &rows)
}

fn run_preball(args: &PreballArgs) -> Result<RunOutput> {
    let system = args.input.load()?;
    let pattern = parse_letters(&args.word)?;
    if pattern.is_empty() {
        return Err(Error::InvalidParameter("word must be nonempty".into()));
    }
    let word = Word::with_start(repeat_letters(&pattern, args.order), args.start_state);
    let mode = if args.advisory { PreballMode::Advisory } else { PreballMode::Strict };
    let preball =
        build_preball(&system, &word, args.x0, args.order, args.delta, args.sigma, mode)?;
    let contraction = verify_contraction(&system, &preball, args.contraction_samples)?;
    let regularity = check_regularity(&system, &preball)?;
    let mut rng = CounterRng::substream(args.seed, 40, 0);
    let pairs = random_subinterval_pairs(&preball, args.distortion_pairs, &mut rng);
    let distortion = check_bounded_distortion(&system, &preball, &pairs)?;
    let pass = preball.certified && contraction.pass && regularity.pass && distortion.pass;
    let params = json!({
        "input": args.input.describe(),
        "x0": args.x0,
        "word_pattern": pattern,
        "order": args.order,
        "delta": args.delta,
        "sigma": args.sigma,
        "advisory": args.advisory,
        "contraction_samples": args.contraction_samples,
        "distortion_pairs": args.distortion_pairs,
    });
    let csv = contraction_levels_csv(&system, &preball, args.contraction_samples);
    let report = PreballRunReport { preball, contraction, regularity, distortion };
    let (report_json, pass) = envelope("preball", params, Some(args.seed), Some(pass), &report)?;
    Ok(RunOutput {
        report_json,
        report_name: "preball.json".into(),
        side_files: vec![("preball_contraction.csv".into(), csv)],
        pass,
    })
}

fn run_classify(args: &ClassifyArgs) -> Result<RunOutput> {
    let system = args.input.load()?;
    let strategy = parse_strategy(&args.strategy)?;
    let mut exceptional = match &args.exceptional {
        Some(s) => parse_floats(s)?,
        None => Vec::new(),
    };
    if args.input.example == Some(ExampleName::Interval) && exceptional.is_empty() {
        exceptional = vec![0.0, 1.0];
    }
    let params = ClassifyParams {
        samples: args.samples,
        horizon: args.horizon,
        strategy,
        a_threshold: args.a,
        quota: args.quota,
        exceptional_points: exceptional,
        candidate_cap: 8,
        seed: args.seed,
    };
    let report = classify_action(&system, &params)?;
    let pass = report.pointwise_expandable;
    let cli_params = json!({
        "input": args.input.describe(),
        "samples": args.samples,
        "horizon": args.horizon,
        "strategy": args.strategy,
        "a_threshold": args.a,
        "quota": args.quota,
        "exceptional": params.exceptional_points,
    });
    let rows: Vec<Vec<String>> = report
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                i.to_string(),
                fmt_f64(r.x0),
                fmt_f64(r.exponent),
                r.steps.to_string(),
                fmt_f64(r.hyperbolic_density),
                u8::from(r.expandable).to_string(),
            ]
        })
        .collect();
    let csv = csv_string(
        &["sample", "x0", "exponent", "steps", "hyperbolic_density", "expandable"],
        &rows,
    );
    let (report_json, pass) =
        envelope("classify", cli_params, Some(args.seed), Some(pass), &report)?;
    Ok(RunOutput {
        report_json,
        report_name: "classify.json".into(),
        side_files: vec![("classify_exponents.csv".into(), csv)],
        pass,
    })
}

fn run_ergodicity(args: &ErgodicityArgs) -> Result<RunOutput> {
    let system = args.input.load()?;
    let input_desc = args.input.describe();
    match &args.mode {
        ErgodicityMode::Cover { center, radius, word, budget, eps_grid } => {
            let pattern = parse_letters(word)?;
            if pattern.is_empty() {
                return Err(Error::InvalidParameter("word must be nonempty".into()));
            }
            let full = Word::new(repeat_letters(&pattern, *budget));
            let outcome =
                covering_time(&system, &full, *center, *radius, *eps_grid, *budget)?;
            let pass = outcome.time.is_some();
            let params = json!({
                "input": input_desc, "mode": "cover", "center": center,
                "radius": radius, "word_pattern": pattern, "budget": budget,
                "eps_grid": eps_grid,
            });
            let (report_json, pass) =
                envelope("ergodicity/cover", params, None, Some(pass), &outcome)?;
            Ok(RunOutput {
                report_json,
                report_name: "ergodicity_cover.json".into(),
                side_files: vec![],
                pass,
            })
        }
        ErgodicityMode::Exact { center, radius, budget, eps_grid } => {
            let state = exactness_check(&system, *center, *radius, *eps_grid, *budget)?;
            let pass = state.complete;
            let params = json!({
                "input": input_desc, "mode": "exact", "center": center,
                "radius": radius, "budget": budget, "eps_grid": eps_grid,
            });
            let (report_json, pass) =
                envelope("ergodicity/exact", params, None, Some(pass), &state)?;
            Ok(RunOutput {
                report_json,
                report_name: "ergodicity_exact.json".into(),
                side_files: vec![],
                pass,
            })
        }
        ErgodicityMode::Minimal { lo, len, budget, eps_grid } => {
            let arc = DomainArc::new(&system.domain, *lo, *len);
            let outcome =
                backward_minimality_check(&system, &[arc], *eps_grid, *budget)?;
            let pass = outcome.complete;
            let params = json!({
                "input": input_desc, "mode": "minimal", "lo": lo, "len": len,
                "budget": budget, "eps_grid": eps_grid,
            });
            let (report_json, pass) =
                envelope("ergodicity/minimal", params, None, Some(pass), &outcome)?;
            Ok(RunOutput {
                report_json,
                report_name: "ergodicity_minimal.json".into(),
                side_files: vec![],
                pass,
            })
        }
        ErgodicityMode::Equi { policy, observables, horizon, points, dither, seed } => {
            let policy = parse_policy(policy)?;
            let obs: Vec<TestObservable> = observables
                .split(',')
                .map(parse_observable)
                .collect::<Result<_>>()?;
            let report = equidistribution_test(
                &system, &policy, &obs, *horizon, *points, *seed, *dither,
            )?;
            let pass = report.pass;
            // Running averages along the first initial point's orbit.
            let rows_data = running_birkhoff_averages(
                &system, &policy, &obs, *horizon, *seed, *dither, 0, 1000,
            )?;
            let mut header = vec!["step".to_string()];
            header.extend(obs.iter().map(|o| o.label()));
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows: Vec<Vec<String>> = rows_data
                .iter()
                .map(|(n, avgs)| {
                    let mut row = vec![n.to_string()];
                    row.extend(avgs.iter().map(|v| fmt_f64(*v)));
                    row
                })
                .collect();
            let csv = csv_string(&header_refs, &rows);
            let params = json!({
                "input": input_desc, "mode": "equi",
                "policy": report.policy, "observables": obs,
                "horizon": horizon, "points": points, "dither": report.dither,
            });
            let (report_json, pass) =
                envelope("ergodicity/equi", params, Some(*seed), Some(pass), &report)?;
            Ok(RunOutput {
                report_json,
                report_name: "ergodicity_equi.json".into(),
                side_files: vec![("ergodicity_equi_birkhoff.csv".into(), csv)],
                pass,
            })
        }
        ErgodicityMode::Invariant { cells, eps_grid, iters } => {
            let seed_cells: Vec<usize> = cells
                .split(',')
                .map(|t| {
                    t.trim().parse::<usize>().map_err(|_| {
                        Error::InvalidParameter(format!("bad cell index '{t}'"))
                    })
                })
                .collect::<Result<_>>()?;
            let outcome = invariant_set_closure(&system, &seed_cells, *eps_grid, *iters)?;
            let pass = outcome.converged;
            let params = json!({
                "input": input_desc, "mode": "invariant", "cells": seed_cells,
                "eps_grid": eps_grid, "iters": iters,
            });
            let (report_json, pass) =
                envelope("ergodicity/invariant", params, None, Some(pass), &outcome)?;
            Ok(RunOutput {
                report_json,
                report_name: "ergodicity_invariant.json".into(),
                side_files: vec![],
                pass,
            })
        }
    }
}

#[derive(Serialize)]
struct ExampleRunReport {
    system: SystemFile,
    generators: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    conditions: Option<catalog::ExampleConditionReport>,
}

fn run_example(args: &ExampleArgs) -> Result<RunOutput> {
    let params = match &args.params {
        Some(s) => {
            let v = parse_floats(s)?;
            if v.len() != 4 {
                return Err(Error::InvalidParameter(
                    "--params needs exactly four numbers a,c1,c2,b".into(),
                ));
            }
            catalog::IntervalExampleParams::new(v[0], v[1], v[2], v[3])?
        }
        None => catalog::IntervalExampleParams::default(),
    };
    let system = match args.name {
        ExampleName::Doubling => catalog::doubling_system(),
        ExampleName::Perturbed => catalog::perturbed_doubling(args.eps)?,
        ExampleName::Interval => catalog::interval_example(&params)?,
    };
    let conditions = if args.verify {
        if args.name == ExampleName::Interval {
            Some(catalog::verify_example_conditions(&system, &params)?)
        } else {
            return Err(Error::InvalidParameter(
                "--verify applies to --name interval only".into(),
            ));
        }
    } else {
        None
    };
    let pass = conditions.as_ref().map(|c| c.all_pass);
    let file = SystemFile::from_system(&system);
    let system_json = {
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        s
    };
    let mut side_files = vec![("example_system.json".into(), system_json)];
    if args.curve_samples > 0 {
        let n = args.curve_samples;
        let mut rows = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let x = k as f64 / n as f64;
            let mut row = vec![fmt_f64(x)];
            for g in &system.generators {
                row.push(fmt_f64(g.eval(x)));
                row.push(fmt_f64(g.deriv(x)));
            }
            rows.push(row);
        }
        let mut header = vec!["x".to_string()];
        for (i, _) in system.generators.iter().enumerate() {
            header.push(format!("f{}", i + 1));
            header.push(format!("df{}", i + 1));
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        side_files.push(("example_curve.csv".into(), csv_string(&header_refs, &rows)));
    }
    let cli_params = json!({
        "name": match args.name {
            ExampleName::Doubling => "doubling",
            ExampleName::Perturbed => "perturbed",
            ExampleName::Interval => "interval",
        },
        "eps": args.eps,
        "region": params,
        "verify": args.verify,
        "curve_samples": args.curve_samples,
    });
    let report = ExampleRunReport {
        system: file,
        generators: system.generators.iter().map(|g| g.describe()).collect(),
        conditions,
    };
    let (report_json, pass) = envelope("example", cli_params, None, pass, &report)?;
    Ok(RunOutput {
        report_json,
        report_name: "example.json".into(),
        side_files,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Applies the thread-cap environment variable to the global worker pool.
/// Call once at startup, before any parallel work.
pub fn init_thread_pool() {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Writes outputs and returns the process exit code.
pub fn finish(cli: &Cli, out: &RunOutput) -> Result<i32> {
    if let Some(dir) = &cli.out {
        write_text(&dir.join(&out.report_name), &out.report_json)?;
        for (name, content) in &out.side_files {
            write_text(&dir.join(name), content)?;
        }
    }
    if !cli.quiet {
        print!("{}", out.report_json);
    }
    Ok(match out.pass {
        Some(false) => 1,
        _ => 0,
    })
}

/// Full CLI entry: parse, run, write, map errors to exit code 2.
pub fn main_entry<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are input errors (2); --help and --version
            // render as clap "errors" but exit 0.
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_thread_pool();
    match run(&cli).and_then(|out| finish(&cli, &out)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
