//! Expansion-type classification of generator systems.
//!
//! Exponents throughout this module are finite-horizon Birkhoff averages
//! of log theta = -log |f'|: negative exponents mean expansion, and
//! "stronger" verdicts are more negative. Three nested system-level
//! verdicts are issued, strongest first:
//!
//! 1. **Uniformly expanding** — a worst-case fit over a grid finds C > 0,
//!    lambda > 1 with |(f^n_omega)'(x)| >= C lambda^n over all words.
//! 2. **Non-uniformly expanding** — one common word achieves a negative
//!    exponent for almost every sampled point.
//! 3. **Pointwise expandable** — almost every sampled point has its own
//!    word with a negative exponent.
//!
//! The module also certifies branches assembled from an explicit patch
//! cover (per-block contraction checked as blocks are emitted), finds the
//! shortest expanding word at a point, and runs the integral obstruction
//! for families of diffeomorphisms: for every word of invertible maps the
//! integral of |(f^n_omega)'| over the space is exactly 1, which forbids
//! derivative growth on sets of positive measure.

use crate::error::{Error, Result};
use crate::pliss::{hyperbolic_times, LogPhiSequence};
use crate::rng::CounterRng;
use crate::system::{GeneratorSystem, Mode, Word};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Cap on the number of words an exhaustive branch search may enumerate.
pub const EXHAUSTIVE_WORD_CAP: u64 = 1_000_000;
/// Default threshold separating a negative exponent from numerical zero.
pub const DEFAULT_A_THRESHOLD: f64 = -1e-6;

// ---------------------------------------------------------------------------
// Uniform expansion
// ---------------------------------------------------------------------------

/// How words are chosen when fitting the (C, lambda) expansion envelope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum WordStrategy {
    /// Repeat a fixed letter pattern.
    Cycle { letters: Vec<u32> },
    /// Most-expanding letter at each point (ties: lowest index).
    Greedy,
    /// Worst case over all words: a dynamic program takes the pointwise
    /// minimum over letters at every step, so the fitted envelope lower
    /// bounds every word's expansion. This is the strategy that actually
    /// certifies uniformity.
    Adversarial,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformExpansionReport {
    pub strategy: WordStrategy,
    pub grid: usize,
    pub horizon: usize,
    /// exp(slope) of the least-squares fit of log |(f^i)'(x)| against i.
    pub lambda_est: f64,
    /// Anchored prefactor: the largest C with log C + i log lambda below
    /// every data point, so |(f^i)'(x)| >= C lambda_est^i on the data.
    pub c_est: f64,
    /// exp(min over generators and grid points of log |f'|): the one-step
    /// worst case, > 1 already implies uniform expansion with C = 1.
    pub one_step_min_deriv: f64,
    pub pass: bool,
}

/// Fits |(f^i_omega)'(x)| >= C lambda^i over a grid of base points and
/// i <= horizon, with words chosen by the strategy; passes iff
/// lambda_est > 1. `Adversarial` bounds all words at once and is what the
/// classifier uses for its uniform verdict.
pub fn check_uniform_expansion(
    system: &GeneratorSystem,
    strategy: &WordStrategy,
    grid_size: usize,
    horizon: usize,
) -> Result<UniformExpansionReport> {
    if grid_size < 2 || horizon < 1 {
        return Err(Error::InvalidParameter(
            "uniform-expansion fit needs grid_size >= 2 and horizon >= 1".into(),
        ));
    }
    if let WordStrategy::Cycle { letters } = strategy {
        if letters.is_empty() {
            return Err(Error::InvalidParameter("cycle strategy needs letters".into()));
        }
        for &j in letters {
            system.generator(j)?;
        }
    }
    let circle = system.domain.kind == crate::domain::DomainKind::Circle;
    let nodes = if circle { grid_size } else { grid_size + 1 };
    let node = |k: usize| k as f64 / grid_size as f64;

    let mut one_step_min = f64::INFINITY;
    for g in &system.generators {
        for k in 0..nodes {
            let d = g.deriv(node(k)).abs();
            if d < 1e-300 {
                return Err(Error::DegenerateDerivative { x: node(k), deriv: d });
            }
            one_step_min = one_step_min.min(d);
        }
    }

    // Collect data points (i, log |(f^i)'(x)|) for the least-squares fit.
    let mut data: Vec<(f64, f64)> = Vec::new();
    match strategy {
        WordStrategy::Adversarial => {
            // u_{n+1}(x) = min_j [ log|f_j'(x)| + u_n(f_j(x)) ] on the grid,
            // with linear interpolation at image points. min_x u_n(x) is the
            // tightest n-step expansion any word can force.
            let interp = |u: &[f64], y: f64| -> f64 {
                let t = y * grid_size as f64;
                if circle {
                    let t = t.rem_euclid(grid_size as f64);
                    let k0 = t.floor() as usize % grid_size;
                    let frac = t - t.floor();
                    u[k0] * (1.0 - frac) + u[(k0 + 1) % grid_size] * frac
                } else {
                    let t = t.clamp(0.0, grid_size as f64);
                    let k0 = (t.floor() as usize).min(grid_size - 1);
                    let frac = t - k0 as f64;
                    u[k0] * (1.0 - frac) + u[k0 + 1] * frac
                }
            };
            let mut log_derivs: Vec<Vec<f64>> = Vec::with_capacity(system.d());
            let mut images: Vec<Vec<f64>> = Vec::with_capacity(system.d());
            for g in &system.generators {
                let mut ld = Vec::with_capacity(nodes);
                let mut im = Vec::with_capacity(nodes);
                for k in 0..nodes {
                    let x = node(k);
                    ld.push(g.deriv(x).abs().ln());
                    im.push(g.eval(x));
                }
                log_derivs.push(ld);
                images.push(im);
            }
            let mut u = vec![0.0f64; nodes];
            for n in 1..=horizon {
                let mut next = vec![f64::INFINITY; nodes];
                for k in 0..nodes {
                    for j in 0..system.d() {
                        let v = log_derivs[j][k] + interp(&u, images[j][k]);
                        if v < next[k] {
                            next[k] = v;
                        }
                    }
                }
                u = next;
                data.push((n as f64, u.iter().cloned().fold(f64::INFINITY, f64::min)));
            }
        }
        WordStrategy::Cycle { .. } | WordStrategy::Greedy => {
            for k in 0..nodes {
                let mut x = node(k);
                let mut sum = 0.0;
                for i in 1..=horizon {
                    let j = match strategy {
                        WordStrategy::Cycle { letters } => {
                            let forced = crate::ergodicity::child_letters(system, i - 1);
                            if forced.is_empty() {
                                break;
                            }
                            if system.mode == Mode::Sequence {
                                forced[0]
                            } else {
                                letters[(i - 1) % letters.len()]
                            }
                        }
                        WordStrategy::Greedy => match greedy_letter(system, x, i - 1) {
                            Some(j) => j,
                            None => break,
                        },
                        WordStrategy::Adversarial => unreachable!(),
                    };
                    let g = &system.generators[(j - 1) as usize];
                    let d = g.deriv(x).abs();
                    if d < 1e-300 {
                        return Err(Error::DegenerateDerivative { x, deriv: d });
                    }
                    sum += d.ln();
                    x = g.eval(x);
                    data.push((i as f64, sum));
                }
            }
        }
    }
    if data.is_empty() {
        return Err(Error::InvalidParameter(
            "no expansion data collected (sequence exhausted immediately?)".into(),
        ));
    }

    // Least-squares slope through the data; the intercept is then anchored
    // below every point so the fitted bound really holds on the data.
    let n = data.len() as f64;
    let mean_i = data.iter().map(|(i, _)| i).sum::<f64>() / n;
    let mean_g = data.iter().map(|(_, g)| g).sum::<f64>() / n;
    let var_i = data.iter().map(|(i, _)| (i - mean_i) * (i - mean_i)).sum::<f64>();
    let cov = data
        .iter()
        .map(|(i, g)| (i - mean_i) * (g - mean_g))
        .sum::<f64>();
    let slope = if var_i > 0.0 { cov / var_i } else { 0.0 };
    let log_c = data
        .iter()
        .map(|(i, g)| g - i * slope)
        .fold(f64::INFINITY, f64::min);
    Ok(UniformExpansionReport {
        strategy: strategy.clone(),
        grid: grid_size,
        horizon,
        lambda_est: slope.exp(),
        c_est: log_c.exp(),
        one_step_min_deriv: one_step_min,
        pass: slope > 1e-9,
    })
}

// ---------------------------------------------------------------------------
// Branch search
// ---------------------------------------------------------------------------

/// Search strategy for an expanding branch from a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum BranchStrategy {
    /// Pick the locally most-expanding generator at each step (smallest
    /// log theta; ties broken by lowest generator index).
    Greedy,
    /// Keep the `width` partial branches with the smallest log theta sums.
    Beam { width: usize },
    /// Enumerate every word up to `depth`, then extend the best leaf
    /// greedily to the horizon. Enumeration is capped at
    /// [`EXHAUSTIVE_WORD_CAP`] words.
    Exhaustive { depth: usize },
}

/// The branch a search settled on. `exponent` is the finite-horizon
/// Birkhoff average of log theta along the branch (negative = expanding).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchResult {
    pub word: Word,
    pub steps: usize,
    pub sum_log_theta: f64,
    pub exponent: f64,
}

fn greedy_letter(system: &GeneratorSystem, x: f64, depth: usize) -> Option<u32> {
    let allowed = crate::ergodicity::child_letters(system, depth);
    allowed
        .into_iter()
        .map(|j| (j, system.generators[(j - 1) as usize].deriv(x).abs()))
        .fold(None, |best: Option<(u32, f64)>, (j, d)| match best {
            Some((_, bd)) if bd >= d => best,
            _ => Some((j, d)),
        })
        .map(|(j, _)| j)
}

/// Extends a partial branch greedily until `horizon` letters, accumulating
/// the log-derivative total.
fn greedy_extend(
    system: &GeneratorSystem,
    mut x: f64,
    letters: &mut Vec<u32>,
    log_deriv_total: &mut f64,
    horizon: usize,
) -> Result<()> {
    while letters.len() < horizon {
        let Some(j) = greedy_letter(system, x, letters.len()) else {
            break;
        };
        let g = &system.generators[(j - 1) as usize];
        let d = g.deriv(x).abs();
        if d < 1e-300 {
            return Err(Error::DegenerateDerivative { x, deriv: d });
        }
        *log_deriv_total += d.ln();
        x = g.eval(x);
        letters.push(j);
    }
    Ok(())
}

/// Finds a branch from `x` minimizing the average of log theta over
/// `horizon` steps under the given strategy. In sequence mode the horizon
/// is truncated to the letters that remain.
pub fn search_expanding_branch(
    system: &GeneratorSystem,
    x: f64,
    horizon: usize,
    strategy: BranchStrategy,
) -> Result<BranchResult> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("branch horizon must be positive".into()));
    }
    let x = system.domain.canonicalize(x);
    // Internally we maximize the log-derivative total, which is exactly
    // minimizing the log theta sum.
    let (letters, log_deriv_total) = match strategy {
        BranchStrategy::Greedy => {
            let mut letters = Vec::with_capacity(horizon);
            let mut total = 0.0;
            greedy_extend(system, x, &mut letters, &mut total, horizon)?;
            (letters, total)
        }
        BranchStrategy::Beam { width } => {
            if width == 0 {
                return Err(Error::InvalidParameter("beam width must be positive".into()));
            }
            // Each candidate: (letters, current point, log-deriv total).
            let mut beam: Vec<(Vec<u32>, f64, f64)> = vec![(Vec::new(), x, 0.0)];
            for depth in 0..horizon {
                let allowed = crate::ergodicity::child_letters(system, depth);
                if allowed.is_empty() {
                    break;
                }
                let mut candidates = Vec::with_capacity(beam.len() * allowed.len());
                for (letters, pt, total) in &beam {
                    for &j in &allowed {
                        let g = &system.generators[(j - 1) as usize];
                        let d = g.deriv(*pt).abs();
                        if d < 1e-300 {
                            return Err(Error::DegenerateDerivative { x: *pt, deriv: d });
                        }
                        let mut next_letters = letters.clone();
                        next_letters.push(j);
                        candidates.push((next_letters, g.eval(*pt), total + d.ln()));
                    }
                }
                // Largest total first; ties resolved lexicographically so
                // the search is deterministic.
                candidates.sort_by(|a, b| {
                    b.2.partial_cmp(&a.2)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then_with(|| a.0.cmp(&b.0))
                });
                candidates.truncate(width);
                beam = candidates;
            }
            let best = beam.into_iter().next().ok_or_else(|| {
                Error::InvalidParameter("beam search produced no branch".into())
            })?;
            (best.0, best.2)
        }
        BranchStrategy::Exhaustive { depth } => {
            if depth == 0 {
                return Err(Error::InvalidParameter("exhaustive depth must be positive".into()));
            }
            let depth = depth.min(horizon);
            let words = (system.d() as u64).saturating_pow(depth as u32);
            if words > EXHAUSTIVE_WORD_CAP {
                return Err(Error::BudgetExhausted(format!(
                    "exhaustive search would enumerate {words} words (cap {EXHAUSTIVE_WORD_CAP}); \
                     lower the depth or use beam search"
                )));
            }
            // Depth-first over the word tree, keeping the best leaf.
            let mut best: Option<(Vec<u32>, f64, f64)> = None;
            let mut stack: Vec<(Vec<u32>, f64, f64)> = vec![(Vec::new(), x, 0.0)];
            while let Some((letters, pt, total)) = stack.pop() {
                let allowed = crate::ergodicity::child_letters(system, letters.len());
                if letters.len() == depth || allowed.is_empty() {
                    let better = match &best {
                        None => true,
                        Some((bl, _, bt)) => {
                            total > *bt + 1e-15 || (total > *bt - 1e-15 && letters < *bl)
                        }
                    };
                    if better {
                        best = Some((letters, pt, total));
                    }
                    continue;
                }
                // Push in reverse so lexicographically smaller words pop
                // first.
                for &j in allowed.iter().rev() {
                    let g = &system.generators[(j - 1) as usize];
                    let d = g.deriv(pt).abs();
                    if d < 1e-300 {
                        return Err(Error::DegenerateDerivative { x: pt, deriv: d });
                    }
                    let mut next_letters = letters.clone();
                    next_letters.push(j);
                    stack.push((next_letters, g.eval(pt), total + d.ln()));
                }
            }
            let (mut letters, pt, mut total) = best.ok_or_else(|| {
                Error::InvalidParameter("exhaustive search produced no branch".into())
            })?;
            greedy_extend(system, pt, &mut letters, &mut total, horizon)?;
            (letters, total)
        }
    };
    let steps = letters.len();
    if steps == 0 {
        return Err(Error::InvalidParameter(
            "no branch available from this point (sequence exhausted?)".into(),
        ));
    }
    Ok(BranchResult {
        word: Word::new(letters),
        steps,
        sum_log_theta: -log_deriv_total,
        exponent: -log_deriv_total / steps as f64,
    })
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyParams {
    pub samples: usize,
    pub horizon: usize,
    pub strategy: BranchStrategy,
    /// A sample counts as expandable when its branch exponent (average
    /// log theta) drops below this. The default -1e-6 separates genuinely
    /// negative exponents from numerical zero.
    pub a_threshold: f64,
    /// Fraction of samples a verdict needs ("almost every" proxy).
    pub quota: f64,
    /// Known exceptional fixed points: sampled points landing within
    /// 1e-9 of one are redrawn so null sets cannot poison verdicts.
    pub exceptional_points: Vec<f64>,
    /// At most this many distinct per-sample words are tried as common
    /// branches for the non-uniform verdict.
    pub candidate_cap: usize,
    pub seed: u64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams {
            samples: 200,
            horizon: 400,
            strategy: BranchStrategy::Greedy,
            a_threshold: DEFAULT_A_THRESHOLD,
            quota: 0.99,
            exceptional_points: Vec::new(),
            candidate_cap: 8,
            seed: 0,
        }
    }
}

const EXCEPTIONAL_RESAMPLE_TOL: f64 = 1e-9;

/// Per-sample outcome. The stored word is truncated to its first 32
/// letters to keep reports small.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRecord {
    pub x0: f64,
    pub word_prefix: Vec<u32>,
    pub steps: usize,
    /// Average log theta along the found branch.
    pub exponent: f64,
    /// Density of hyperbolic times along the found branch at margin
    /// 2 * |a_threshold| (diagnostic).
    pub hyperbolic_density: f64,
    pub expandable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub params: ClassifyParams,
    pub uniform_fit: UniformExpansionReport,
    pub records: Vec<SampleRecord>,
    pub expandable_fraction: f64,
    /// The uniform expansion margin: -(worst sample exponent) when every
    /// sample exponent is negative, absent otherwise.
    pub strong_a: Option<f64>,
    /// The common word that passed the non-uniform test, truncated to 64
    /// letters, with its full length alongside.
    pub common_branch_prefix: Option<Vec<u32>>,
    pub common_branch_len: Option<usize>,
    /// Fraction of samples served by the best common-branch candidate.
    pub common_branch_fraction: f64,
    /// Verdicts, ordered strongest to weakest; each implies the next.
    pub uniformly_expanding: bool,
    pub nonuniformly_expanding: bool,
    pub pointwise_expandable: bool,
}

/// Exponent of a fixed word evaluated at a point: average log theta of the
/// first `n` letters applied from x.
fn word_exponent_at(system: &GeneratorSystem, letters: &[u32], x: f64, n: usize) -> Result<f64> {
    let n = n.min(letters.len());
    if n == 0 {
        return Ok(0.0);
    }
    let mut x = system.domain.canonicalize(x);
    let mut total = 0.0;
    for &j in &letters[..n] {
        let g = &system.generators[(j - 1) as usize];
        let d = g.deriv(x).abs();
        if d < 1e-300 {
            return Err(Error::DegenerateDerivative { x, deriv: d });
        }
        total += d.ln();
        x = g.eval(x);
    }
    Ok(-total / n as f64)
}

/// Samples seeded uniform points, searches a branch from each, and issues
/// the three nested verdicts. The implication chain
/// uniform => non-uniform => expandable is enforced structurally,
/// mirroring the inclusions between the properties themselves.
pub fn classify_action(
    system: &GeneratorSystem,
    params: &ClassifyParams,
) -> Result<ClassificationReport> {
    if params.samples == 0 || params.horizon == 0 {
        return Err(Error::InvalidParameter(
            "classification needs positive samples and horizon".into(),
        ));
    }
    if !(params.quota > 0.0 && params.quota <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quota must lie in (0, 1], got {}",
            params.quota
        )));
    }
    let uniform_fit =
        check_uniform_expansion(system, &WordStrategy::Adversarial, 1024, 32)?;

    let records: Vec<SampleRecord> = (0..params.samples)
        .into_par_iter()
        .map(|i| -> Result<SampleRecord> {
            let mut rng = CounterRng::substream(params.seed, 30, i as u64);
            let mut x0 = rng.uniform(0.0, 1.0);
            // Redraw samples that land on known exceptional fixed points.
            for _ in 0..128 {
                let near = params
                    .exceptional_points
                    .iter()
                    .any(|p| system.domain.distance(x0, *p) < EXCEPTIONAL_RESAMPLE_TOL);
                if !near {
                    break;
                }
                x0 = rng.uniform(0.0, 1.0);
            }
            let branch = search_expanding_branch(system, x0, params.horizon, params.strategy)?;
            let orbit = system.compose_orbit(&branch.word, x0, branch.steps)?;
            let seq = LogPhiSequence::from_orbit(&orbit);
            let density = match hyperbolic_times(&seq, 2.0 * params.a_threshold.abs().max(1e-9)) {
                Ok(report) => report.density,
                Err(_) => 0.0,
            };
            let mut word_prefix = branch.word.indices.clone();
            word_prefix.truncate(32);
            Ok(SampleRecord {
                x0,
                word_prefix,
                steps: branch.steps,
                exponent: branch.exponent,
                hyperbolic_density: density,
                expandable: branch.exponent < params.a_threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Re-run the searches cheaply to recover full words for the common-
    // branch test: keep the most frequent distinct words, capped.
    let full_words: Vec<Vec<u32>> = (0..params.samples)
        .into_par_iter()
        .map(|i| -> Result<Vec<u32>> {
            let branch = search_expanding_branch(
                system,
                records[i].x0,
                params.horizon,
                params.strategy,
            )?;
            Ok(branch.word.indices)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts: Vec<(Vec<u32>, usize)> = Vec::new();
    for w in &full_words {
        match counts.iter_mut().find(|(c, _)| c == w) {
            Some((_, k)) => *k += 1,
            None => counts.push((w.clone(), 1)),
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    counts.truncate(params.candidate_cap.max(1));

    let mut best_common: Option<(Vec<u32>, f64)> = None;
    for (candidate, _) in &counts {
        let served = records
            .par_iter()
            .map(|r| -> Result<bool> {
                let e = word_exponent_at(system, candidate, r.x0, params.horizon)?;
                Ok(e < params.a_threshold)
            })
            .collect::<Result<Vec<bool>>>()?;
        let fraction = served.iter().filter(|s| **s).count() as f64 / records.len() as f64;
        if best_common.as_ref().map_or(true, |(_, f)| fraction > *f) {
            best_common = Some((candidate.clone(), fraction));
        }
    }

    let n = records.len() as f64;
    let expandable_fraction = records.iter().filter(|r| r.expandable).count() as f64 / n;
    let worst_exponent = records
        .iter()
        .map(|r| r.exponent)
        .fold(f64::NEG_INFINITY, f64::max);
    let strong_a = if worst_exponent < 0.0 { Some(-worst_exponent) } else { None };
    let common_branch_fraction = best_common.as_ref().map_or(0.0, |(_, f)| *f);

    let uniformly_expanding = uniform_fit.pass;
    let nonuniformly_expanding =
        uniformly_expanding || common_branch_fraction >= params.quota;
    let pointwise_expandable =
        nonuniformly_expanding || expandable_fraction >= params.quota;
    let (common_branch_prefix, common_branch_len) = match &best_common {
        Some((w, f)) if *f >= params.quota => {
            let mut prefix = w.clone();
            prefix.truncate(64);
            (Some(prefix), Some(w.len()))
        }
        _ => (None, None),
    };
    Ok(ClassificationReport {
        params: params.clone(),
        uniform_fit,
        records,
        expandable_fraction,
        strong_a,
        common_branch_prefix,
        common_branch_len,
        common_branch_fraction,
        uniformly_expanding,
        nonuniformly_expanding,
        pointwise_expandable,
    })
}

// ---------------------------------------------------------------------------
// Shortest expanding word at a point
// ---------------------------------------------------------------------------

/// Breadth-first search for the shortest word h with |h'(x)| > 1
/// (equivalently, sum of log theta < 0). Returns `None` when the word
/// budget runs out first (e.g. for isometries, where no such word exists).
pub fn backward_expanding_check(
    system: &GeneratorSystem,
    x: f64,
    budget: usize,
) -> Result<Option<BranchResult>> {
    if budget == 0 {
        return Err(Error::InvalidParameter("word budget must be positive".into()));
    }
    let x = system.domain.canonicalize(x);
    let mut queue: VecDeque<(Vec<u32>, f64, f64)> = VecDeque::new();
    queue.push_back((Vec::new(), x, 0.0));
    let mut processed = 0usize;
    while let Some((letters, pt, log_deriv_total)) = queue.pop_front() {
        if processed >= budget {
            break;
        }
        processed += 1;
        if log_deriv_total > 1e-12 {
            let steps = letters.len();
            return Ok(Some(BranchResult {
                word: Word::new(letters),
                steps,
                sum_log_theta: -log_deriv_total,
                exponent: -log_deriv_total / steps as f64,
            }));
        }
        for j in crate::ergodicity::child_letters(system, letters.len()) {
            let g = &system.generators[(j - 1) as usize];
            let d = g.deriv(pt).abs();
            if d < 1e-300 {
                return Err(Error::DegenerateDerivative { x: pt, deriv: d });
            }
            let mut next = letters.clone();
            next.push(j);
            queue.push_back((next, g.eval(pt), log_deriv_total + d.ln()));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Branches certified by a patch cover
// ---------------------------------------------------------------------------

/// One patch of an expansion cover: for every x in [lo, hi] the block map
/// named by `word` satisfies prod theta along the block <= sigma, i.e.
/// |(h_i)'| >= 1/sigma throughout the patch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverPatch {
    pub lo: f64,
    pub hi: f64,
    pub word: Vec<u32>,
    pub sigma: f64,
}

/// A branch assembled from cover blocks, with the a-priori exponent bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchCertificate {
    pub word: Word,
    pub letters: usize,
    pub blocks: usize,
    /// Measured average of log theta along the branch.
    pub exponent: f64,
    /// Guaranteed bound: exponent <= log(sigma_max) / k_max < 0, where
    /// k_max is the longest block word in the cover.
    pub certified_bound: f64,
    pub sigma_max: f64,
    pub max_block_len: usize,
}

const PATCH_EDGE_TOL: f64 = 1e-12;

/// Walks from x0, emitting whole blocks until at least `min_letters`
/// letters are out. At each block the current point selects, among the
/// patches containing it, the one whose block contracts inverse distances
/// most at that point (ties: first listed); the per-block log theta sum is
/// checked against log sigma as the block is emitted. Points outside every
/// patch raise [`Error::CoverGap`]; a block violating its own sigma raises
/// [`Error::InvalidBound`].
pub fn build_branch_from_cover(
    system: &GeneratorSystem,
    patches: &[CoverPatch],
    x0: f64,
    min_letters: usize,
) -> Result<BranchCertificate> {
    if patches.is_empty() || min_letters == 0 {
        return Err(Error::InvalidParameter(
            "cover walk needs at least one patch and one letter".into(),
        ));
    }
    let mut sigma_max = 0.0f64;
    let mut max_block_len = 0usize;
    for p in patches {
        if !(p.lo < p.hi) || !(p.sigma > 0.0 && p.sigma < 1.0) || p.word.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "patch [{}, {}] (word length {}, sigma {}) is malformed; need lo < hi, \
                 a nonempty word, and sigma in (0,1)",
                p.lo,
                p.hi,
                p.word.len(),
                p.sigma
            )));
        }
        for &j in &p.word {
            system.generator(j)?;
        }
        sigma_max = sigma_max.max(p.sigma);
        max_block_len = max_block_len.max(p.word.len());
    }
    if system.mode == Mode::Sequence {
        return Err(Error::InvalidParameter(
            "cover walks pick letters freely and need a semigroup system".into(),
        ));
    }

    // Log theta sum of a patch's block evaluated from x (the quantity the
    // patch's sigma must dominate).
    let block_sum = |p: &CoverPatch, mut x: f64| -> Result<(f64, f64)> {
        let mut sum = 0.0;
        for &j in &p.word {
            let g = &system.generators[(j - 1) as usize];
            sum += g.log_theta(x)?;
            x = g.eval(x);
        }
        Ok((sum, x))
    };

    let mut x = system.domain.canonicalize(x0);
    let mut letters: Vec<u32> = Vec::with_capacity(min_letters + max_block_len);
    let mut total_log_theta = 0.0f64;
    let mut blocks = 0usize;
    while letters.len() < min_letters {
        let mut chosen: Option<(&CoverPatch, f64, f64)> = None;
        for p in patches {
            if x < p.lo - PATCH_EDGE_TOL || x > p.hi + PATCH_EDGE_TOL {
                continue;
            }
            let (sum, endpoint) = block_sum(p, x)?;
            // Per-letter contraction decides between overlapping patches,
            // strictly better only, so ties keep the first listed patch.
            let rate = sum / p.word.len() as f64;
            if chosen
                .as_ref()
                .map_or(true, |(c, s, _)| rate < *s / c.word.len() as f64 - PATCH_EDGE_TOL)
            {
                chosen = Some((p, sum, endpoint));
            }
        }
        let (patch, sum, endpoint) = chosen.ok_or(Error::CoverGap { x })?;
        if sum > patch.sigma.ln() + PATCH_EDGE_TOL {
            return Err(Error::InvalidBound { bound: patch.sigma, sup: sum.exp() });
        }
        letters.extend_from_slice(&patch.word);
        total_log_theta += sum;
        blocks += 1;
        x = endpoint;
    }
    let n = letters.len();
    Ok(BranchCertificate {
        word: Word::new(letters),
        letters: n,
        blocks,
        exponent: total_log_theta / n as f64,
        certified_bound: sigma_max.ln() / max_block_len as f64,
        sigma_max,
        max_block_len,
    })
}

// ---------------------------------------------------------------------------
// Diffeomorphism obstruction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiffeoReport {
    pub word_len: usize,
    pub samples: usize,
    /// Monte Carlo estimate of the integral of |(f^n_omega)'| over the
    /// space for the given word; exactly 1 for diffeomorphisms.
    pub mean: f64,
    pub stderr: f64,
    pub abs_z: f64,
    /// Sample mean of (1/n) log |(f^n_omega)'|: by Jensen this must be
    /// <= 0 in the limit when the integral is 1, so derivative growth
    /// cannot hold across all of the space.
    pub mean_log_rate: f64,
    /// Fraction of samples with |(f^n_omega)'| > 1. Strictly less than 1
    /// whenever the integral check passes nontrivially.
    pub positive_fraction: f64,
    /// True when the estimate is within 4 standard errors of 1.
    pub pass: bool,
}

/// Monte Carlo check of the change-of-variables identity for invertible
/// generators: for the fixed word omega, the integral of |(f^n_omega)'(x)|
/// dx is exactly 1, which forbids uniform derivative growth. Every
/// generator must be a surjective diffeomorphism of the domain (degree 1
/// on the circle, endpoints fixed-range on the interval).
pub fn diffeo_obstruction_check(
    system: &GeneratorSystem,
    word: &Word,
    mc_samples: usize,
    seed: u64,
) -> Result<DiffeoReport> {
    if word.is_empty() || mc_samples < 2 {
        return Err(Error::InvalidParameter(
            "obstruction check needs a nonempty word and >= 2 samples".into(),
        ));
    }
    for (i, g) in system.generators.iter().enumerate() {
        let invertible = match system.domain.kind {
            crate::domain::DomainKind::Circle => g.degree() == 1,
            crate::domain::DomainKind::Interval => {
                g.eval(0.0).abs() < 1e-12 && (g.eval(1.0) - 1.0).abs() < 1e-12
            }
        };
        if !invertible {
            return Err(Error::InvalidParameter(format!(
                "generator {} is not a surjective diffeomorphism of the domain, so the \
                 total-variation identity does not apply",
                i + 1
            )));
        }
    }
    let n = word.len();
    system.check_word(word, n)?;
    let stats: Vec<(f64, f64)> = (0..mc_samples)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut point_rng = CounterRng::substream(seed, 21, i as u64);
            let mut x = point_rng.uniform(0.0, 1.0);
            let mut log_weight = 0.0f64;
            for &j in &word.indices[..n] {
                let g = &system.generators[(j - 1) as usize];
                let d = g.deriv(x).abs();
                if d < 1e-300 {
                    return Err(Error::DegenerateDerivative { x, deriv: d });
                }
                log_weight += d.ln();
                x = g.eval(x);
            }
            Ok((log_weight.exp(), log_weight))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = stats.len() as f64;
    let mean = stats.iter().map(|(w, _)| w).sum::<f64>() / m;
    let var = stats
        .iter()
        .map(|(w, _)| (w - mean) * (w - mean))
        .sum::<f64>()
        / (m - 1.0);
    let stderr = (var / m).sqrt();
    let mean_log_rate = stats.iter().map(|(_, l)| l).sum::<f64>() / (m * n as f64);
    let positive_fraction = stats.iter().filter(|(_, l)| *l > 0.0).count() as f64 / m;
    let dev = (mean - 1.0).abs();
    let abs_z = if stderr > 0.0 {
        dev / stderr
    } else if dev == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(DiffeoReport {
        word_len: n,
        samples: mc_samples,
        mean,
        stderr,
        abs_z,
        mean_log_rate,
        positive_fraction,
        pass: dev <= 4.0 * stderr,
    })
}
