//! Ergodic-behaviour diagnostics for generator systems.
//!
//! Five instruments, all grid- or orbit-based and fully deterministic under
//! a fixed seed:
//!
//! * [`covering_time`] — first iterate at which the image of a metric ball
//!   covers every grid cell.
//! * [`exactness_check`] — breadth-first accumulation of word-images of a
//!   ball until the grid is covered, with a narrow exemption for cells
//!   pinned by neutral common fixed points.
//! * [`backward_minimality_check`] — searches for finitely many words whose
//!   images of a given open set cover the whole space.
//! * [`equidistribution_test`] — Birkhoff averages of test observables with
//!   known integrals along policy-driven orbits.
//! * [`invariant_set_closure`] — smallest grid-cell envelope containing the
//!   seed cells and closed under every generator's forward image.
//!
//! Arc images are exact (endpoint lifts, see [`crate::arcs`]), so covering
//! verdicts do not depend on sampling density along the arc.

use crate::arcs::{CellGrid, DomainArc};
use crate::domain::DomainKind;
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::system::{GeneratorSystem, Mode, Word};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Default grid resolution for covering statements.
pub const DEFAULT_EPS_GRID: f64 = 1.0 / 1024.0;
/// Default word budget for breadth-first searches.
pub const DEFAULT_WORD_BUDGET: usize = 10_000;
/// Default amplitude of the symmetric orbit dither used by
/// [`equidistribution_test`]. Exactly representable and far below every
/// verdict tolerance; it only re-randomizes the low mantissa bits so that
/// integer-slope maps do not collapse floating-point orbits onto dyadic
/// fixed points.
pub const DEFAULT_DITHER: f64 = 1.0 / (1u64 << 40) as f64;

/// A point is accepted as fixed when every generator moves it less than
/// this.
const FIXED_POINT_TOL: f64 = 1e-9;
/// Neutrality threshold for derivative magnitudes at a fixed point.
const NEUTRAL_DERIV_TOL: f64 = 1e-9;
/// Number of sample points per cell when scanning for fixed points.
const CELL_SCAN_SAMPLES: usize = 8;

// ---------------------------------------------------------------------------
// Covering time
// ---------------------------------------------------------------------------

/// Outcome of a covering-time run. `time` is the first step at which the
/// image arc covered every grid cell, or `None` within the budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoveringOutcome {
    pub time: Option<usize>,
    /// Largest single-step covered fraction seen (diagnostic when `time`
    /// is `None`, e.g. for rotations where the arc never grows).
    pub max_fraction: f64,
    pub steps_used: usize,
    pub eps_grid: f64,
}

/// First n <= min(budget, word length) with f^n_omega(B(center, radius))
/// covering every grid cell (positive-length intersection with each one).
pub fn covering_time(
    system: &GeneratorSystem,
    word: &Word,
    center: f64,
    radius: f64,
    eps_grid: f64,
    budget: usize,
) -> Result<CoveringOutcome> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ball radius must be positive, got {radius}"
        )));
    }
    let steps = budget.min(word.len());
    system.check_word(word, steps)?;
    let mut arc = DomainArc::ball(&system.domain, center, radius);
    let mut best = 0.0f64;
    for n in 0..=steps {
        if n > 0 {
            let map = system.generator(word.indices[n - 1])?;
            arc = arc.image(&system.domain, map);
        }
        let mut grid = CellGrid::new(eps_grid)?;
        grid.mark_arc(system.domain.kind, &arc);
        let fraction = grid.fraction();
        best = best.max(fraction);
        if grid.complete() {
            return Ok(CoveringOutcome {
                time: Some(n),
                max_fraction: 1.0,
                steps_used: n,
                eps_grid,
            });
        }
    }
    Ok(CoveringOutcome { time: None, max_fraction: best, steps_used: steps, eps_grid })
}

// ---------------------------------------------------------------------------
// Neutral fixed-point exemptions
// ---------------------------------------------------------------------------

/// Cells that may be left uncovered by an exactness run: each one contains
/// a point fixed by every generator with all derivative magnitudes <= 1.
/// If the exempt cells exceed a small cap (max(2, cells/64)), the exemption
/// is voided entirely — systems that are neutral nearly everywhere (e.g.
/// the identity) must not pass vacuously.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExemptionMask {
    pub cells: Vec<usize>,
    pub voided: bool,
}

impl ExemptionMask {
    /// Effective per-cell mask after voiding.
    pub fn effective(&self, total_cells: usize) -> Vec<bool> {
        let mut mask = vec![false; total_cells];
        if !self.voided {
            for &k in &self.cells {
                if k < total_cells {
                    mask[k] = true;
                }
            }
        }
        mask
    }
}

/// Scans every grid cell for a common neutral fixed point.
pub fn neutral_fixed_cell_exemptions(
    system: &GeneratorSystem,
    total_cells: usize,
) -> ExemptionMask {
    let mut cells = Vec::new();
    let g = total_cells as f64;
    for k in 0..total_cells {
        let lo = k as f64 / g;
        let hi = (k + 1) as f64 / g;
        if let Some(p) = common_fixed_point_in(system, lo, hi) {
            let neutral = system
                .generators
                .iter()
                .all(|m| m.deriv(p).abs() <= 1.0 + NEUTRAL_DERIV_TOL);
            if neutral {
                cells.push(k);
            }
        }
    }
    let cap = 2usize.max(total_cells / 64);
    let voided = cells.len() > cap;
    ExemptionMask { cells, voided }
}

/// Signed displacement of the first generator, continuous across the cell:
/// on the circle the integer part is pinned at the cell midpoint.
fn displacement_fn(system: &GeneratorSystem, lo: f64, hi: f64) -> impl Fn(f64) -> f64 + '_ {
    let map = &system.generators[0];
    let kind = system.domain.kind;
    let k_mid = match kind {
        DomainKind::Circle => {
            let mid = 0.5 * (lo + hi);
            (map.lift(mid) - mid).round()
        }
        DomainKind::Interval => 0.0,
    };
    move |x: f64| map.lift(x) - x - k_mid
}

/// Looks for a point in [lo, hi] fixed by every generator: direct sample
/// hits first, then a bisection on the first generator's displacement with
/// verification against all generators.
fn common_fixed_point_in(system: &GeneratorSystem, lo: f64, hi: f64) -> Option<f64> {
    let fixed_err = |x: f64| -> f64 {
        system
            .generators
            .iter()
            .map(|m| system.domain.distance(m.eval(x), x))
            .fold(0.0, f64::max)
    };
    let samples: Vec<f64> = (0..=CELL_SCAN_SAMPLES)
        .map(|t| lo + (hi - lo) * t as f64 / CELL_SCAN_SAMPLES as f64)
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for &s in &samples {
        let e = fixed_err(s);
        if best.map_or(true, |(be, _)| e < be) {
            best = Some((e, s));
        }
    }
    if let Some((e, s)) = best {
        if e <= FIXED_POINT_TOL {
            return Some(s);
        }
    }
    // Refine a sign change of the first generator's displacement, then
    // demand that the root is fixed by all generators.
    let disp = displacement_fn(system, lo, hi);
    for w in samples.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (da, db) = (disp(a), disp(b));
        if !(da * db < 0.0) {
            continue;
        }
        let mut sign_a = da.signum();
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            let dm = disp(m);
            if dm.signum() == sign_a {
                a = m;
                sign_a = dm.signum();
            } else {
                b = m;
            }
        }
        let p = 0.5 * (a + b);
        if fixed_err(p) <= FIXED_POINT_TOL {
            return Some(p);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Exactness
// ---------------------------------------------------------------------------

/// A word whose image contributed new cells to the accumulated cover.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverWitness {
    pub word: Vec<u32>,
    pub arc: DomainArc,
    pub new_cells: usize,
}

/// Accumulated covering state of an exactness run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverState {
    pub eps_grid: f64,
    pub cells: usize,
    pub covered: Vec<bool>,
    pub fraction: f64,
    /// Complete relative to the (possibly voided) exemption mask.
    pub complete: bool,
    pub exemptions: ExemptionMask,
    /// Words whose images were accumulated, the empty word included.
    pub words_processed: usize,
    pub max_depth: usize,
    /// Only words that added at least one new cell are recorded.
    pub witnesses: Vec<CoverWitness>,
}

/// Breadth-first accumulation of the images f_omega(B(center, radius))
/// over all words omega (shortest first) until every non-exempt grid cell
/// is covered or the word budget runs out.
pub fn exactness_check(
    system: &GeneratorSystem,
    center: f64,
    radius: f64,
    eps_grid: f64,
    budget: usize,
) -> Result<CoverState> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ball radius must be positive, got {radius}"
        )));
    }
    if budget == 0 {
        return Err(Error::InvalidParameter("word budget must be positive".into()));
    }
    let mut grid = CellGrid::new(eps_grid)?;
    let exemptions = neutral_fixed_cell_exemptions(system, grid.cells);
    let exempt_mask = exemptions.effective(grid.cells);

    let ball = DomainArc::ball(&system.domain, center, radius);
    let mut witnesses = Vec::new();
    let mut words_processed = 0usize;
    let mut max_depth = 0usize;
    let mut queue: VecDeque<(Vec<u32>, DomainArc)> = VecDeque::new();
    queue.push_back((Vec::new(), ball));
    while let Some((letters, arc)) = queue.pop_front() {
        if words_processed >= budget {
            break;
        }
        words_processed += 1;
        max_depth = max_depth.max(letters.len());
        let added = grid.mark_arc(system.domain.kind, &arc);
        if added > 0 {
            witnesses.push(CoverWitness { word: letters.clone(), arc, new_cells: added });
        }
        if grid.complete_with_exemptions(&exempt_mask) {
            break;
        }
        for j in child_letters(system, letters.len()) {
            let map = system.generator(j)?;
            let next_arc = arc.image(&system.domain, map);
            let mut next_letters = letters.clone();
            next_letters.push(j);
            queue.push_back((next_letters, next_arc));
        }
    }
    let complete = grid.complete_with_exemptions(&exempt_mask);
    Ok(CoverState {
        eps_grid,
        cells: grid.cells,
        fraction: grid.fraction(),
        covered: grid.covered,
        complete,
        exemptions,
        words_processed,
        max_depth,
        witnesses,
    })
}

/// Letters available after `depth` steps: all of them in semigroup mode, a
/// single forced letter (or none, past the end) in sequence mode.
pub(crate) fn child_letters(system: &GeneratorSystem, depth: usize) -> Vec<u32> {
    match system.mode {
        Mode::Semigroup => (1..=system.d() as u32).collect(),
        Mode::Sequence => {
            let next = depth + 1;
            if next <= system.d() {
                vec![next as u32]
            } else {
                Vec::new()
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Backward minimality
// ---------------------------------------------------------------------------

/// Outcome of a minimality search: when `cover_words` is `Some`, the images
/// of the open set under exactly those words cover every grid cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalityOutcome {
    pub eps_grid: f64,
    pub cells: usize,
    pub complete: bool,
    pub cover_words: Option<Vec<Vec<u32>>>,
    pub fraction: f64,
    pub words_processed: usize,
    pub max_depth: usize,
}

/// Searches words h (shortest first) collecting h(U) until the grid is
/// covered. Returns the contributing words; `None` in `cover_words` means
/// the budget ran out first. If U already covers the space the list is
/// just the empty word.
pub fn backward_minimality_check(
    system: &GeneratorSystem,
    open_set: &[DomainArc],
    eps_grid: f64,
    budget: usize,
) -> Result<MinimalityOutcome> {
    if open_set.is_empty() || open_set.iter().any(|a| a.len <= 0.0) {
        return Err(Error::InvalidParameter(
            "the open set must be a nonempty list of positive-length arcs".into(),
        ));
    }
    if budget == 0 {
        return Err(Error::InvalidParameter("word budget must be positive".into()));
    }
    let mut grid = CellGrid::new(eps_grid)?;
    let mut contributors: Vec<Vec<u32>> = Vec::new();
    let mut words_processed = 0usize;
    let mut max_depth = 0usize;
    let mut complete = false;
    let mut queue: VecDeque<(Vec<u32>, Vec<DomainArc>)> = VecDeque::new();
    queue.push_back((Vec::new(), open_set.to_vec()));
    while let Some((letters, arcs)) = queue.pop_front() {
        if words_processed >= budget {
            break;
        }
        words_processed += 1;
        max_depth = max_depth.max(letters.len());
        let mut added = 0;
        for arc in &arcs {
            added += grid.mark_arc(system.domain.kind, arc);
        }
        if added > 0 {
            contributors.push(letters.clone());
        }
        if grid.complete() {
            complete = true;
            break;
        }
        for j in child_letters(system, letters.len()) {
            let map = system.generator(j)?;
            let next_arcs: Vec<DomainArc> =
                arcs.iter().map(|a| a.image(&system.domain, map)).collect();
            let mut next_letters = letters.clone();
            next_letters.push(j);
            queue.push_back((next_letters, next_arcs));
        }
    }
    Ok(MinimalityOutcome {
        eps_grid,
        cells: grid.cells,
        complete,
        cover_words: if complete { Some(contributors) } else { None },
        fraction: grid.fraction(),
        words_processed,
        max_depth,
    })
}

// ---------------------------------------------------------------------------
// Equidistribution
// ---------------------------------------------------------------------------

/// How the orbit picks its generator at each step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum BranchPolicy {
    /// Cycle through a fixed letter pattern.
    Cycle { letters: Vec<u32> },
    /// Always apply the locally most-expanding generator (ties: lowest
    /// index).
    Greedy,
    /// Uniform random letter per step, drawn from the run's seed.
    Random,
}

impl BranchPolicy {
    pub fn describe(&self) -> String {
        match self {
            BranchPolicy::Cycle { letters } => format!("cycle{letters:?}"),
            BranchPolicy::Greedy => "greedy".into(),
            BranchPolicy::Random => "random".into(),
        }
    }
}

/// Test observables with analytically known Lebesgue integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestObservable {
    /// Constant 1; integral 1. Birkhoff averages match it exactly, which
    /// pins down normalization bugs.
    One,
    /// cos(2 pi k x); integral 0.
    Cos { k: u32 },
    /// sin(2 pi k x); integral 0.
    Sin { k: u32 },
    /// Continuous indicator approximation: 1 on [lo, hi], 0 outside
    /// [lo - ramp, hi + ramp], linear in between; integral (hi-lo) + ramp.
    Plateau { lo: f64, hi: f64, ramp: f64 },
}

impl TestObservable {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TestObservable::One => Ok(()),
            TestObservable::Cos { k } | TestObservable::Sin { k } => {
                if k == 0 {
                    Err(Error::InvalidParameter(
                        "trig observables need frequency k >= 1".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            TestObservable::Plateau { lo, hi, ramp } => {
                if !(ramp > 0.0) || !(lo <= hi) || lo - ramp < 0.0 || hi + ramp > 1.0 {
                    Err(Error::InvalidParameter(format!(
                        "plateau needs 0 <= lo-ramp, lo <= hi, hi+ramp <= 1; \
                         got lo={lo} hi={hi} ramp={ramp}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestObservable::One => 1.0,
            TestObservable::Cos { k } => (2.0 * std::f64::consts::PI * k as f64 * x).cos(),
            TestObservable::Sin { k } => (2.0 * std::f64::consts::PI * k as f64 * x).sin(),
            TestObservable::Plateau { lo, hi, ramp } => {
                if x >= lo && x <= hi {
                    1.0
                } else if x > lo - ramp && x < lo {
                    (x - (lo - ramp)) / ramp
                } else if x > hi && x < hi + ramp {
                    1.0 - (x - hi) / ramp
                } else {
                    0.0
                }
            }
        }
    }

    /// Exact Lebesgue integral over the space.
    pub fn integral(&self) -> f64 {
        match *self {
            TestObservable::One => 1.0,
            TestObservable::Cos { .. } | TestObservable::Sin { .. } => 0.0,
            TestObservable::Plateau { lo, hi, ramp } => (hi - lo) + ramp,
        }
    }

    pub fn norm_inf(&self) -> f64 {
        1.0
    }

    pub fn label(&self) -> String {
        match *self {
            TestObservable::One => "one".into(),
            TestObservable::Cos { k } => format!("cos(2pi*{k}x)"),
            TestObservable::Sin { k } => format!("sin(2pi*{k}x)"),
            TestObservable::Plateau { lo, hi, ramp } => {
                format!("plateau[{lo},{hi}]~{ramp}")
            }
        }
    }
}

/// Default verdict tolerance: a 10-standard-deviation central-limit
/// allowance for bounded observables, 10 * ||phi||_inf / sqrt(horizon).
pub fn equidistribution_tolerance(observable: &TestObservable, horizon: usize) -> f64 {
    10.0 * observable.norm_inf() / (horizon as f64).sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservableOutcome {
    pub label: String,
    pub integral: f64,
    /// max over initial points of |Birkhoff average - integral|.
    pub worst_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquidistributionReport {
    pub horizon: usize,
    pub init_points: usize,
    pub policy: BranchPolicy,
    pub dither: f64,
    pub seed: u64,
    pub observables: Vec<ObservableOutcome>,
    /// deviations[point][observable].
    pub per_point_deviations: Vec<Vec<f64>>,
    pub pass: bool,
}

/// RNG stream tags for the three independent randomness sources.
const STREAM_INIT: u64 = 0;
const STREAM_DITHER: u64 = 1;
const STREAM_LETTERS: u64 = 2;

/// Walks one seeded orbit under the policy, calling `visit(step, x)` with
/// the pre-step point. All equidistribution consumers share this walker so
/// their trajectories agree bit for bit.
fn walk_policy_orbit<F: FnMut(usize, f64)>(
    system: &GeneratorSystem,
    policy: &BranchPolicy,
    horizon: usize,
    seed: u64,
    dither: f64,
    point: u64,
    mut visit: F,
) {
    let d = system.d() as u64;
    let mut init_rng = CounterRng::substream(seed, STREAM_INIT, point);
    let mut dither_rng = CounterRng::substream(seed, STREAM_DITHER, point);
    let mut letter_rng = CounterRng::substream(seed, STREAM_LETTERS, point);
    let mut x = init_rng.uniform(0.0, 1.0);
    for step in 0..horizon {
        visit(step, x);
        let j = match policy {
            BranchPolicy::Cycle { letters } => letters[step % letters.len()],
            BranchPolicy::Greedy => {
                let mut best_j = 1u32;
                let mut best_d = f64::NEG_INFINITY;
                for (idx, g) in system.generators.iter().enumerate() {
                    let dv = g.deriv(x).abs();
                    if dv > best_d {
                        best_d = dv;
                        best_j = idx as u32 + 1;
                    }
                }
                best_j
            }
            BranchPolicy::Random => letter_rng.below(d) as u32 + 1,
        };
        x = system.generators[(j - 1) as usize].eval(x);
        if dither > 0.0 {
            let u = dither_rng.next_f64() - 0.5;
            x = system.domain.canonicalize(x + dither * u);
        }
    }
}

fn validate_equidistribution_inputs(
    system: &GeneratorSystem,
    policy: &BranchPolicy,
    observables: &[TestObservable],
    horizon: usize,
    dither: Option<f64>,
) -> Result<f64> {
    if system.mode == Mode::Sequence {
        return Err(Error::InvalidParameter(
            "equidistribution runs need a semigroup system; sequence words \
             cannot reach long horizons"
                .into(),
        ));
    }
    if horizon == 0 || observables.is_empty() {
        return Err(Error::InvalidParameter(
            "horizon and observable list must be nonempty".into(),
        ));
    }
    for obs in observables {
        obs.validate()?;
    }
    if let BranchPolicy::Cycle { letters } = policy {
        if letters.is_empty() {
            return Err(Error::InvalidParameter("cycle policy needs letters".into()));
        }
        for &j in letters {
            system.generator(j)?;
        }
    }
    let dither = dither.unwrap_or(DEFAULT_DITHER);
    if !(0.0..0.5).contains(&dither) {
        return Err(Error::InvalidParameter(format!(
            "dither amplitude must lie in [0, 0.5), got {dither}"
        )));
    }
    Ok(dither)
}

/// Running Birkhoff averages of the observables along the orbit of one
/// seeded initial point (the same orbit [`equidistribution_test`] walks
/// for that point index), downsampled to at most `max_rows` rows of
/// (steps so far, averages per observable).
pub fn running_birkhoff_averages(
    system: &GeneratorSystem,
    policy: &BranchPolicy,
    observables: &[TestObservable],
    horizon: usize,
    seed: u64,
    dither: Option<f64>,
    point: u64,
    max_rows: usize,
) -> Result<Vec<(usize, Vec<f64>)>> {
    let dither =
        validate_equidistribution_inputs(system, policy, observables, horizon, dither)?;
    if max_rows == 0 {
        return Err(Error::InvalidParameter("max_rows must be positive".into()));
    }
    let stride = horizon.div_ceil(max_rows).max(1);
    let mut sums = vec![0.0f64; observables.len()];
    let mut rows = Vec::with_capacity(horizon.div_ceil(stride));
    walk_policy_orbit(system, policy, horizon, seed, dither, point, |step, x| {
        for (s, obs) in sums.iter_mut().zip(observables.iter()) {
            *s += obs.eval(x);
        }
        let n = step + 1;
        if n % stride == 0 || n == horizon {
            rows.push((n, sums.iter().map(|s| s / n as f64).collect()));
        }
    });
    Ok(rows)
}

/// Runs Birkhoff averages of the observables along `init_points` orbits of
/// length `horizon` and compares them to the exact integrals. `dither` of
/// `None` applies [`DEFAULT_DITHER`]; `Some(0.0)` disables dithering.
pub fn equidistribution_test(
    system: &GeneratorSystem,
    policy: &BranchPolicy,
    observables: &[TestObservable],
    horizon: usize,
    init_points: usize,
    seed: u64,
    dither: Option<f64>,
) -> Result<EquidistributionReport> {
    let dither =
        validate_equidistribution_inputs(system, policy, observables, horizon, dither)?;
    if init_points == 0 {
        return Err(Error::InvalidParameter("init point count must be positive".into()));
    }

    let per_point: Vec<Vec<f64>> = (0..init_points)
        .into_par_iter()
        .map(|p| {
            let mut sums = vec![0.0f64; observables.len()];
            walk_policy_orbit(system, policy, horizon, seed, dither, p as u64, |_, x| {
                for (s, obs) in sums.iter_mut().zip(observables.iter()) {
                    *s += obs.eval(x);
                }
            });
            sums.iter()
                .zip(observables.iter())
                .map(|(s, obs)| (s / horizon as f64 - obs.integral()).abs())
                .collect()
        })
        .collect();

    let outcomes: Vec<ObservableOutcome> = observables
        .iter()
        .enumerate()
        .map(|(i, obs)| {
            let worst = per_point
                .iter()
                .map(|row| row[i])
                .fold(0.0f64, f64::max);
            let tolerance = equidistribution_tolerance(obs, horizon);
            ObservableOutcome {
                label: obs.label(),
                integral: obs.integral(),
                worst_deviation: worst,
                tolerance,
                pass: worst <= tolerance,
            }
        })
        .collect();
    let pass = outcomes.iter().all(|o| o.pass);
    Ok(EquidistributionReport {
        horizon,
        init_points,
        policy: policy.clone(),
        dither,
        seed,
        observables: outcomes,
        per_point_deviations: per_point,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Invariant-set closure
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosureOutcome {
    pub eps_grid: f64,
    pub cells: usize,
    pub covered: Vec<bool>,
    pub fraction: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Grows the seed cells under forward images of every generator until no
/// new cell appears (converged) or `max_iters` sweeps have run. The result
/// is monotone in the seed set and idempotent once converged.
pub fn invariant_set_closure(
    system: &GeneratorSystem,
    seed_cells: &[usize],
    eps_grid: f64,
    max_iters: usize,
) -> Result<ClosureOutcome> {
    let mut grid = CellGrid::new(eps_grid)?;
    if seed_cells.is_empty() {
        return Err(Error::InvalidParameter("seed cell list must be nonempty".into()));
    }
    for &k in seed_cells {
        if k >= grid.cells {
            return Err(Error::InvalidParameter(format!(
                "seed cell {k} outside 0..{}",
                grid.cells
            )));
        }
        grid.covered[k] = true;
    }
    let g = grid.cells as f64;
    let mut frontier: Vec<usize> = {
        let mut f: Vec<usize> = seed_cells.to_vec();
        f.sort_unstable();
        f.dedup();
        f
    };
    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        let snapshot = grid.covered.clone();
        for &k in &frontier {
            let cell_arc = DomainArc { start: k as f64 / g, len: 1.0 / g };
            for map in &system.generators {
                let img = cell_arc.image(&system.domain, map);
                grid.mark_arc(system.domain.kind, &img);
            }
        }
        frontier = grid
            .covered
            .iter()
            .zip(snapshot.iter())
            .enumerate()
            .filter(|(_, (now, before))| **now && !**before)
            .map(|(k, _)| k)
            .collect();
        if frontier.is_empty() {
            converged = true;
            break;
        }
    }
    Ok(ClosureOutcome {
        eps_grid,
        cells: grid.cells,
        fraction: grid.fraction(),
        covered: grid.covered,
        converged,
        iterations,
    })
}
