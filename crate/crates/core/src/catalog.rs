//! Ready-made example systems.
//!
//! Three families are shipped:
//!
//! * the degree-2 circle cover (`doubling_system`), the canonical
//!   uniformly expanding action;
//! * its trigonometric perturbations (`perturbed_doubling`), still
//!   expanding but with nontrivial distortion;
//! * a two-generator interval action (`interval_example`) built from
//!   monotone splines: one generator attracts toward 0, the other repels
//!   from 0, both fix only the endpoints, and a middle region
//!   [a, b] traps orbits while always offering a generator with
//!   derivative above 1. No single word expands everywhere — which
//!   generator to apply depends on where the orbit currently sits — so
//!   the action is pointwise expandable without a common expanding word.
//!
//! `verify_example_conditions` checks the six structural conditions that
//! make the interval example work, each yielding a witness string;
//! `reach_trapping_region` and `staying_branch` realize the dynamics the
//! conditions promise.

use crate::classify::CoverPatch;
use crate::domain::{DomainKind, DomainSpace};
use crate::error::{Error, Result};
use crate::map::{MapFamily, SmoothMap1D};
use crate::spline::MonotoneSpline;
use crate::system::{GeneratorSystem, Mode, Word};
use serde::{Deserialize, Serialize};

/// The degree-2 circle cover x -> 2x (mod 1), alone as a semigroup.
pub fn doubling_system() -> GeneratorSystem {
    let map = SmoothMap1D::new(
        DomainSpace::circle(),
        MapFamily::Affine { slope: 2, offset: 0.0 },
        None,
    )
    .expect("affine degree-2 map is always valid");
    GeneratorSystem::new(DomainSpace::circle(), vec![map], Mode::Semigroup)
        .expect("single valid generator")
}

/// x -> 2x + eps sin(2 pi x)/(2 pi) (mod 1). Requires |eps| < 2 so the
/// derivative 2 + eps cos(2 pi x) stays positive; the map is then still an
/// expanding degree-2 cover whenever |eps| < 1.
pub fn perturbed_doubling(eps: f64) -> Result<GeneratorSystem> {
    let map = SmoothMap1D::new(
        DomainSpace::circle(),
        MapFamily::TrigPerturbed { degree: 2, eps },
        None,
    )?;
    GeneratorSystem::new(DomainSpace::circle(), vec![map], Mode::Semigroup)
}

/// Region parameters for the two-generator interval example:
/// 0 < a < c1 < c2 < b < 1. [a, b] is the trapping region; [a, c1] and
/// [c2, b] are the entry bands where a designated generator expands; on
/// the middle [c1, c2] at least one generator expands at every point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalExampleParams {
    pub a: f64,
    pub c1: f64,
    pub c2: f64,
    pub b: f64,
}

impl IntervalExampleParams {
    pub fn new(a: f64, c1: f64, c2: f64, b: f64) -> Result<Self> {
        if !(0.0 < a && a < c1 && c1 < c2 && c2 < b && b < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "region parameters must satisfy 0 < a < c1 < c2 < b < 1, \
                 got a={a}, c1={c1}, c2={c2}, b={b}"
            )));
        }
        Ok(IntervalExampleParams { a, c1, c2, b })
    }
}

impl Default for IntervalExampleParams {
    fn default() -> Self {
        IntervalExampleParams { a: 0.2, c1: 0.35, c2: 0.55, b: 0.8 }
    }
}

/// Letter (1-based) of the generator attracted to 0 (f0).
pub const ATTRACTING_LETTER: u32 = 1;
/// Letter (1-based) of the generator repelled from 0 (f1).
pub const REPELLING_LETTER: u32 = 2;

fn attracting_spline() -> MonotoneSpline {
    MonotoneSpline::new(
        vec![0.0, 0.2, 0.35, 0.6, 0.9, 1.0],
        vec![0.0, 0.10, 0.22, 0.51, 0.875, 1.0],
        vec![0.5, 0.55, 1.1, 1.2, 1.15, 1.0],
    )
    .expect("attracting spline data is Fritsch-Carlson valid")
}

fn repelling_spline() -> MonotoneSpline {
    MonotoneSpline::new(
        vec![0.0, 0.1, 0.35, 0.55, 0.75, 1.0],
        vec![0.0, 0.20, 0.51, 0.745, 0.83, 1.0],
        vec![3.0, 1.45, 1.15, 1.12, 0.30, 0.9],
    )
    .expect("repelling spline data is Fritsch-Carlson valid")
}

/// Builds the two-generator interval system and verifies all structural
/// conditions for the given region parameters. Construction fails with
/// [`Error::InfeasibleExample`] naming the first violated condition.
///
/// Generator 1 (letter [`ATTRACTING_LETTER`]) fixes 0 and 1 with
/// derivatives 1/2 and 1; generator 2 (letter [`REPELLING_LETTER`]) fixes
/// them with derivatives 3 and 9/10. log(1/2)/log(3) is irrational (no
/// positive powers of 2 and 3 coincide), so the two multipliers at 0 are
/// non-resonant.
pub fn interval_example(params: &IntervalExampleParams) -> Result<GeneratorSystem> {
    IntervalExampleParams::new(params.a, params.c1, params.c2, params.b)?;
    let f0 = SmoothMap1D::new(
        DomainSpace::interval(),
        MapFamily::Spline { spline: attracting_spline() },
        None,
    )?;
    let f1 = SmoothMap1D::new(
        DomainSpace::interval(),
        MapFamily::Spline { spline: repelling_spline() },
        None,
    )?;
    let system =
        GeneratorSystem::new(DomainSpace::interval(), vec![f0, f1], Mode::Semigroup)?;
    let report = verify_example_conditions(&system, params)?;
    if !report.all_pass {
        let failed = report
            .checks()
            .iter()
            .filter(|(_, c)| !c.pass)
            .map(|(name, c)| format!("{name}: {w}", w = c.witness))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::InfeasibleExample(failed));
    }
    Ok(system)
}

/// One verified structural condition with a human-readable witness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub pass: bool,
    pub witness: String,
}

/// Outcome of [`verify_example_conditions`]: each field is one structural
/// condition of the interval example.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleConditionReport {
    /// Both generators are increasing interval maps whose only fixed
    /// points are 0 and 1 (checked by a sign scan of f(x) - x on 2^14
    /// interior grid points).
    pub interval_diffeos_fixing_endpoints: ConditionCheck,
    /// Derivatives at the fixed points: f0'(0) < 1, f0'(1) = 1,
    /// f1'(0) > 1, f1'(1) <= 1 (equalities to 1e-9).
    pub endpoint_derivative_profile: ConditionCheck,
    /// log f0'(0) / log f1'(0) is irrational; certified exactly for the
    /// shipped multipliers (1/2, 3), since powers of 2 never equal powers
    /// of 3.
    pub nonresonant_multipliers: ConditionCheck,
    /// f0([c1, b]) and f1([a, c2]) both land inside [a, b] (monotone
    /// endpoint images plus a 2^12 grid scan).
    pub trapping_containment: ConditionCheck,
    /// f1' > 1 throughout [a, c1] and f0' > 1 throughout [c2, b]
    /// (2^12 grid scan per band).
    pub entry_expansion: ConditionCheck,
    /// max(f0', f1') > 1 throughout the middle band [c1, c2].
    pub middle_joint_expansion: ConditionCheck,
    pub all_pass: bool,
}

impl ExampleConditionReport {
    /// The checks in order, with stable names (for printing/errors).
    pub fn checks(&self) -> Vec<(&'static str, &ConditionCheck)> {
        vec![
            ("interval_diffeos_fixing_endpoints", &self.interval_diffeos_fixing_endpoints),
            ("endpoint_derivative_profile", &self.endpoint_derivative_profile),
            ("nonresonant_multipliers", &self.nonresonant_multipliers),
            ("trapping_containment", &self.trapping_containment),
            ("entry_expansion", &self.entry_expansion),
            ("middle_joint_expansion", &self.middle_joint_expansion),
        ]
    }
}

const FIXED_POINT_SCAN: usize = 1 << 14;
const REGION_SCAN: usize = 1 << 12;
const ENDPOINT_TOL: f64 = 1e-9;

fn grid_min<F: Fn(f64) -> f64>(lo: f64, hi: f64, n: usize, f: F) -> (f64, f64) {
    let mut best = (f64::INFINITY, lo);
    for k in 0..=n {
        let x = lo + (hi - lo) * k as f64 / n as f64;
        let v = f(x);
        if v < best.0 {
            best = (v, x);
        }
    }
    (best.0, best.1)
}

fn grid_max<F: Fn(f64) -> f64>(lo: f64, hi: f64, n: usize, f: F) -> (f64, f64) {
    let (m, x) = grid_min(lo, hi, n, |x| -f(x));
    (-m, x)
}

/// Verifies the structural conditions of the interval example on any
/// two-generator system. Failures are data (the report says which
/// condition fails and why), not errors; only a wrong generator count is
/// rejected outright.
pub fn verify_example_conditions(
    system: &GeneratorSystem,
    params: &IntervalExampleParams,
) -> Result<ExampleConditionReport> {
    IntervalExampleParams::new(params.a, params.c1, params.c2, params.b)?;
    if system.d() != 2 {
        return Err(Error::InvalidParameter(format!(
            "the interval-example conditions concern exactly 2 generators, got {}",
            system.d()
        )));
    }
    let f0 = &system.generators[0];
    let f1 = &system.generators[1];
    let &IntervalExampleParams { a, c1, c2, b } = params;

    // (1) increasing interval maps fixing exactly {0, 1}.
    let condition1 = if system.domain.kind != DomainKind::Interval {
        ConditionCheck {
            pass: false,
            witness: "generators act on the circle, not the interval".into(),
        }
    } else {
        let mut pass = true;
        let mut notes: Vec<String> = Vec::new();
        for (label, g) in [("f0", f0), ("f1", f1)] {
            let at0 = g.eval(0.0);
            let at1 = g.eval(1.0);
            if at0.abs() > 1e-12 || (at1 - 1.0).abs() > 1e-12 {
                pass = false;
                notes.push(format!("{label} moves an endpoint: f(0)={at0}, f(1)={at1}"));
                continue;
            }
            let mut crossings = 0usize;
            let mut prev = g.eval(1.0 / FIXED_POINT_SCAN as f64) - 1.0 / FIXED_POINT_SCAN as f64;
            let mut where_at = 0.0;
            for k in 2..FIXED_POINT_SCAN {
                let x = k as f64 / FIXED_POINT_SCAN as f64;
                let d = g.eval(x) - x;
                if d == 0.0 || (d.signum() != prev.signum() && prev != 0.0) {
                    crossings += 1;
                    where_at = x;
                }
                prev = d;
            }
            if crossings > 0 {
                pass = false;
                notes.push(format!(
                    "{label} has {crossings} interior fixed-point crossing(s), e.g. near x={where_at}"
                ));
            } else {
                notes.push(format!("{label}: displacement keeps one sign on (0,1)"));
            }
        }
        ConditionCheck { pass, witness: notes.join("; ") }
    };

    // (2) endpoint derivative profile.
    let d0_at0 = f0.deriv(0.0);
    let d0_at1 = f0.deriv(1.0);
    let d1_at0 = f1.deriv(0.0);
    let d1_at1 = f1.deriv(1.0);
    let condition2 = {
        let pass = d0_at0 < 1.0
            && (d0_at1 - 1.0).abs() <= ENDPOINT_TOL
            && d1_at0 > 1.0
            && d1_at1 <= 1.0 + ENDPOINT_TOL;
        ConditionCheck {
            pass,
            witness: format!(
                "f0'(0)={d0_at0} (<1), f0'(1)={d0_at1} (=1), f1'(0)={d1_at0} (>1), \
                 f1'(1)={d1_at1} (<=1)"
            ),
        }
    };

    // (3) non-resonant multipliers at the common fixed point 0.
    let condition3 = {
        let exact = d0_at0 == 0.5 && d1_at0 == 3.0;
        let ratio = d0_at0.ln() / d1_at0.ln();
        if exact {
            ConditionCheck {
                pass: true,
                witness: format!(
                    "multipliers (1/2, 3): log(1/2)/log(3) = {ratio} is irrational because \
                     2^p = 3^q has no solution in positive integers"
                ),
            }
        } else {
            ConditionCheck {
                pass: false,
                witness: format!(
                    "multipliers ({d0_at0}, {d1_at0}) carry no exact irrationality \
                     certificate for log-ratio {ratio}"
                ),
            }
        }
    };

    // (4a) containment of the designated images in the trapping region.
    let condition4a = {
        let (f0_min, _) = grid_min(c1, b, REGION_SCAN, |x| f0.eval(x));
        let (f0_max, _) = grid_max(c1, b, REGION_SCAN, |x| f0.eval(x));
        let (f1_min, _) = grid_min(a, c2, REGION_SCAN, |x| f1.eval(x));
        let (f1_max, _) = grid_max(a, c2, REGION_SCAN, |x| f1.eval(x));
        let pass = f0_min >= a - 1e-12
            && f0_max <= b + 1e-12
            && f1_min >= a - 1e-12
            && f1_max <= b + 1e-12;
        ConditionCheck {
            pass,
            witness: format!(
                "f0([{c1},{b}]) = [{f0_min:.6},{f0_max:.6}], f1([{a},{c2}]) = \
                 [{f1_min:.6},{f1_max:.6}], both within [{a},{b}]: {pass}"
            ),
        }
    };

    // (4b) strict expansion on the entry bands.
    let condition4b = {
        let (m1, at1_) = grid_min(a, c1, REGION_SCAN, |x| f1.deriv(x));
        let (m0, at0_) = grid_min(c2, b, REGION_SCAN, |x| f0.deriv(x));
        ConditionCheck {
            pass: m1 > 1.0 && m0 > 1.0,
            witness: format!(
                "min f1' on [{a},{c1}] = {m1:.6} (at {at1_:.4}), min f0' on [{c2},{b}] = \
                 {m0:.6} (at {at0_:.4})"
            ),
        }
    };

    // (4c) joint expansion on the middle band.
    let condition4c = {
        let (m, at) =
            grid_min(c1, c2, REGION_SCAN, |x| f0.deriv(x).max(f1.deriv(x)));
        ConditionCheck {
            pass: m > 1.0,
            witness: format!("min over [{c1},{c2}] of max(f0', f1') = {m:.6} (at {at:.4})"),
        }
    };

    let all_pass = condition1.pass
        && condition2.pass
        && condition3.pass
        && condition4a.pass
        && condition4b.pass
        && condition4c.pass;
    Ok(ExampleConditionReport {
        interval_diffeos_fixing_endpoints: condition1,
        endpoint_derivative_profile: condition2,
        nonresonant_multipliers: condition3,
        trapping_containment: condition4a,
        entry_expansion: condition4b,
        middle_joint_expansion: condition4c,
        all_pass,
    })
}

/// How an orbit first entered the trapping region [a, b].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachOutcome {
    /// The constant letter that was iterated; `None` when x started inside.
    pub generator: Option<u32>,
    /// Number of iterates applied.
    pub steps: usize,
}

/// Iterates each generator alone from x until one orbit enters [a, b];
/// returns the successful letter and iterate count (preferring the lower
/// letter on simultaneous arrival). Points left of the region arrive via
/// the repelling generator, points right of it via the attracting one.
/// Exhausting the budget (e.g. from the fixed points 0 or 1 themselves)
/// is an error.
pub fn reach_trapping_region(
    system: &GeneratorSystem,
    params: &IntervalExampleParams,
    x: f64,
    budget: usize,
) -> Result<ReachOutcome> {
    IntervalExampleParams::new(params.a, params.c1, params.c2, params.b)?;
    if system.d() != 2 || system.domain.kind != DomainKind::Interval {
        return Err(Error::InvalidParameter(
            "trapping-region reach needs the two-generator interval system".into(),
        ));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("x = {x} outside [0, 1]")));
    }
    let inside = |y: f64| y >= params.a && y <= params.b;
    if inside(x) {
        return Ok(ReachOutcome { generator: None, steps: 0 });
    }
    let mut orbits = [x, x];
    for m in 1..=budget {
        for (idx, y) in orbits.iter_mut().enumerate() {
            *y = system.generators[idx].eval(*y);
            if inside(*y) {
                return Ok(ReachOutcome { generator: Some(idx as u32 + 1), steps: m });
            }
        }
    }
    Err(Error::BudgetExhausted(format!(
        "no single-generator orbit from x = {x} entered [{}, {}] within {budget} steps",
        params.a, params.b
    )))
}

/// Branch walked by [`staying_branch`], with the safety margins observed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StayingOutcome {
    pub word: Word,
    pub steps: usize,
    /// Average log theta along the branch (negative: expansion).
    pub exponent: f64,
    /// Smallest one-step derivative taken; > 1 by construction.
    pub min_step_deriv: f64,
}

const STAY_TIE_TOL: f64 = 1e-12;

/// From x in [a, b], selects letters by region — repelling generator on
/// [a, c1], attracting generator on [c2, b], larger derivative in between —
/// verifying at every step that the orbit stays trapped and the chosen
/// derivative exceeds 1. The middle-band tie rule (attracting generator
/// only when strictly better) matches the patch-overlap rule of
/// [`crate::classify::build_branch_from_cover`] on [`staying_cover`], so
/// both walks produce the identical word.
pub fn staying_branch(
    system: &GeneratorSystem,
    params: &IntervalExampleParams,
    x: f64,
    horizon: usize,
) -> Result<StayingOutcome> {
    IntervalExampleParams::new(params.a, params.c1, params.c2, params.b)?;
    if system.d() != 2 || system.domain.kind != DomainKind::Interval {
        return Err(Error::InvalidParameter(
            "staying branch needs the two-generator interval system".into(),
        ));
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("staying horizon must be positive".into()));
    }
    let &IntervalExampleParams { a, c1, c2, b } = params;
    if !(a..=b).contains(&x) {
        return Err(Error::InvalidParameter(format!(
            "staying branch starts inside the trapping region [{a}, {b}], got x = {x}"
        )));
    }
    let mut y = x;
    let mut letters = Vec::with_capacity(horizon);
    let mut sum_log_theta = 0.0;
    let mut min_step_deriv = f64::INFINITY;
    for step in 0..horizon {
        if !(a - 1e-12..=b + 1e-12).contains(&y) {
            return Err(Error::InfeasibleExample(format!(
                "orbit left the trapping region at step {step}: y = {y}"
            )));
        }
        let j = if y <= c1 {
            REPELLING_LETTER
        } else if y >= c2 {
            ATTRACTING_LETTER
        } else {
            let d0 = system.generators[0].deriv(y);
            let d1 = system.generators[1].deriv(y);
            // Strictly-better rule: prefer the repelling generator on ties,
            // mirroring first-listed-patch precedence in the cover walk.
            if -d0.abs().ln() < -d1.abs().ln() - STAY_TIE_TOL {
                ATTRACTING_LETTER
            } else {
                REPELLING_LETTER
            }
        };
        let g = &system.generators[(j - 1) as usize];
        let d = g.deriv(y);
        if d <= 1.0 {
            return Err(Error::InfeasibleExample(format!(
                "chosen generator {j} fails to expand at step {step}: f'({y}) = {d}"
            )));
        }
        min_step_deriv = min_step_deriv.min(d);
        sum_log_theta -= d.ln();
        y = g.eval(y);
        letters.push(j);
    }
    Ok(StayingOutcome {
        word: Word::new(letters),
        steps: horizon,
        exponent: sum_log_theta / horizon as f64,
        min_step_deriv,
    })
}

/// The two-patch expansion cover realizing the staying rule: the repelling
/// generator serves [a, c2], the attracting one [c1, b], each with the
/// tightest grid-certified one-step sigma (slightly inflated for safety
/// between grid nodes; the cover walk re-checks every emitted block
/// pointwise anyway).
pub fn staying_cover(
    system: &GeneratorSystem,
    params: &IntervalExampleParams,
) -> Result<Vec<CoverPatch>> {
    IntervalExampleParams::new(params.a, params.c1, params.c2, params.b)?;
    if system.d() != 2 {
        return Err(Error::InvalidParameter(
            "the staying cover concerns the two-generator interval system".into(),
        ));
    }
    let &IntervalExampleParams { a, c1, c2, b } = params;
    let (min_rep, _) =
        grid_min(a, c2, REGION_SCAN, |x| system.generators[1].deriv(x));
    let (min_att, _) =
        grid_min(c1, b, REGION_SCAN, |x| system.generators[0].deriv(x));
    const GRID_SAFETY: f64 = 1e-3;
    for (label, m) in [("repelling", min_rep), ("attracting", min_att)] {
        if m - GRID_SAFETY <= 1.0 {
            return Err(Error::InfeasibleExample(format!(
                "{label} generator has grid-min derivative {m} on its patch; no sigma < 1 \
                 is certifiable"
            )));
        }
    }
    Ok(vec![
        CoverPatch { lo: a, hi: c2, word: vec![REPELLING_LETTER], sigma: 1.0 / (min_rep - GRID_SAFETY) },
        CoverPatch { lo: c1, hi: b, word: vec![ATTRACTING_LETTER], sigma: 1.0 / (min_att - GRID_SAFETY) },
    ])
}
