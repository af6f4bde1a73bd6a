//! Acceptance gate: eight end-to-end criteria, each printing one PASS/FAIL
//! line with its key numbers and asserting its pinned tolerances and time
//! budget. Every criterion builds a deterministic JSON report; the final
//! criterion recomputes a subset and demands byte-identical output.

use expansion_lab::preball::random_subinterval_pairs;
use expansion_lab::{
    build_preball, check_bounded_distortion, classify_action, covering_time,
    diffeo_obstruction_check, doubling_system, equidistribution_test, hyperbolic_times,
    interval_example, perturbed_doubling, reach_trapping_region, staying_branch,
    verify_contraction, verify_example_conditions, BranchPolicy, BranchStrategy,
    ClassifyParams, CounterRng, DomainSpace, GeneratorSystem, IntervalExampleParams,
    LogPhiSequence, MapFamily, Mode, PreballMode, ReportEnvelope, SmoothMap1D,
    TestObservable, Word,
};
use serde::Serialize;
use serde_json::json;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

// ---------------------------------------------------------------------------
// Pinned parameters and tolerances
// ---------------------------------------------------------------------------

const C1_SEED: u64 = 0xACC0_0001;
const C1_SEQUENCES: u64 = 1000;
const C1_LEN: usize = 500;
/// Detector margin a = 0.4, i.e. certified contraction rate e^{-0.2}.
const C1_MARGIN: f64 = 0.4;
/// Definitional window-sum check tolerance (matches the library's
/// boundary slack for summation-order differences).
const C1_WINDOW_TOL: f64 = 1e-12;
/// Density-bound comparison slack (pure float rounding headroom).
const C1_BOUND_TOL: f64 = 1e-9;
const C1_TIME: Duration = Duration::from_secs(5);

const C2_SEED: u64 = 0xACC0_0002;
const C2_MAX_ORDER: usize = 12;
const C2_DELTA: f64 = 0.05;
const C2_PAIRS: usize = 100;
/// Unperturbed cover: ratios and K equal 1 to this absolute tolerance.
const C2_EXACT_TOL: f64 = 1e-12;
/// Perturbed cover: ratios stay below K to this relative tolerance.
const C2_REL_TOL: f64 = 1e-9;
const C2_TIME: Duration = Duration::from_secs(10);

const C3_CONTRACTION_SLACK: f64 = 1e-10;
const C3_SAMPLES: usize = 64;
const C3_TIME: Duration = Duration::from_secs(5);

const C4_RADIUS: f64 = 0.01;
const C4_EPS_GRID: f64 = 1.0 / 4096.0;
const C4_EXPECTED: usize = 6;
const C4_TIME: Duration = Duration::from_secs(2);

const C5_SEED: u64 = 0xACC0_0005;
const C5_HORIZON: usize = 1_000_000;
const C5_POINTS: usize = 10;
const C5_DEV_TOL: f64 = 0.02;
const C5_TIME: Duration = Duration::from_secs(30);

const C6_SEED: u64 = 0xACC0_0006;
const C6_REACH_POINTS: u64 = 1000;
const C6_REACH_BUDGET: usize = 100_000;
const C6_STAY_STEPS: usize = 1_000_000;
const C6_CLASSIFY_SAMPLES: usize = 400;
const C6_CLASSIFY_HORIZON: usize = 2000;
const C6_EXPONENT_THRESHOLD: f64 = -0.01;
const C6_QUOTA: f64 = 0.99;
const C6_TIME: Duration = Duration::from_secs(60);

const C7_SEED: u64 = 0xACC0_0007;
const C7_WORDS: u64 = 5;
const C7_WORD_LEN: usize = 20;
const C7_MC_SAMPLES: usize = 100_000;
const C7_Z_LIMIT: f64 = 4.0;
const C7_TIME: Duration = Duration::from_secs(20);

// ---------------------------------------------------------------------------
// Shared criterion plumbing
// ---------------------------------------------------------------------------

struct Criterion {
    pass: bool,
    line: String,
    json: String,
    elapsed: Duration,
}

fn envelope_json<T: Serialize>(
    name: &str,
    params: serde_json::Value,
    seed: Option<u64>,
    pass: bool,
    payload: T,
) -> String {
    let mut env = ReportEnvelope::new(name, params, payload).with_pass(pass);
    if let Some(s) = seed {
        env = env.with_seed(s);
    }
    env.to_json().expect("acceptance payloads serialize")
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn golden_rotation() -> GeneratorSystem {
    let rot = SmoothMap1D::new(
        DomainSpace::circle(),
        MapFamily::Affine { slope: 1, offset: 0.618_033_988_749_894_9 },
        None,
    )
    .unwrap();
    GeneratorSystem::new(DomainSpace::circle(), vec![rot], Mode::Semigroup).unwrap()
}

// ---------------------------------------------------------------------------
// Criterion 1: record-scan hyperbolic times against the definition
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct C1Payload {
    sequences: u64,
    length: usize,
    sigma: f64,
    definitional_violations: usize,
    primary_hypothesis_count: usize,
    shifted_hypothesis_count: usize,
    bound_violations: usize,
    worst_density_margin: f64,
}

/// Definitional check, written out directly: n is a sigma-hyperbolic time
/// iff every backward window sum of the log-contraction values stays below
/// the geometric budget k * ln(sigma).
fn definitional_time(values: &[f64], n: usize, log_sigma: f64) -> bool {
    let mut window = 0.0;
    for k in 1..=n {
        window += values[n - k];
        if window > k as f64 * log_sigma + C1_WINDOW_TOL {
            return false;
        }
    }
    true
}

fn run_criterion_1() -> Criterion {
    let start = Instant::now();
    let sigma = (-C1_MARGIN / 2.0).exp();
    let log_sigma = sigma.ln();
    let c = C1_MARGIN / 2.0;

    let mut definitional_violations = 0usize;
    let mut primary_hypothesis = 0usize;
    let mut shifted_hypothesis = 0usize;
    let mut bound_violations = 0usize;
    let mut worst_margin = f64::INFINITY;

    // family 0: values uniform in [-1, 0.5]; family 1: shifted down by
    // 0.35 so the density-bound hypothesis almost always holds and the
    // conditional claim is exercised, not vacuous.
    for family in 0..2u64 {
        for i in 0..C1_SEQUENCES {
            let mut rng = CounterRng::substream(C1_SEED, family, i);
            let shift = if family == 0 { 0.0 } else { -0.35 };
            let values: Vec<f64> =
                (0..C1_LEN).map(|_| rng.uniform(-1.0, 0.5) + shift).collect();
            let seq = LogPhiSequence::pointwise(values.clone()).unwrap();
            let report = hyperbolic_times(&seq, C1_MARGIN).unwrap();

            for &t in &report.times {
                if !definitional_time(&values, t, log_sigma) {
                    definitional_violations += 1;
                }
            }

            // Density bound on the centered sequence a_i = -v_i - c with
            // A = sup a_i: whenever sum a_i >= c N, demand
            // #times >= (c / A) N.
            let a_seq: Vec<f64> = values.iter().map(|v| -v - c).collect();
            let total: f64 = a_seq.iter().sum();
            let n = C1_LEN as f64;
            if total >= c * n {
                if family == 0 {
                    primary_hypothesis += 1;
                } else {
                    shifted_hypothesis += 1;
                }
                let a_sup = a_seq.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let bound = (c / a_sup) * n;
                let margin = report.times.len() as f64 - bound;
                worst_margin = worst_margin.min(margin);
                if (report.times.len() as f64) < bound - C1_BOUND_TOL {
                    bound_violations += 1;
                }
            }
        }
    }

    let pass = definitional_violations == 0
        && bound_violations == 0
        && shifted_hypothesis >= 900;
    let elapsed = start.elapsed();
    let payload = C1Payload {
        sequences: C1_SEQUENCES,
        length: C1_LEN,
        sigma,
        definitional_violations,
        primary_hypothesis_count: primary_hypothesis,
        shifted_hypothesis_count: shifted_hypothesis,
        bound_violations,
        worst_density_margin: if worst_margin.is_finite() { worst_margin } else { 0.0 },
    };
    let json = envelope_json(
        "acceptance/hyperbolic-times",
        json!({
            "sequences": C1_SEQUENCES, "length": C1_LEN, "margin": C1_MARGIN,
            "window_tol": C1_WINDOW_TOL, "bound_tol": C1_BOUND_TOL,
        }),
        Some(C1_SEED),
        pass,
        payload,
    );
    let line = format!(
        "criterion 1 (hyperbolic-time detector vs definition): {} — {} sequences x {} values, sigma={sigma:.6}, {definitional_violations} definitional violations, density bound exercised on {} sequences ({bound_violations} violations), {:?}",
        verdict(pass),
        2 * C1_SEQUENCES,
        C1_LEN,
        primary_hypothesis + shifted_hypothesis,
        elapsed,
    );
    Criterion { pass, line, json, elapsed }
}

fn c1() -> &'static Criterion {
    static CELL: OnceLock<Criterion> = OnceLock::new();
    CELL.get_or_init(run_criterion_1)
}

#[test]
fn criterion_1_hyperbolic_times_match_definition() {
    let c = c1();
    println!("{}", c.line);
    assert!(c.elapsed <= C1_TIME, "time budget exceeded: {:?}", c.elapsed);
    assert!(c.pass, "{}", c.line);
}

// ---------------------------------------------------------------------------
// Criterion 2: closed-form distortion constants
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct C2Payload {
    unperturbed_worst_ratio_error: f64,
    unperturbed_k: f64,
    perturbed_k: f64,
    perturbed_worst_rel_excess: f64,
    orders: usize,
    pairs_per_order: usize,
}

fn run_criterion_2() -> Criterion {
    let start = Instant::now();
    let plain = doubling_system();
    let perturbed = perturbed_doubling(0.5).unwrap();
    let word = Word::new(vec![1; C2_MAX_ORDER]);

    let mut worst_ratio_error = 0.0f64;
    let mut plain_k = f64::NAN;
    let mut pert_k = f64::NAN;
    let mut worst_rel_excess = f64::NEG_INFINITY;
    let mut ok = true;

    for order in 1..=C2_MAX_ORDER {
        let pb = build_preball(
            &plain, &word, 0.3, order, C2_DELTA, None, PreballMode::Strict,
        )
        .unwrap();
        plain_k = pb.distortion_k.unwrap();
        ok &= (plain_k - 1.0).abs() <= C2_EXACT_TOL;
        let mut rng = CounterRng::substream(C2_SEED, 1, order as u64);
        let pairs = random_subinterval_pairs(&pb, C2_PAIRS, &mut rng);
        let report = check_bounded_distortion(&plain, &pb, &pairs).unwrap();
        let err = (report.max_observed_ratio - 1.0).abs();
        worst_ratio_error = worst_ratio_error.max(err);
        ok &= err <= C2_EXACT_TOL;

        let pbp = build_preball(
            &perturbed, &word, 0.3, order, C2_DELTA, None, PreballMode::Strict,
        )
        .unwrap();
        pert_k = pbp.distortion_k.unwrap();
        let mut rngp = CounterRng::substream(C2_SEED, 2, order as u64);
        let pairsp = random_subinterval_pairs(&pbp, C2_PAIRS, &mut rngp);
        let reportp = check_bounded_distortion(&perturbed, &pbp, &pairsp).unwrap();
        let rel = reportp.max_observed_ratio / pert_k - 1.0;
        worst_rel_excess = worst_rel_excess.max(rel);
        ok &= rel <= C2_REL_TOL;
        ok &= reportp.pass;
    }

    let elapsed = start.elapsed();
    let payload = C2Payload {
        unperturbed_worst_ratio_error: worst_ratio_error,
        unperturbed_k: plain_k,
        perturbed_k: pert_k,
        perturbed_worst_rel_excess: worst_rel_excess,
        orders: C2_MAX_ORDER,
        pairs_per_order: C2_PAIRS,
    };
    let json = envelope_json(
        "acceptance/distortion-constants",
        json!({
            "delta": C2_DELTA, "orders": C2_MAX_ORDER, "pairs": C2_PAIRS,
            "exact_tol": C2_EXACT_TOL, "rel_tol": C2_REL_TOL, "eps": 0.5,
        }),
        Some(C2_SEED),
        ok,
        payload,
    );
    let line = format!(
        "criterion 2 (distortion constants): {} — degree-2 cover K={plain_k} worst ratio error {worst_ratio_error:.2e} (tol {C2_EXACT_TOL:.0e}); perturbed K={pert_k:.6} worst relative excess {worst_rel_excess:.2e} (tol {C2_REL_TOL:.0e}), {:?}",
        verdict(ok),
        elapsed,
    );
    Criterion { pass: ok, line, json, elapsed }
}

#[test]
fn criterion_2_distortion_constant_exactness() {
    let c = run_criterion_2();
    println!("{}", c.line);
    assert!(c.elapsed <= C2_TIME, "time budget exceeded: {:?}", c.elapsed);
    assert!(c.pass, "{}", c.line);
}

// ---------------------------------------------------------------------------
// Criterion 3: preball contraction inequality
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct C3Payload {
    worst_pair_margin: f64,
    worst_diam_margin: f64,
    orders: usize,
}

fn run_criterion_3() -> Criterion {
    let start = Instant::now();
    let perturbed = perturbed_doubling(0.5).unwrap();
    let word = Word::new(vec![1; C2_MAX_ORDER]);
    let mut worst_pair = f64::NEG_INFINITY;
    let mut worst_diam = f64::NEG_INFINITY;
    let mut ok = true;
    for order in 1..=C2_MAX_ORDER {
        let pb = build_preball(
            &perturbed, &word, 0.3, order, C2_DELTA, None, PreballMode::Strict,
        )
        .unwrap();
        let report = verify_contraction(&perturbed, &pb, C3_SAMPLES).unwrap();
        worst_pair = worst_pair.max(report.max_margin);
        worst_diam = worst_diam.max(report.diam_margin);
        ok &= report.max_margin <= C3_CONTRACTION_SLACK;
        ok &= report.diam_margin <= C3_CONTRACTION_SLACK;
    }
    let elapsed = start.elapsed();
    let payload = C3Payload {
        worst_pair_margin: worst_pair,
        worst_diam_margin: worst_diam,
        orders: C2_MAX_ORDER,
    };
    let json = envelope_json(
        "acceptance/preball-contraction",
        json!({
            "delta": C2_DELTA, "orders": C2_MAX_ORDER, "samples": C3_SAMPLES,
            "slack": C3_CONTRACTION_SLACK, "eps": 0.5,
        }),
        None,
        ok,
        payload,
    );
    let line = format!(
        "criterion 3 (preball contraction): {} — orders 1..={}, worst level margin {worst_pair:.2e}, worst diameter margin {worst_diam:.2e} (slack {C3_CONTRACTION_SLACK:.0e}), {:?}",
        verdict(ok),
        C2_MAX_ORDER,
        elapsed,
    );
    Criterion { pass: ok, line, json, elapsed }
}

#[test]
fn criterion_3_preball_contraction() {
    let c = run_criterion_3();
    println!("{}", c.line);
    assert!(c.elapsed <= C3_TIME, "time budget exceeded: {:?}", c.elapsed);
    assert!(c.pass, "{}", c.line);
}

// ---------------------------------------------------------------------------
// Criterion 4: ball covering time
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct C4Payload {
    covering_time: Option<usize>,
    rotation_covering_time: Option<usize>,
    rotation_max_fraction: f64,
}

fn run_criterion_4() -> Criterion {
    let start = Instant::now();
    let word = Word::new(vec![1; 64]);
    let outcome =
        covering_time(&doubling_system(), &word, 0.5, C4_RADIUS, C4_EPS_GRID, 64)
            .unwrap();
    let rotation =
        covering_time(&golden_rotation(), &word, 0.5, C4_RADIUS, C4_EPS_GRID, 64)
            .unwrap();
    let ok = matches!(outcome.time, Some(t) if t.abs_diff(C4_EXPECTED) <= 1)
        && rotation.time.is_none();
    let elapsed = start.elapsed();
    let payload = C4Payload {
        covering_time: outcome.time,
        rotation_covering_time: rotation.time,
        rotation_max_fraction: rotation.max_fraction,
    };
    let json = envelope_json(
        "acceptance/covering-time",
        json!({
            "radius": C4_RADIUS, "eps_grid": C4_EPS_GRID,
            "expected": C4_EXPECTED, "slop": 1, "budget": 64,
        }),
        None,
        ok,
        payload,
    );
    let line = format!(
        "criterion 4 (covering time): {} — degree-2 cover covers in {:?} steps (expected {C4_EXPECTED}±1), rotation never covers (max fraction {:.4}), {:?}",
        verdict(ok),
        outcome.time,
        rotation.max_fraction,
        elapsed,
    );
    Criterion { pass: ok, line, json, elapsed }
}

#[test]
fn criterion_4_covering_time() {
    let c = run_criterion_4();
    println!("{}", c.line);
    assert!(c.elapsed <= C4_TIME, "time budget exceeded: {:?}", c.elapsed);
    assert!(c.pass, "{}", c.line);
}

// ---------------------------------------------------------------------------
// Criterion 5: Birkhoff equidistribution
// ---------------------------------------------------------------------------

fn run_criterion_5() -> Criterion {
    let start = Instant::now();
    let observables = vec![
        TestObservable::One,
        TestObservable::Cos { k: 1 },
        TestObservable::Sin { k: 1 },
        TestObservable::Cos { k: 2 },
    ];
    let report = equidistribution_test(
        &doubling_system(),
        &BranchPolicy::Cycle { letters: vec![1] },
        &observables,
        C5_HORIZON,
        C5_POINTS,
        C5_SEED,
        None,
    )
    .unwrap();
    let constant_dev = report.observables[0].worst_deviation;
    let worst_wave = report.observables[1..]
        .iter()
        .map(|o| o.worst_deviation)
        .fold(f64::NEG_INFINITY, f64::max);
    let ok = constant_dev == 0.0 && worst_wave <= C5_DEV_TOL;
    let elapsed = start.elapsed();
    let json = envelope_json(
        "acceptance/equidistribution",
        json!({
            "horizon": C5_HORIZON, "points": C5_POINTS, "dev_tol": C5_DEV_TOL,
        }),
        Some(C5_SEED),
        ok,
        &report,
    );
    let line = format!(
        "criterion 5 (equidistribution): {} — horizon {C5_HORIZON}, {C5_POINTS} points: constant observable deviation {constant_dev} (must be exactly 0), worst wave deviation {worst_wave:.6} (tol {C5_DEV_TOL}), {:?}",
        verdict(ok),
        elapsed,
    );
    Criterion { pass: ok, line, json, elapsed }
}

fn c5() -> &'static Criterion {
    static CELL: OnceLock<Criterion> = OnceLock::new();
    CELL.get_or_init(run_criterion_5)
}

#[test]
fn criterion_5_equidistribution() {
    let c = c5();
    println!("{}", c.line);
    assert!(c.elapsed <= C5_TIME, "time budget exceeded: {:?}", c.elapsed);
    assert!(c.pass, "{}", c.line);
}

// ---------------------------------------------------------------------------
// Criterion 6: two-generator interval example, end to end
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct C6Payload {
    conditions: expansion_lab::ExampleConditionReport,
    reach_points: u64,
    reach_failures: usize,
    reach_max_steps: usize,
    staying_steps: usize,
    staying_exponent: f64,
    staying_min_step_deriv: f64,
    staying_word_head: Vec<u32>,
    classify: expansion_lab::ClassificationReport,
}

fn run_criterion_6() -> Criterion {
    let start = Instant::now();
    let params = IntervalExampleParams::default();
    let system = interval_example(&params).unwrap();

    let conditions = verify_example_conditions(&system, &params).unwrap();
    let mut ok = conditions.all_pass;

    // Reach: seeded interior points, hard iteration budget each.
    let mut reach_failures = 0usize;
    let mut reach_max_steps = 0usize;
    for i in 0..C6_REACH_POINTS {
        let mut rng = CounterRng::substream(C6_SEED, 1, i);
        let mut x = rng.uniform(0.0, 1.0);
        while x <= 1e-9 || x >= 1.0 - 1e-9 {
            x = rng.uniform(0.0, 1.0);
        }
        match reach_trapping_region(&system, &params, x, C6_REACH_BUDGET) {
            Ok(outcome) => reach_max_steps = reach_max_steps.max(outcome.steps),
            Err(_) => reach_failures += 1,
        }
    }
    ok &= reach_failures == 0;

    // Staying: one long branch from the region's midpoint.
    let stay = staying_branch(
        &system,
        &params,
        0.5 * (params.a + params.b),
        C6_STAY_STEPS,
    )
    .unwrap();
    ok &= stay.steps == C6_STAY_STEPS && stay.min_step_deriv > 1.0;

    // Classification: quota of samples must show exponents below the
    // pinned negative threshold.
    let classify = classify_action(
        &system,
        &ClassifyParams {
            samples: C6_CLASSIFY_SAMPLES,
            horizon: C6_CLASSIFY_HORIZON,
            strategy: BranchStrategy::Greedy,
            a_threshold: C6_EXPONENT_THRESHOLD,
            quota: C6_QUOTA,
            exceptional_points: vec![0.0, 1.0],
            candidate_cap: 8,
            seed: C6_SEED,
        },
    )
    .unwrap();
    ok &= classify.expandable_fraction >= C6_QUOTA;
    ok &= classify.pointwise_expandable;

    let elapsed = start.elapsed();
    let line = format!(
        "criterion 6 (interval example): {} — conditions all_pass={}, reach {}/{} points (max {} steps, budget {}), staying {} steps min deriv {:.6}, classify fraction {:.4} at threshold {} ({:?})",
        verdict(ok),
        conditions.all_pass,
        C6_REACH_POINTS - reach_failures as u64,
        C6_REACH_POINTS,
        reach_max_steps,
        C6_REACH_BUDGET,
        stay.steps,
        stay.min_step_deriv,
        classify.expandable_fraction,
        C6_EXPONENT_THRESHOLD,
        elapsed,
    );
    let payload = C6Payload {
        conditions,
        reach_points: C6_REACH_POINTS,
        reach_failures,
        reach_max_steps,
        staying_steps: stay.steps,
        staying_exponent: stay.exponent,
        staying_min_step_deriv: stay.min_step_deriv,
        staying_word_head: stay.word.indices[..32.min(stay.word.indices.len())].to_vec(),
        classify,
    };
    let json = envelope_json(
        "acceptance/interval-example",
        json!({
            "reach_points": C6_REACH_POINTS, "reach_budget": C6_REACH_BUDGET,
            "staying_steps": C6_STAY_STEPS,
            "classify_samples": C6_CLASSIFY_SAMPLES,
            "classify_horizon": C6_CLASSIFY_HORIZON,
            "exponent_threshold": C6_EXPONENT_THRESHOLD, "quota": C6_QUOTA,
        }),
        Some(C6_SEED),
        ok,
        payload,
    );
    Criterion { pass: ok, line, json, elapsed }
}

fn c6() -> &'static Criterion {
    static CELL: OnceLock<Criterion> = OnceLock::new();
    CELL.get_or_init(run_criterion_6)
}

#[test]
fn criterion_6_interval_example_end_to_end() {
    let c = c6();
    println!("{}", c.line);
    assert!(c.elapsed <= C6_TIME, "time budget exceeded: {:?}", c.elapsed);
    assert!(c.pass, "{}", c.line);
}

// ---------------------------------------------------------------------------
// Criterion 7: diffeomorphism unit-integral obstruction
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct C7Payload {
    words: u64,
    word_len: usize,
    mc_samples: usize,
    worst_abs_z: f64,
    means: Vec<f64>,
    stderrs: Vec<f64>,
}

fn run_criterion_7() -> Criterion {
    let start = Instant::now();
    let domain = DomainSpace::interval();
    let f = SmoothMap1D::new(domain.clone(), MapFamily::Mobius { c: 0.3 }, None).unwrap();
    let g =
        SmoothMap1D::new(domain.clone(), MapFamily::Mobius { c: -0.25 }, None).unwrap();
    let system = GeneratorSystem::new(domain, vec![f, g], Mode::Semigroup).unwrap();

    let mut ok = true;
    let mut worst_z = 0.0f64;
    let mut means = Vec::new();
    let mut stderrs = Vec::new();
    for w in 0..C7_WORDS {
        let mut rng = CounterRng::substream(C7_SEED, 0, w);
        let letters: Vec<u32> =
            (0..C7_WORD_LEN).map(|_| 1 + rng.below(2) as u32).collect();
        let report =
            diffeo_obstruction_check(&system, &Word::new(letters), C7_MC_SAMPLES, C7_SEED + w)
                .unwrap();
        ok &= (report.mean - 1.0).abs() <= C7_Z_LIMIT * report.stderr;
        ok &= report.pass;
        worst_z = worst_z.max(report.abs_z);
        means.push(report.mean);
        stderrs.push(report.stderr);
    }

    let elapsed = start.elapsed();
    let payload = C7Payload {
        words: C7_WORDS,
        word_len: C7_WORD_LEN,
        mc_samples: C7_MC_SAMPLES,
        worst_abs_z: worst_z,
        means: means.clone(),
        stderrs,
    };
    let json = envelope_json(
        "acceptance/diffeo-obstruction",
        json!({
            "words": C7_WORDS, "word_len": C7_WORD_LEN,
            "mc_samples": C7_MC_SAMPLES, "z_limit": C7_Z_LIMIT,
            "mobius_c": [0.3, -0.25],
        }),
        Some(C7_SEED),
        ok,
        payload,
    );
    let line = format!(
        "criterion 7 (diffeo obstruction): {} — {} random words of length {}, Monte-Carlo integral means {:?}, worst |z| = {:.3} (limit {C7_Z_LIMIT}), {:?}",
        verdict(ok),
        C7_WORDS,
        C7_WORD_LEN,
        means.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>(),
        worst_z,
        elapsed,
    );
    Criterion { pass: ok, line, json, elapsed }
}

fn c7() -> &'static Criterion {
    static CELL: OnceLock<Criterion> = OnceLock::new();
    CELL.get_or_init(run_criterion_7)
}

#[test]
fn criterion_7_diffeo_obstruction() {
    let c = c7();
    println!("{}", c.line);
    assert!(c.elapsed <= C7_TIME, "time budget exceeded: {:?}", c.elapsed);
    assert!(c.pass, "{}", c.line);
}

// ---------------------------------------------------------------------------
// Criterion 8: byte-level determinism of repeated runs
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_reports_are_byte_identical_on_rerun() {
    let reruns = [
        ("hyperbolic-times", &c1().json, run_criterion_1().json),
        ("equidistribution", &c5().json, run_criterion_5().json),
        ("interval-example", &c6().json, run_criterion_6().json),
        ("diffeo-obstruction", &c7().json, run_criterion_7().json),
    ];
    let mut ok = true;
    let mut mismatches = Vec::new();
    for (name, first, second) in &reruns {
        if *first != second {
            ok = false;
            mismatches.push(*name);
        }
    }
    println!(
        "criterion 8 (determinism): {} — reports 1, 5, 6, 7 recomputed; {}",
        verdict(ok),
        if ok {
            "all byte-identical".to_string()
        } else {
            format!("mismatches: {mismatches:?}")
        }
    );
    assert!(ok, "non-deterministic reports: {mismatches:?}");
}
