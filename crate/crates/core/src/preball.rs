//! Contraction preballs by inverse-branch pullback.
//!
//! Given an orbit segment of length n whose order n is a sigma-hyperbolic
//! time, the ball of radius delta around the orbit endpoint pulls back
//! through the n inverse branches selected by the orbit itself to a
//! neighborhood V of the base point. The composed map sends V bijectively
//! onto that ball, and intermediate images contract geometrically:
//! d(f^i y, f^i z) <= lambda^{n-i} d(f^n y, f^n z) with lambda = sigma.
//!
//! All interval arithmetic happens on monotone lifts, with intervals stored
//! as an anchor plus two nonnegative half-widths so circle wrap-around
//! never introduces endpoint-order ambiguity.

use crate::domain::DomainKind;
use crate::error::{Error, Result};
use crate::map::HolderData;
use crate::pliss::{is_hyperbolic_time, LogPhiSequence};
use crate::rng::CounterRng;
use crate::system::{GeneratorSystem, Word};
use serde::{Deserialize, Serialize};

/// An interval around an anchor point, stored as asymmetric half-widths in
/// lift coordinates: the set [anchor - left, anchor + right].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PointedInterval {
    pub anchor: f64,
    pub left: f64,
    pub right: f64,
}

impl PointedInterval {
    pub fn lo(&self) -> f64 {
        self.anchor - self.left
    }

    pub fn hi(&self) -> f64 {
        self.anchor + self.right
    }

    pub fn diam(&self) -> f64 {
        self.left + self.right
    }

    /// k equispaced sample points including both endpoints (k >= 2).
    pub fn samples(&self, k: usize) -> Vec<f64> {
        let (lo, hi) = (self.lo(), self.hi());
        (0..k)
            .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
            .collect()
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.lo() - 1e-12 && z <= self.hi() + 1e-12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreballMode {
    /// Require a certified hyperbolic order; otherwise error.
    Strict,
    /// Build the pullback regardless and let verification report whether
    /// the contraction contract actually holds.
    Advisory,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Preball {
    /// The word whose first `order` letters were used.
    pub word: Word,
    /// Base point (canonical).
    pub x: f64,
    pub order: usize,
    /// V, anchored at the base point, in lift coordinates.
    pub interval: PointedInterval,
    pub delta: f64,
    /// Contraction rate; equals the sigma the order was certified at.
    pub lambda: f64,
    /// The smallest sigma for which `order` is a hyperbolic time of this
    /// orbit (None when order = 0).
    pub sigma_tightest: Option<f64>,
    /// Whether `order` passed the hyperbolic-time check at `lambda`.
    pub certified: bool,
    /// Orbit endpoint (canonical): center of the image ball.
    pub image_center: f64,
    /// Image-ball half-widths; both equal delta unless the interval domain
    /// clips the ball at 0 or 1.
    pub image_left_radius: f64,
    pub image_right_radius: f64,
    /// exp(C1 delta^alpha / (1 - lambda^alpha)); None when lambda >= 1
    /// (advisory builds with no certified rate carry no bound).
    pub distortion_k: Option<f64>,
    pub holder: HolderData,
    /// Cached orbit data: points[i] for i = 0..=order.
    pub orbit_points: Vec<f64>,
    pub log_derivs: Vec<f64>,
}

/// The closed-form distortion bound exp(C1 * delta^alpha / (1 - lambda^alpha)).
pub fn distortion_constant(c1: f64, alpha: f64, delta: f64, lambda: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if c1 < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "holder constant must be >= 0, got {c1}"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "contraction rate must lie in (0, 1), got {lambda}"
        )));
    }
    Ok((c1 * delta.powf(alpha) / (1.0 - lambda.powf(alpha))).exp())
}

/// Pulls the interval [anchors back] one level: preimage of
/// [lift(x) - left, lift(x) + right] under the generator's lift, anchored
/// at x. Fails when the target leaves the image (interval domain) or when
/// the current interval already wraps the whole circle.
fn pull_back_once(
    g: &crate::map::SmoothMap1D,
    domain_kind: DomainKind,
    x: f64,
    left: f64,
    right: f64,
) -> Result<(f64, f64)> {
    if domain_kind == DomainKind::Circle && left + right >= 1.0 {
        // The canonical projection is no longer injective on the target.
        return Err(Error::CoverGap { x });
    }
    let anchor_lift = g.lift(x);
    let (target_lo, target_hi) = (anchor_lift - left, anchor_lift + right);
    if domain_kind == DomainKind::Interval {
        let (im_lo, im_hi) = (g.lift(0.0), g.lift(1.0));
        if target_lo < im_lo - 1e-12 || target_hi > im_hi + 1e-12 {
            return Err(Error::CoverGap { x });
        }
    }
    let w_lo = g.lift_inverse(target_lo.max(g_image_floor(g, domain_kind)), x)?;
    let w_hi = g.lift_inverse(target_hi.min(g_image_ceil(g, domain_kind)), x)?;
    Ok(((x - w_lo).max(0.0), (w_hi - x).max(0.0)))
}

fn g_image_floor(g: &crate::map::SmoothMap1D, kind: DomainKind) -> f64 {
    match kind {
        DomainKind::Interval => g.lift(0.0),
        DomainKind::Circle => f64::NEG_INFINITY,
    }
}

fn g_image_ceil(g: &crate::map::SmoothMap1D, kind: DomainKind) -> f64 {
    match kind {
        DomainKind::Interval => g.lift(1.0),
        DomainKind::Circle => f64::INFINITY,
    }
}

/// Runs the full n-level pullback of the ball of the given half-widths.
/// Returns (left, right) half-widths of V around the base point, or the
/// 0-based level at which the pullback failed.
fn try_pullback(
    system: &GeneratorSystem,
    word: &Word,
    points: &[f64],
    n: usize,
    delta_left: f64,
    delta_right: f64,
) -> std::result::Result<(f64, f64), usize> {
    let mut left = delta_left;
    let mut right = delta_right;
    for i in (0..n).rev() {
        let g = &system.generators[(word.indices[i] - 1) as usize];
        match pull_back_once(g, system.domain.kind, points[i], left, right) {
            Ok((l, r)) => {
                left = l;
                right = r;
            }
            Err(_) => return Err(i),
        }
    }
    Ok((left, right))
}

/// Builds the order-n preball at x along the word, pulling B(f^n(x), delta)
/// back through the orbit's own inverse branches.
///
/// `sigma`: the contraction rate to certify the order at. None picks the
/// system's uniform rate sup theta when that is below 1 (the level-wise
/// contraction inequality then holds by the mean value theorem with no
/// distortion correction), and otherwise falls back to the tightest
/// pointwise rate certifying this order. A caller-supplied rate tighter
/// than the uniform one certifies per the definition, but sampled
/// verification may then see margins up to the distortion correction.
/// In strict mode a failed certification is an error; in advisory mode the
/// pullback is built anyway and `certified` records the failure.
pub fn build_preball(
    system: &GeneratorSystem,
    word: &Word,
    x: f64,
    n: usize,
    delta: f64,
    sigma: Option<f64>,
    mode: PreballMode,
) -> Result<Preball> {
    let holder = system.holder();
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if delta > holder.epsilon {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} exceeds the system locality scale {}",
            holder.epsilon
        )));
    }
    let orbit = system.compose_orbit(word, x, n)?;
    let x = orbit.points[0];

    // Certify the order as a hyperbolic time (or record the failure).
    let (lambda, sigma_tightest, certified) = if n == 0 {
        (sigma.unwrap_or(0.5), None, true)
    } else {
        let seq = LogPhiSequence::from_orbit(&orbit);
        // Tightest sigma: max over window lengths of the window average of
        // log phi, exponentiated.
        let mut worst_avg = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for l in 1..=n {
            sum += seq.values[n - l];
            worst_avg = worst_avg.max(sum / l as f64);
        }
        let tightest = worst_avg.exp();
        let uniform = system.sup_theta();
        let lambda = sigma.unwrap_or(if uniform < 1.0 { uniform } else { tightest });
        let certified = lambda > 0.0
            && lambda < 1.0
            && is_hyperbolic_time(&seq, n, lambda).unwrap_or(false);
        (lambda, Some(tightest), certified)
    };
    if mode == PreballMode::Strict && !certified {
        return Err(Error::NotHyperbolicTime { order: n, sigma: lambda });
    }

    // Image ball, clipped by the space on the interval domain.
    let c = *orbit.points.last().unwrap();
    let (d_left, d_right) = match system.domain.kind {
        DomainKind::Circle => (delta, delta),
        DomainKind::Interval => (delta.min(c), delta.min(1.0 - c)),
    };

    let (left, right) = match try_pullback(system, word, &orbit.points, n, d_left, d_right) {
        Ok(lr) => lr,
        Err(step) => {
            // Largest feasible delta by bisection (shrinking delta shrinks
            // every intermediate interval monotonically).
            let mut lo = 0.0;
            let mut hi = delta;
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                let (ml, mr) = match system.domain.kind {
                    DomainKind::Circle => (mid, mid),
                    DomainKind::Interval => (mid.min(c), mid.min(1.0 - c)),
                };
                if try_pullback(system, word, &orbit.points, n, ml, mr).is_ok() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Err(Error::ReduceDelta { step, feasible_delta: lo });
        }
    };

    let distortion_k = if lambda > 0.0 && lambda < 1.0 {
        let k = distortion_constant(holder.c1, holder.alpha, delta, lambda)?;
        // Overflowed bounds (lambda extremely close to 1) are no bounds.
        k.is_finite().then_some(k)
    } else {
        None
    };

    Ok(Preball {
        word: Word { indices: word.indices[..n].to_vec(), start_state: word.start_state },
        x,
        order: n,
        interval: PointedInterval { anchor: x, left, right },
        delta,
        lambda,
        sigma_tightest,
        certified,
        image_center: c,
        image_left_radius: d_left,
        image_right_radius: d_right,
        distortion_k,
        holder,
        orbit_points: orbit.points,
        log_derivs: orbit.log_derivs,
    })
}

/// Forward lift composition of the first n letters: monotone, so endpoint
/// images give exact interval lengths.
pub fn compose_lift(system: &GeneratorSystem, word: &Word, n: usize, z: f64) -> f64 {
    let mut z = z;
    for &idx in &word.indices[..n] {
        z = system.generators[(idx - 1) as usize].lift(z);
    }
    z
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionReport {
    pub samples: usize,
    /// max over sample pairs and levels i of
    /// d(f^i y, f^i z) - lambda^{n-i} d(f^n y, f^n z).
    pub max_margin: f64,
    pub pass: bool,
    /// (level, y, z) achieving the max margin.
    pub worst: Option<(usize, f64, f64)>,
    /// max over samples of diam bound check: diam(V) - 2 delta lambda^n.
    pub diam_margin: f64,
}

/// Contraction slack: the inequality is checked up to this absolute
/// tolerance.
pub const CONTRACTION_SLACK: f64 = 1e-10;

/// Verifies the level-by-level contraction inequality on all pairs from
/// `samples` equispaced points of the closed preball.
pub fn verify_contraction(
    system: &GeneratorSystem,
    pb: &Preball,
    samples: usize,
) -> Result<ContractionReport> {
    if samples < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 sample points".into(),
        ));
    }
    let n = pb.order;
    let pts = pb.interval.samples(samples);
    // Forward orbits of every sample, in canonical coordinates.
    let mut orbits: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    for &p0 in &pts {
        let mut row = Vec::with_capacity(n + 1);
        let mut p = system.domain.canonicalize(p0);
        row.push(p);
        for &idx in &pb.word.indices[..n] {
            p = system.generators[(idx - 1) as usize].eval(p);
            row.push(p);
        }
        orbits.push(row);
    }
    let mut max_margin = f64::NEG_INFINITY;
    let mut worst = None;
    for s in 0..pts.len() {
        for t in (s + 1)..pts.len() {
            let d_final = system.domain.distance(orbits[s][n], orbits[t][n]);
            for i in 0..=n {
                let d_i = system.domain.distance(orbits[s][i], orbits[t][i]);
                let bound = pb.lambda.powi((n - i) as i32) * d_final;
                let margin = d_i - bound;
                if margin > max_margin {
                    max_margin = margin;
                    worst = Some((i, pts[s], pts[t]));
                }
            }
        }
    }
    let diam_margin = pb.interval.diam() - 2.0 * pb.delta * pb.lambda.powi(n as i32);
    Ok(ContractionReport {
        samples,
        max_margin,
        pass: max_margin <= CONTRACTION_SLACK && diam_margin <= CONTRACTION_SLACK,
        worst,
        diam_margin,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityRecord {
    /// Distance from the base point to the nearest endpoint of V.
    pub r: f64,
    /// Distance to the farthest endpoint.
    pub big_r: f64,
    /// Birkhoff sum of log theta along the orbit.
    pub s_n_phi: f64,
    /// r >= delta * K^{-1} * exp(s_n_phi) (per-side image radii respected).
    pub lower_ok: bool,
    /// R <= delta * K * exp(s_n_phi).
    pub upper_ok: bool,
    pub ratio: f64,
    /// The ball-regularity constant L = K^2.
    pub l_bound: f64,
    /// R <= K^2 r, adjusted for clipped image radii.
    pub ratio_ok: bool,
    /// m(B(x, R)) <= (R/r) m(B(x, r)) for the domain's ball measure.
    pub ball_measure_ok: bool,
    pub pass: bool,
}

/// Checks the two-sided radius bounds delta K^{-1} e^{S} <= r <= R <=
/// delta K e^{S} and the ball-regularity ratio R <= K^2 r.
pub fn check_regularity(system: &GeneratorSystem, pb: &Preball) -> Result<RegularityRecord> {
    let k = pb.distortion_k.ok_or_else(|| {
        Error::InvalidParameter("no distortion bound: preball has no certified rate".into())
    })?;
    let s_n_phi: f64 = -pb.log_derivs.iter().sum::<f64>();
    let growth = s_n_phi.exp();
    let slack = 1e-9;
    // Per-side bounds with the actual (possibly clipped) image radii.
    let lower_ok = pb.interval.left >= pb.image_left_radius / k * growth * (1.0 - slack)
        && pb.interval.right >= pb.image_right_radius / k * growth * (1.0 - slack);
    let upper_ok = pb.interval.left <= pb.image_left_radius * k * growth * (1.0 + slack)
        && pb.interval.right <= pb.image_right_radius * k * growth * (1.0 + slack);
    let r = pb.interval.left.min(pb.interval.right);
    let big_r = pb.interval.left.max(pb.interval.right);
    let clip_skew = if pb.image_left_radius.min(pb.image_right_radius) > 0.0 {
        pb.image_left_radius.max(pb.image_right_radius)
            / pb.image_left_radius.min(pb.image_right_radius)
    } else {
        f64::INFINITY
    };
    let ratio = if r > 0.0 { big_r / r } else { f64::INFINITY };
    let l_bound = k * k;
    let ratio_ok = big_r <= l_bound * clip_skew * r * (1.0 + slack);
    let mb_r = system.domain.ball_measure(pb.x, big_r);
    let mb_s = system.domain.ball_measure(pb.x, r);
    let ball_measure_ok = mb_r <= ratio * mb_s * (1.0 + slack) + 1e-15;
    Ok(RegularityRecord {
        r,
        big_r,
        s_n_phi,
        lower_ok,
        upper_ok,
        ratio,
        l_bound,
        ratio_ok,
        ball_measure_ok,
        pass: lower_ok && upper_ok && ratio_ok && ball_measure_ok,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionReport {
    pub k_bound: f64,
    /// max over tested pairs of [m(f^n A) * m(B)] / [m(f^n B) * m(A)].
    pub max_observed_ratio: f64,
    pub pass: bool,
    pub pairs_tested: usize,
    pub pairs_skipped: usize,
    pub regularity: Option<RegularityRecord>,
}

/// Relative slack for the distortion bound comparison.
pub const DISTORTION_SLACK: f64 = 1e-9;

/// Verifies m(f^n A)/m(f^n B) <= K m(A)/m(B) for the given subinterval
/// pairs of V, with interval lengths measured exactly through monotone
/// lift endpoints. Zero-length intervals are skipped with a note.
pub fn check_bounded_distortion(
    system: &GeneratorSystem,
    pb: &Preball,
    pairs: &[((f64, f64), (f64, f64))],
) -> Result<DistortionReport> {
    let k = pb.distortion_k.ok_or_else(|| {
        Error::InvalidParameter("no distortion bound: preball has no certified rate".into())
    })?;
    let n = pb.order;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut tested = 0;
    let mut skipped = 0;
    for &((a_lo, a_hi), (b_lo, b_hi)) in pairs {
        for &(lo, hi) in [&(a_lo, a_hi), &(b_lo, b_hi)] {
            if lo < pb.interval.lo() - 1e-12 || hi > pb.interval.hi() + 1e-12 || lo > hi {
                return Err(Error::InvalidParameter(format!(
                    "subinterval [{lo}, {hi}] is not inside the preball"
                )));
            }
        }
        let len_a = a_hi - a_lo;
        let len_b = b_hi - b_lo;
        if len_a <= 0.0 || len_b <= 0.0 {
            skipped += 1;
            continue;
        }
        let im_a = compose_lift(system, &pb.word, n, a_hi) - compose_lift(system, &pb.word, n, a_lo);
        let im_b = compose_lift(system, &pb.word, n, b_hi) - compose_lift(system, &pb.word, n, b_lo);
        // Product form keeps the affine case bit-exact.
        let ratio = (im_a * len_b) / (im_b * len_a);
        max_ratio = max_ratio.max(ratio);
        tested += 1;
    }
    let regularity = check_regularity(system, pb).ok();
    let pass = tested == 0 || max_ratio <= k * (1.0 + DISTORTION_SLACK);
    Ok(DistortionReport {
        k_bound: k,
        max_observed_ratio: if tested == 0 { 1.0 } else { max_ratio },
        pass,
        pairs_tested: tested,
        pairs_skipped: skipped,
        regularity,
    })
}

/// Seeded random subinterval pairs inside V. Lengths are kept above
/// 1e-3 * diam(V) so endpoint-difference cancellation cannot contaminate
/// the exact ratio arithmetic.
pub fn random_subinterval_pairs(
    pb: &Preball,
    count: usize,
    rng: &mut CounterRng,
) -> Vec<((f64, f64), (f64, f64))> {
    let (lo, hi) = (pb.interval.lo(), pb.interval.hi());
    let diam = hi - lo;
    let min_len = 1e-3 * diam;
    let draw = |rng: &mut CounterRng| -> (f64, f64) {
        loop {
            let u = rng.uniform(lo, hi);
            let v = rng.uniform(lo, hi);
            let (a, b) = if u <= v { (u, v) } else { (v, u) };
            if b - a >= min_len {
                return (a, b);
            }
        }
    };
    (0..count)
        .map(|_| {
            let a = draw(rng);
            let b = draw(rng);
            (a, b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpace;
    use crate::map::{MapFamily, SmoothMap1D};
    use crate::system::Mode;

    fn doubling_sys() -> GeneratorSystem {
        let f = SmoothMap1D::new(
            DomainSpace::circle(),
            MapFamily::Affine { slope: 2, offset: 0.0 },
            None,
        )
        .unwrap();
        GeneratorSystem::new(DomainSpace::circle(), vec![f], Mode::Semigroup).unwrap()
    }

    fn perturbed_sys(eps: f64) -> GeneratorSystem {
        let f = SmoothMap1D::new(
            DomainSpace::circle(),
            MapFamily::TrigPerturbed { degree: 2, eps },
            None,
        )
        .unwrap();
        GeneratorSystem::new(DomainSpace::circle(), vec![f], Mode::Semigroup).unwrap()
    }

    #[test]
    fn doubling_preball_exact_radius() {
        let sys = doubling_sys();
        let pb = build_preball(
            &sys,
            &Word::constant(1, 5),
            0.3,
            5,
            0.1,
            Some(0.5),
            PreballMode::Strict,
        )
        .unwrap();
        let expect = 0.1 / 32.0;
        assert!((pb.interval.left - expect).abs() < 1e-15);
        assert!((pb.interval.right - expect).abs() < 1e-15);
        assert!(pb.certified);
        assert_eq!(pb.distortion_k, Some(1.0));
    }

    #[test]
    fn order_zero_is_the_ball_itself() {
        let sys = doubling_sys();
        let pb = build_preball(
            &sys,
            &Word::new(vec![]),
            0.4,
            0,
            0.07,
            None,
            PreballMode::Strict,
        )
        .unwrap();
        assert!((pb.interval.left - 0.07).abs() < 1e-15);
        assert!((pb.interval.right - 0.07).abs() < 1e-15);
        let reg = check_regularity(&sys, &pb).unwrap();
        assert!((reg.r - 0.07).abs() < 1e-15);
        assert!((reg.big_r - 0.07).abs() < 1e-15);
        assert!(reg.pass);
    }

    #[test]
    fn perturbed_endpoints_round_trip() {
        let sys = perturbed_sys(0.05);
        let word = Word::constant(1, 8);
        let pb = build_preball(&sys, &word, 0.237, 8, 0.05, None, PreballMode::Strict).unwrap();
        // Forward lift images of the endpoints must be the image-ball
        // endpoints.
        let im_lo = compose_lift(&sys, &word, 8, pb.interval.lo());
        let im_hi = compose_lift(&sys, &word, 8, pb.interval.hi());
        let center_lift = compose_lift(&sys, &word, 8, pb.x);
        assert!((im_lo - (center_lift - pb.delta)).abs() < 1e-10);
        assert!((im_hi - (center_lift + pb.delta)).abs() < 1e-10);
        // The base point sits inside V.
        assert!(pb.interval.contains(pb.x));
    }

    #[test]
    fn contraction_doubling_tight() {
        let sys = doubling_sys();
        let pb = build_preball(
            &sys,
            &Word::constant(1, 6),
            0.11,
            6,
            0.1,
            Some(0.5),
            PreballMode::Strict,
        )
        .unwrap();
        let rep = verify_contraction(&sys, &pb, 16).unwrap();
        assert!(rep.pass);
        // Affine case: the inequality is an equality, margin ~ 0.
        assert!(rep.max_margin.abs() < 1e-12);
    }

    #[test]
    fn contraction_perturbed() {
        let sys = perturbed_sys(0.5);
        for n in [3usize, 7, 12] {
            let word = Word::constant(1, n);
            let pb =
                build_preball(&sys, &word, 0.41, n, 0.05, None, PreballMode::Strict).unwrap();
            let rep = verify_contraction(&sys, &pb, 64).unwrap();
            assert!(rep.pass, "order {n}: margin {}", rep.max_margin);
            assert!(rep.diam_margin <= CONTRACTION_SLACK);
        }
    }

    #[test]
    fn distortion_constant_closed_form() {
        assert_eq!(distortion_constant(0.0, 1.0, 0.1, 0.5).unwrap(), 1.0);
        let k = distortion_constant(1.0, 1.0, 0.1, 0.5).unwrap();
        assert!((k - (0.2f64).exp()).abs() < 1e-15);
        assert!(
            distortion_constant(1.0, 1.0, 0.2, 0.5).unwrap()
                > distortion_constant(1.0, 1.0, 0.1, 0.5).unwrap()
        );
        assert!(distortion_constant(1.0, 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn doubling_distortion_ratios_exactly_one() {
        let sys = doubling_sys();
        let pb = build_preball(
            &sys,
            &Word::constant(1, 9),
            0.77,
            9,
            0.05,
            Some(0.5),
            PreballMode::Strict,
        )
        .unwrap();
        let mut rng = CounterRng::new(11);
        let pairs = random_subinterval_pairs(&pb, 40, &mut rng);
        let rep = check_bounded_distortion(&sys, &pb, &pairs).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.max_observed_ratio, 1.0);
        assert_eq!(rep.k_bound, 1.0);
    }

    #[test]
    fn equal_pair_always_passes() {
        let sys = perturbed_sys(0.3);
        let pb = build_preball(
            &sys,
            &Word::constant(1, 5),
            0.2,
            5,
            0.05,
            None,
            PreballMode::Strict,
        )
        .unwrap();
        let sub = (pb.interval.lo() + 0.1 * pb.interval.diam(), pb.interval.hi());
        let rep = check_bounded_distortion(&sys, &pb, &[(sub, sub)]).unwrap();
        assert!(rep.pass);
        assert!((rep.max_observed_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perturbed_distortion_below_k() {
        let sys = perturbed_sys(0.5);
        let pb = build_preball(
            &sys,
            &Word::constant(1, 8),
            0.13,
            8,
            0.05,
            None,
            PreballMode::Strict,
        )
        .unwrap();
        let mut rng = CounterRng::new(99);
        let pairs = random_subinterval_pairs(&pb, 100, &mut rng);
        let rep = check_bounded_distortion(&sys, &pb, &pairs).unwrap();
        assert!(rep.pass, "max ratio {} vs K {}", rep.max_observed_ratio, rep.k_bound);
        assert!(rep.max_observed_ratio <= rep.k_bound * (1.0 + DISTORTION_SLACK));
        assert_eq!(rep.pairs_tested, 100);
    }

    #[test]
    fn image_length_matches_derivative_integral() {
        // Independent check that endpoint image lengths equal the integral
        // of |(f^n)'| over the subinterval (composite Simpson).
        let sys = perturbed_sys(0.5);
        let word = Word::constant(1, 8);
        let pb = build_preball(&sys, &word, 0.13, 8, 0.05, None, PreballMode::Strict).unwrap();
        let (lo, hi) = (pb.interval.lo(), pb.interval.hi());
        let deriv_n = |z: f64| -> f64 {
            let mut p = sys.domain.canonicalize(z);
            let mut d = 1.0;
            for _ in 0..8 {
                d *= sys.generators[0].deriv(p);
                p = sys.generators[0].eval(p);
            }
            d
        };
        let m = 2000; // even
        let h = (hi - lo) / m as f64;
        let mut integral = deriv_n(lo) + deriv_n(hi);
        for j in 1..m {
            let w = if j % 2 == 1 { 4.0 } else { 2.0 };
            integral += w * deriv_n(lo + j as f64 * h);
        }
        integral *= h / 3.0;
        let endpoint_len = compose_lift(&sys, &word, 8, hi) - compose_lift(&sys, &word, 8, lo);
        assert!(
            ((integral - endpoint_len) / endpoint_len).abs() < 1e-8,
            "integral {integral} vs endpoint length {endpoint_len}"
        );
    }

    #[test]
    fn regularity_perturbed() {
        let sys = perturbed_sys(0.5);
        let pb = build_preball(
            &sys,
            &Word::constant(1, 8),
            0.61,
            8,
            0.05,
            None,
            PreballMode::Strict,
        )
        .unwrap();
        let reg = check_regularity(&sys, &pb).unwrap();
        assert!(reg.pass, "{reg:?}");
        assert!(reg.ratio <= reg.l_bound * (1.0 + 1e-9));
    }

    #[test]
    fn nesting_of_orders() {
        let sys = perturbed_sys(0.5);
        let word = Word::constant(1, 10);
        let small = build_preball(&sys, &word, 0.29, 3, 0.05, None, PreballMode::Strict).unwrap();
        let large = build_preball(&sys, &word, 0.29, 10, 0.05, None, PreballMode::Strict).unwrap();
        assert!(large.interval.lo() >= small.interval.lo() - 1e-14);
        assert!(large.interval.hi() <= small.interval.hi() + 1e-14);
    }

    #[test]
    fn shrinkage_bound() {
        let sys = perturbed_sys(0.5);
        let word = Word::constant(1, 12);
        for n in 1..=12 {
            let pb = build_preball(&sys, &word, 0.53, n, 0.05, None, PreballMode::Strict).unwrap();
            assert!(
                pb.interval.diam() <= 2.0 * pb.delta * pb.lambda.powi(n as i32) + 1e-12,
                "order {n}"
            );
        }
    }

    #[test]
    fn strict_rejects_non_hyperbolic_order() {
        // A near-isometry with contraction stretches: at a point where
        // |f'| < 1 the first order is not hyperbolic for small sigma.
        let f = SmoothMap1D::new(
            DomainSpace::circle(),
            MapFamily::TrigPerturbed { degree: 1, eps: 0.5 },
            None,
        )
        .unwrap();
        let sys = GeneratorSystem::new(DomainSpace::circle(), vec![f], Mode::Semigroup).unwrap();
        // x = 0.5: f'(0.5) = 1 - 0.5 = 0.5 < 1... that expands theta, so
        // pick x = 0: f'(0) = 1.5 and sigma tiny so certification fails.
        let r = build_preball(
            &sys,
            &Word::constant(1, 1),
            0.0,
            1,
            0.05,
            Some(0.5),
            PreballMode::Strict,
        );
        assert!(matches!(r, Err(Error::NotHyperbolicTime { .. })));
        let pb = build_preball(
            &sys,
            &Word::constant(1, 1),
            0.0,
            1,
            0.05,
            Some(0.5),
            PreballMode::Advisory,
        )
        .unwrap();
        assert!(!pb.certified);
    }

    #[test]
    fn reduce_delta_when_ball_leaves_the_image() {
        // An interval map with range [0.1, 0.9]: a target ball poking past
        // the image boundary has no preimage, and the error must carry the
        // largest delta that still fits.
        let s = crate::spline::MonotoneSpline::new(
            vec![0.0, 1.0],
            vec![0.1, 0.9],
            vec![0.8, 0.8],
        )
        .unwrap();
        let f = SmoothMap1D::new(DomainSpace::interval(), MapFamily::Spline { spline: s }, None)
            .unwrap();
        let sys = GeneratorSystem::new(DomainSpace::interval(), vec![f], Mode::Semigroup).unwrap();
        // f(x) = 0.1 + 0.8 x exactly; f(0.95) = 0.86, so delta = 0.05 pokes
        // 0.01 past the image ceiling 0.9 and the largest feasible delta
        // is 0.04.
        let r = build_preball(
            &sys,
            &Word::constant(1, 1),
            0.95,
            1,
            0.05,
            Some(0.9),
            PreballMode::Advisory,
        );
        match r {
            Err(Error::ReduceDelta { step, feasible_delta }) => {
                assert_eq!(step, 0);
                assert!(
                    (feasible_delta - 0.04).abs() < 1e-6,
                    "feasible delta {feasible_delta}"
                );
                let again = build_preball(
                    &sys,
                    &Word::constant(1, 1),
                    0.95,
                    1,
                    feasible_delta * 0.999,
                    Some(0.9),
                    PreballMode::Advisory,
                );
                assert!(again.is_ok());
            }
            other => panic!("expected a reduce-delta error, got {other:?}"),
        }
    }

    #[test]
    fn delta_above_locality_scale_rejected() {
        let sys = doubling_sys();
        assert!(build_preball(
            &sys,
            &Word::constant(1, 3),
            0.1,
            3,
            0.3,
            None,
            PreballMode::Strict
        )
        .is_err());
    }

    #[test]
    fn interval_domain_clipped_ball() {
        // Interval diffeomorphism fixing both endpoints: image ball around
        // an endpoint-adjacent center is clipped, and the pullback respects
        // the clip.
        let f = SmoothMap1D::new(DomainSpace::interval(), MapFamily::Mobius { c: -0.4 }, None)
            .unwrap();
        let sys = GeneratorSystem::new(DomainSpace::interval(), vec![f], Mode::Semigroup).unwrap();
        // This map repels from 1 with rate 1/0.6; starting at 0.999 the
        // orbit endpoint is still within delta = 0.05 of the endpoint, so
        // the image ball is clipped on the right.
        let word = Word::constant(1, 4);
        let pb =
            build_preball(&sys, &word, 0.999, 4, 0.05, None, PreballMode::Advisory).unwrap();
        assert!(pb.image_right_radius < 0.05);
        assert!((pb.image_right_radius - (1.0 - pb.image_center)).abs() < 1e-15);
        assert!(pb.interval.hi() <= 1.0 + 1e-12);
        let im_hi = compose_lift(&sys, &word, 4, pb.interval.hi());
        assert!(im_hi <= 1.0 + 1e-10);
    }
}
