//! C^{1+alpha} local diffeomorphisms of the circle or the unit interval.
//!
//! A map carries its derivative in closed form: the registered families
//! are analytic expressions, and the spline backend stores derivative
//! values at knots. Nothing here is ever finite-differenced.
//!
//! Circle maps are handled through their monotone lift F: R -> R with
//! F(x + 1) = F(x) + m, where m >= 1 is the topological degree. Inverse
//! branches are computed on the lift by a Newton iteration bracketed by
//! bisection (closed forms where available).

use crate::domain::{DomainKind, DomainSpace};
use crate::error::{Error, Result};
use crate::spline::MonotoneSpline;
use serde::{Deserialize, Serialize};

/// Absolute residual tolerance for inverse-branch root finding.
pub const INVERSE_TOL: f64 = 1e-13;

/// Regularity data for log |f'|: |log f'(x) - log f'(y)| <= c1 * d(x,y)^alpha
/// whenever d(x, y) < epsilon. `epsilon` doubles as the locality scale that
/// caps preball radii.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct HolderData {
    pub alpha: f64,
    pub c1: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MapFamily {
    /// Circle: x -> slope * x + offset (mod 1). Degree = slope.
    Affine { slope: u32, offset: f64 },
    /// Circle: x -> degree * x + eps * sin(2 pi x) / (2 pi) (mod 1).
    /// Requires |eps| < degree so f' = degree + eps cos(2 pi x) > 0.
    TrigPerturbed { degree: u32, eps: f64 },
    /// Interval: x -> (1 + c) x / (1 + c x), a diffeomorphism of [0, 1]
    /// fixing both endpoints, with f'(0) = 1 + c and f'(1) = 1 / (1 + c).
    Mobius { c: f64 },
    /// Monotone cubic Hermite spline. On the interval the values must stay
    /// inside [0, 1]; on the circle the values must close the lift:
    /// values[last] - values[0] = degree, derivs[last] = derivs[0].
    Spline { spline: MonotoneSpline },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SmoothMap1D {
    pub domain: DomainSpace,
    #[serde(flatten)]
    pub family: MapFamily,
    pub holder: HolderData,
}

/// Grid used when estimating a Hoelder constant for spline maps.
const HOLDER_GRID: usize = 1 << 14;
/// Safety inflation applied to grid-estimated Hoelder constants.
const HOLDER_INFLATION: f64 = 1.25;

impl SmoothMap1D {
    /// Builds and validates. When `holder` is absent, a constant is derived:
    /// analytically for the closed-form families, by grid estimation
    /// (inflated by 25%) for splines.
    pub fn new(domain: DomainSpace, family: MapFamily, holder: Option<HolderData>) -> Result<Self> {
        validate_family(&domain, &family)?;
        let holder = match holder {
            Some(h) => {
                if !(h.alpha > 0.0 && h.alpha <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "holder alpha must lie in (0, 1], got {}",
                        h.alpha
                    )));
                }
                if h.c1 < 0.0 || !h.c1.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "holder constant must be finite and >= 0, got {}",
                        h.c1
                    )));
                }
                if !(h.epsilon > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "locality scale must be positive, got {}",
                        h.epsilon
                    )));
                }
                h
            }
            None => default_holder(&domain, &family),
        };
        Ok(SmoothMap1D { domain, family, holder })
    }

    /// Short human-readable tag used in reports.
    pub fn describe(&self) -> String {
        match &self.family {
            MapFamily::Affine { slope, offset } => format!("affine(m={slope}, offset={offset})"),
            MapFamily::TrigPerturbed { degree, eps } => {
                format!("trig_perturbed(m={degree}, eps={eps})")
            }
            MapFamily::Mobius { c } => format!("mobius(c={c})"),
            MapFamily::Spline { spline } => format!("spline({} pieces)", spline.pieces()),
        }
    }

    /// Topological degree (number of inverse branches over any point).
    pub fn degree(&self) -> u32 {
        match &self.family {
            MapFamily::Affine { slope, .. } => *slope,
            MapFamily::TrigPerturbed { degree, .. } => *degree,
            MapFamily::Mobius { .. } => 1,
            MapFamily::Spline { spline } => match self.domain.kind {
                DomainKind::Interval => 1,
                DomainKind::Circle => {
                    (spline.values.last().unwrap() - spline.values[0]).round() as u32
                }
            },
        }
    }

    /// Monotone lift F with F(x + 1) = F(x) + degree. For interval maps the
    /// lift is the map itself on [0, 1].
    pub fn lift(&self, x: f64) -> f64 {
        match &self.family {
            MapFamily::Affine { slope, offset } => f64::from(*slope) * x + offset,
            MapFamily::TrigPerturbed { degree, eps } => {
                f64::from(*degree) * x + eps * (2.0 * std::f64::consts::PI * x).sin()
                    / (2.0 * std::f64::consts::PI)
            }
            MapFamily::Mobius { c } => (1.0 + c) * x / (1.0 + c * x),
            MapFamily::Spline { spline } => match self.domain.kind {
                DomainKind::Interval => spline.eval(x),
                DomainKind::Circle => {
                    let k = x.floor();
                    let frac = x - k;
                    spline.eval(frac) + f64::from(self.degree()) * k
                }
            },
        }
    }

    /// The map itself: canonical point in, canonical point out.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let xc = self.domain.canonicalize(x);
        self.domain.canonicalize(self.lift(xc))
    }

    /// f'(x), evaluated in closed form at the canonical representative.
    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        let x = self.domain.canonicalize(x);
        match &self.family {
            MapFamily::Affine { slope, .. } => f64::from(*slope),
            MapFamily::TrigPerturbed { degree, eps } => {
                f64::from(*degree) + eps * (2.0 * std::f64::consts::PI * x).cos()
            }
            MapFamily::Mobius { c } => {
                let den = 1.0 + c * x;
                (1.0 + c) / (den * den)
            }
            MapFamily::Spline { spline } => spline.deriv(x),
        }
    }

    /// log theta(x) = -log |f'(x)|, the log inverse-Lipschitz observable.
    /// Errors if the derivative is numerically degenerate.
    pub fn log_theta(&self, x: f64) -> Result<f64> {
        let d = self.deriv(x).abs();
        if d < 1e-300 || !d.is_finite() {
            return Err(Error::DegenerateDerivative { x, deriv: d });
        }
        Ok(-d.ln())
    }

    /// Exact minimum of |f'| over the space.
    pub fn min_deriv(&self) -> f64 {
        match &self.family {
            MapFamily::Affine { slope, .. } => f64::from(*slope),
            MapFamily::TrigPerturbed { degree, eps } => f64::from(*degree) - eps.abs(),
            MapFamily::Mobius { c } => {
                if *c >= 0.0 {
                    1.0 / (1.0 + c)
                } else {
                    1.0 + c
                }
            }
            MapFamily::Spline { spline } => spline.min_derivative(),
        }
    }

    /// Exact maximum of |f'| over the space.
    pub fn max_deriv(&self) -> f64 {
        match &self.family {
            MapFamily::Affine { slope, .. } => f64::from(*slope),
            MapFamily::TrigPerturbed { degree, eps } => f64::from(*degree) + eps.abs(),
            MapFamily::Mobius { c } => {
                if *c >= 0.0 {
                    1.0 + c
                } else {
                    1.0 / (1.0 + c)
                }
            }
            MapFamily::Spline { spline } => {
                // Quadratic per piece: check endpoints and vertex, as in
                // min_derivative but maximizing.
                let mut best = f64::NEG_INFINITY;
                for k in 0..spline.pieces() {
                    let h = spline.knots[k + 1] - spline.knots[k];
                    let slope = (spline.values[k + 1] - spline.values[k]) / h;
                    let (d0, d1) = (spline.derivs[k], spline.derivs[k + 1]);
                    let a = 3.0 * (d0 + d1) - 6.0 * slope;
                    let b = 6.0 * slope - 4.0 * d0 - 2.0 * d1;
                    best = best.max(d0).max(a + b + d0);
                    if a.abs() > 0.0 {
                        let sv = -b / (2.0 * a);
                        if (0.0..=1.0).contains(&sv) {
                            best = best.max(a * sv * sv + b * sv + d0);
                        }
                    }
                }
                best
            }
        }
    }

    /// sup theta = 1 / min |f'|.
    pub fn sup_theta(&self) -> f64 {
        1.0 / self.min_deriv()
    }

    /// Solves F(z) = y on the lift. `hint` seeds the Newton iteration;
    /// closed forms are used where the family admits one.
    pub fn lift_inverse(&self, y: f64, hint: f64) -> Result<f64> {
        match &self.family {
            MapFamily::Affine { slope, offset } => Ok((y - offset) / f64::from(*slope)),
            MapFamily::Mobius { c } => {
                let den = 1.0 + c - c * y;
                if den <= 0.0 {
                    return Err(Error::RootFind { target: y, residual: f64::INFINITY });
                }
                Ok(y / den)
            }
            _ => self.newton_lift_inverse(y, hint),
        }
    }

    fn newton_lift_inverse(&self, y: f64, hint: f64) -> Result<f64> {
        // Bracket the root. The lift deviates from linear growth by less
        // than one period's worth of oscillation, so a window of +-2 around
        // the linear predictor almost always contains the root; expand
        // geometrically if not.
        let mut lo = hint - 1.0;
        let mut hi = hint + 1.0;
        let mut span = 1.0;
        for _ in 0..64 {
            let grow_lo = self.lift(lo) > y;
            let grow_hi = self.lift(hi) < y;
            if !grow_lo && !grow_hi {
                break;
            }
            span *= 2.0;
            if grow_lo {
                lo = hint - span;
            }
            if grow_hi {
                hi = hint + span;
            }
        }
        if self.lift(lo) > y || self.lift(hi) < y {
            if self.domain.kind == DomainKind::Interval {
                // y falls outside the image of [0, 1].
                return Err(Error::RootFind { target: y, residual: f64::INFINITY });
            }
            return Err(Error::RootFind {
                target: y,
                residual: (self.lift(hint) - y).abs(),
            });
        }
        if self.domain.kind == DomainKind::Interval {
            lo = lo.max(0.0);
            hi = hi.min(1.0);
        }
        let mut z = hint.clamp(lo, hi);
        let scale = y.abs().max(1.0);
        for _ in 0..200 {
            let fz = self.lift(z) - y;
            if fz.abs() <= INVERSE_TOL * scale {
                return Ok(z);
            }
            if fz > 0.0 {
                hi = z;
            } else {
                lo = z;
            }
            let d = if self.domain.kind == DomainKind::Interval {
                self.deriv(z.clamp(0.0, 1.0))
            } else {
                self.deriv(z - z.floor())
            };
            let newton = z - fz / d;
            // Fall back to bisection whenever Newton exits the bracket.
            z = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-17 {
                break;
            }
        }
        let residual = (self.lift(z) - y).abs();
        if residual <= 1e-9 * scale {
            // Accept: bisection stalled on the last bits but the root is
            // located to far better than any tolerance used downstream.
            Ok(z)
        } else {
            Err(Error::RootFind { target: y, residual })
        }
    }

    /// Inverse branch b in 0..degree: the unique z in [0, 1) with
    /// f(z) = y and lift offset b. For interval maps b must be 0 and y must
    /// lie in the image of [0, 1].
    pub fn inverse_branch(&self, y: f64, branch: u32) -> Result<f64> {
        if branch >= self.degree() {
            return Err(Error::InvalidParameter(format!(
                "branch {branch} out of range for degree {}",
                self.degree()
            )));
        }
        match self.domain.kind {
            DomainKind::Interval => {
                let y = self.domain.canonicalize(y);
                let (im_lo, im_hi) = (self.lift(0.0), self.lift(1.0));
                if y < im_lo - 1e-12 || y > im_hi + 1e-12 {
                    return Err(Error::RootFind { target: y, residual: f64::INFINITY });
                }
                let z = self.lift_inverse(y.clamp(im_lo, im_hi), 0.5)?;
                Ok(z.clamp(0.0, 1.0))
            }
            DomainKind::Circle => {
                let y = self.domain.canonicalize(y);
                let f0 = self.lift(0.0);
                let mut t = y - f0;
                t -= t.floor(); // lift target within the first period
                let target = f0 + t + f64::from(branch);
                let m = f64::from(self.degree());
                let z = self.lift_inverse(target, (target - f0) / m)?;
                Ok(self.domain.canonicalize(z))
            }
        }
    }
}

fn validate_family(domain: &DomainSpace, family: &MapFamily) -> Result<()> {
    match family {
        MapFamily::Affine { slope, offset } => {
            if domain.kind != DomainKind::Circle {
                return Err(Error::InvalidParameter(
                    "affine family is defined on the circle".into(),
                ));
            }
            if *slope < 1 {
                return Err(Error::InvalidParameter("affine slope must be >= 1".into()));
            }
            if !offset.is_finite() {
                return Err(Error::InvalidParameter("affine offset must be finite".into()));
            }
        }
        MapFamily::TrigPerturbed { degree, eps } => {
            if domain.kind != DomainKind::Circle {
                return Err(Error::InvalidParameter(
                    "trig_perturbed family is defined on the circle".into(),
                ));
            }
            if *degree < 1 {
                return Err(Error::InvalidParameter("degree must be >= 1".into()));
            }
            // Keeps f' = degree + eps cos(2 pi x) strictly positive, which
            // also pins the topological degree.
            if !(eps.abs() < f64::from(*degree)) {
                return Err(Error::InvalidParameter(format!(
                    "|eps| must be below the degree {degree} so the derivative stays positive, got {eps}"
                )));
            }
        }
        MapFamily::Mobius { c } => {
            if domain.kind != DomainKind::Interval {
                return Err(Error::InvalidParameter(
                    "mobius family is defined on the interval".into(),
                ));
            }
            if !(*c > -1.0) || !c.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "mobius parameter must satisfy c > -1, got {c}"
                )));
            }
        }
        MapFamily::Spline { spline } => {
            if spline.min_derivative() <= 0.0 {
                return Err(Error::InvalidParameter(
                    "spline derivative must stay strictly positive".into(),
                ));
            }
            match domain.kind {
                DomainKind::Interval => {
                    let v0 = spline.values[0];
                    let v1 = *spline.values.last().unwrap();
                    if v0 < 0.0 || v1 > 1.0 {
                        return Err(Error::InvalidParameter(format!(
                            "interval spline range [{v0}, {v1}] leaves [0, 1]"
                        )));
                    }
                }
                DomainKind::Circle => {
                    let m = spline.values.last().unwrap() - spline.values[0];
                    if (m - m.round()).abs() > 1e-12 || m.round() < 1.0 {
                        return Err(Error::InvalidParameter(format!(
                            "circle spline must close the lift with integer degree >= 1, got {m}"
                        )));
                    }
                    let d0 = spline.derivs[0];
                    let d1 = *spline.derivs.last().unwrap();
                    if (d0 - d1).abs() > 1e-12 {
                        return Err(Error::InvalidParameter(
                            "circle spline needs matching endpoint derivatives".into(),
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

fn default_holder(domain: &DomainSpace, family: &MapFamily) -> HolderData {
    match family {
        MapFamily::Affine { .. } => HolderData { alpha: 1.0, c1: 0.0, epsilon: 0.25 },
        MapFamily::TrigPerturbed { degree, eps } => {
            // |d/dx log f'| = |2 pi eps sin| / (m + eps cos) <= 2 pi |eps| / (m - |eps|).
            let m = f64::from(*degree);
            let c1 = 2.0 * std::f64::consts::PI * eps.abs() / (m - eps.abs());
            HolderData { alpha: 1.0, c1, epsilon: 0.25 }
        }
        MapFamily::Mobius { c } => {
            // |d/dx log f'| = 2|c| / (1 + c x) <= 2|c| / min(1, 1 + c).
            let c1 = 2.0 * c.abs() / (1.0f64).min(1.0 + c);
            HolderData { alpha: 1.0, c1, epsilon: 1.0 }
        }
        MapFamily::Spline { spline } => {
            let epsilon = match domain.kind {
                DomainKind::Circle => 0.25,
                DomainKind::Interval => 1.0,
            };
            let c1 = estimate_spline_holder(domain, spline, 1.0, epsilon);
            HolderData { alpha: 1.0, c1, epsilon }
        }
    }
}

/// Grid estimate of sup |log f'(x) - log f'(y)| / d(x, y)^alpha over pairs
/// at scales between epsilon/100 and epsilon, inflated for safety.
fn estimate_spline_holder(
    domain: &DomainSpace,
    spline: &MonotoneSpline,
    alpha: f64,
    epsilon: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    let scales = 8;
    for s in 0..scales {
        // Geometric ladder from epsilon/100 up to epsilon.
        let scale = epsilon * (0.01f64).powf(1.0 - s as f64 / (scales - 1) as f64);
        for i in 0..HOLDER_GRID {
            let x = i as f64 / HOLDER_GRID as f64;
            let y = match domain.kind {
                DomainKind::Circle => (x + scale) - (x + scale).floor(),
                DomainKind::Interval => {
                    let y = x + scale;
                    if y > 1.0 {
                        continue;
                    }
                    y
                }
            };
            let lx = spline.deriv(x).ln();
            let ly = spline.deriv(y).ln();
            let d = domain.distance(x, y);
            if d > 0.0 {
                worst = worst.max((lx - ly).abs() / d.powf(alpha));
            }
        }
    }
    worst * HOLDER_INFLATION
}
