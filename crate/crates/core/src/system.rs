//! Finite generator systems and orbit composition.
//!
//! A `GeneratorSystem` is a finite ordered list of maps over a shared
//! domain. In `Semigroup` mode a word is any finite sequence of generator
//! indices; in `Sequence` mode the generators are the successive maps of a
//! non-autonomous system, so the only legal word starting at state k is
//! (k, k+1, k+2, ...).
//!
//! Indices are 1-based throughout, matching the usual labeling of
//! generators f_1, ..., f_d.

use crate::domain::DomainSpace;
use crate::error::{Error, Result};
use crate::map::{HolderData, SmoothMap1D};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Words pick freely among the generators.
    Semigroup,
    /// Generator i is the i-th map of a time-ordered sequence; words are
    /// forced to be consecutive runs of indices.
    Sequence,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSystem {
    pub domain: DomainSpace,
    pub generators: Vec<SmoothMap1D>,
    pub mode: Mode,
}

/// A finite word of 1-based generator indices. `start_state` is the fiber
/// time at which the word begins (relevant in sequence mode; 1 by default).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub indices: Vec<u32>,
    pub start_state: u32,
}

impl Word {
    pub fn new(indices: Vec<u32>) -> Self {
        Word { indices, start_state: 1 }
    }

    pub fn with_start(indices: Vec<u32>, start_state: u32) -> Self {
        Word { indices, start_state }
    }

    /// The constant word (j, j, ..., j) of length n.
    pub fn constant(j: u32, n: usize) -> Self {
        Word::new(vec![j; n])
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// An orbit segment together with the per-step log-derivatives.
/// `points[i]` is the i-th image of the base point; `log_derivs[i]` is
/// log |f'(points[i])| for the map applied at step i, so the chain rule
/// reads log |(f^n)'(x0)| = sum of log_derivs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub x0: f64,
    pub word: Word,
    pub points: Vec<f64>,
    pub log_derivs: Vec<f64>,
}

impl OrbitRecord {
    /// Number of composed steps n (points has n + 1 entries).
    pub fn len(&self) -> usize {
        self.log_derivs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_derivs.is_empty()
    }

    /// log |(f^n)'(x0)| by the chain rule.
    pub fn total_log_deriv(&self) -> f64 {
        self.log_derivs.iter().sum()
    }

    /// The log inverse-Lipschitz sequence along the orbit:
    /// values[i] = -log |f'(points[i])| = log theta at step i.
    pub fn log_theta_values(&self) -> Vec<f64> {
        self.log_derivs.iter().map(|d| -d).collect()
    }

    pub fn endpoint(&self) -> f64 {
        *self.points.last().unwrap()
    }
}

impl GeneratorSystem {
    pub fn new(domain: DomainSpace, generators: Vec<SmoothMap1D>, mode: Mode) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidParameter(
                "a system needs at least one generator".into(),
            ));
        }
        for (i, g) in generators.iter().enumerate() {
            if g.domain != domain {
                return Err(Error::InvalidParameter(format!(
                    "generator {} lives on a different domain than the system",
                    i + 1
                )));
            }
        }
        Ok(GeneratorSystem { domain, generators, mode })
    }

    /// Number of generators d.
    pub fn d(&self) -> usize {
        self.generators.len()
    }

    /// Generator by 1-based index.
    pub fn generator(&self, index: u32) -> Result<&SmoothMap1D> {
        if index == 0 || index as usize > self.generators.len() {
            return Err(Error::InvalidWord(format!(
                "index {index} outside 1..={}",
                self.generators.len()
            )));
        }
        Ok(&self.generators[(index - 1) as usize])
    }

    /// Validates the first n letters of a word: length, index range, and
    /// the consecutive-run constraint in sequence mode.
    pub fn check_word(&self, word: &Word, n: usize) -> Result<()> {
        if n > word.indices.len() {
            return Err(Error::WordTooShort { needed: n, have: word.indices.len() });
        }
        for (i, &idx) in word.indices[..n].iter().enumerate() {
            if idx == 0 || idx as usize > self.d() {
                return Err(Error::InvalidWord(format!(
                    "index {idx} at position {i} outside 1..={}",
                    self.d()
                )));
            }
            if self.mode == Mode::Sequence {
                let expected = word.start_state as usize + i;
                if idx as usize != expected {
                    return Err(Error::InvalidWord(format!(
                        "sequence mode requires index {expected} at position {i}, got {idx}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Composes the first n letters of the word from x0, recording every
    /// intermediate point and per-step log-derivative.
    pub fn compose_orbit(&self, word: &Word, x0: f64, n: usize) -> Result<OrbitRecord> {
        self.check_word(word, n)?;
        let mut points = Vec::with_capacity(n + 1);
        let mut log_derivs = Vec::with_capacity(n);
        let mut x = self.domain.canonicalize(x0);
        points.push(x);
        for &idx in &word.indices[..n] {
            let g = &self.generators[(idx - 1) as usize];
            let d = g.deriv(x).abs();
            if d < 1e-300 || !d.is_finite() {
                return Err(Error::DegenerateDerivative { x, deriv: d });
            }
            log_derivs.push(d.ln());
            x = g.eval(x);
            points.push(x);
        }
        Ok(OrbitRecord { x0: points[0], word: word.clone(), points, log_derivs })
    }

    /// Endpoint of the n-step composition (no intermediate storage).
    pub fn compose_point(&self, word: &Word, x0: f64, n: usize) -> Result<f64> {
        self.check_word(word, n)?;
        let mut x = self.domain.canonicalize(x0);
        for &idx in &word.indices[..n] {
            x = self.generators[(idx - 1) as usize].eval(x);
        }
        Ok(x)
    }

    /// Conservative joint regularity data: the weakest exponent, the largest
    /// constant, and the smallest locality scale among the generators. Valid
    /// because all distances on these domains are <= 1, so lowering alpha
    /// only enlarges d^alpha.
    pub fn holder(&self) -> HolderData {
        let mut alpha = f64::INFINITY;
        let mut c1: f64 = 0.0;
        let mut epsilon = f64::INFINITY;
        for g in &self.generators {
            alpha = alpha.min(g.holder.alpha);
            c1 = c1.max(g.holder.c1);
            epsilon = epsilon.min(g.holder.epsilon);
        }
        HolderData { alpha, c1, epsilon }
    }

    /// sup theta over all generators and points: the worst inverse-Lipschitz
    /// constant 1 / min |f'|.
    pub fn sup_theta(&self) -> f64 {
        self.generators
            .iter()
            .map(|g| g.sup_theta())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// A uniform pullback radius for the system: the largest delta <= the
    /// joint locality scale such that every generator is injective on every
    /// ball of radius delta * sup theta (checked over a grid of 2^12
    /// centers), then halved for safety margin.
    pub fn uniform_preball_radius(&self) -> f64 {
        let eps = self.holder().epsilon;
        let sup_theta = self.sup_theta();
        let feasible = |delta: f64| -> bool {
            let r = delta * sup_theta;
            for g in &self.generators {
                if g.degree() <= 1 {
                    // Monotone bijections onto their image are injective on
                    // any ball.
                    continue;
                }
                // Injective on an arc iff the lift image spans at most one
                // period; scan 2^12 centers for the widest image.
                let centers = 1 << 12;
                for i in 0..centers {
                    let c = i as f64 / centers as f64;
                    if g.lift(c + r) - g.lift(c - r) > 1.0 {
                        return false;
                    }
                }
            }
            true
        };
        let delta = if feasible(eps) {
            eps
        } else {
            let mut lo = 0.0;
            let mut hi = eps;
            for _ in 0..48 {
                let mid = 0.5 * (lo + hi);
                if feasible(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        delta / 2.0
    }
}

/// Birkhoff sum of an observable over the first n orbit points:
/// sum_{i=0}^{n-1} observable(points[i]).
pub fn birkhoff_sum<F: Fn(f64) -> f64>(orbit: &OrbitRecord, observable: F, n: usize) -> Result<f64> {
    if n > orbit.len() {
        return Err(Error::WordTooShort { needed: n, have: orbit.len() });
    }
    Ok(orbit.points[..n].iter().map(|&x| observable(x)).sum())
}

/// log theta(x) = -log |f'(x)| for a single map.
pub fn log_inverse_lipschitz(map: &SmoothMap1D, x: f64) -> Result<f64> {
    map.log_theta(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::MapFamily;

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
    fn doubling_orbit_closed_form() {
        let sys = doubling_sys();
        let orbit = sys.compose_orbit(&Word::constant(1, 3), 0.1, 3).unwrap();
        let expect = [0.1, 0.2, 0.4, 0.8];
        for (p, e) in orbit.points.iter().zip(expect.iter()) {
            assert!((p - e).abs() < 1e-15);
        }
        for d in &orbit.log_derivs {
            assert!((d - 2.0f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_steps_is_identity() {
        let sys = doubling_sys();
        let orbit = sys.compose_orbit(&Word::new(vec![]), 0.37, 0).unwrap();
        assert_eq!(orbit.points, vec![0.37]);
        assert!(orbit.log_derivs.is_empty());
    }

    #[test]
    fn word_validation() {
        let sys = doubling_sys();
        assert!(matches!(
            sys.compose_orbit(&Word::constant(1, 2), 0.1, 5),
            Err(Error::WordTooShort { needed: 5, have: 2 })
        ));
        assert!(matches!(
            sys.compose_orbit(&Word::new(vec![1, 2]), 0.1, 2),
            Err(Error::InvalidWord(_))
        ));
        assert!(matches!(
            sys.compose_orbit(&Word::new(vec![0]), 0.1, 1),
            Err(Error::InvalidWord(_))
        ));
    }

    #[test]
    fn sequence_mode_forces_consecutive_indices() {
        let mk = |eps| {
            SmoothMap1D::new(
                DomainSpace::circle(),
                MapFamily::TrigPerturbed { degree: 2, eps },
                None,
            )
            .unwrap()
        };
        let sys = GeneratorSystem::new(
            DomainSpace::circle(),
            vec![mk(0.1), mk(0.2), mk(0.3)],
            Mode::Sequence,
        )
        .unwrap();
        assert!(sys.compose_orbit(&Word::new(vec![1, 2, 3]), 0.5, 3).is_ok());
        assert!(sys
            .compose_orbit(&Word::with_start(vec![2, 3], 2), 0.5, 2)
            .is_ok());
        assert!(matches!(
            sys.compose_orbit(&Word::new(vec![2, 1]), 0.5, 2),
            Err(Error::InvalidWord(_))
        ));
    }

    #[test]
    fn chain_rule_matches_lift_finite_difference() {
        let sys = perturbed_sys(0.5);
        let word = Word::constant(1, 6);
        for j in 0..20 {
            let x = 0.017 + j as f64 * 0.047;
            let orbit = sys.compose_orbit(&word, x, 6).unwrap();
            // Compose lifts directly for an independent derivative estimate.
            let g = &sys.generators[0];
            let lift_n = |mut z: f64| {
                for _ in 0..6 {
                    z = g.lift(z);
                }
                z
            };
            let h = 1e-6;
            let fd = (lift_n(x + h) - lift_n(x - h)) / (2.0 * h);
            let rel = (orbit.total_log_deriv() - fd.ln()).abs() / fd.ln().abs();
            assert!(rel < 1e-6, "relative error {rel}");
        }
    }

    #[test]
    fn birkhoff_sum_basics() {
        let sys = doubling_sys();
        let orbit = sys.compose_orbit(&Word::constant(1, 100), 0.123, 100).unwrap();
        let s = birkhoff_sum(&orbit, |_| -(2.0f64.ln()), 100).unwrap();
        assert!((s + 100.0 * 2.0f64.ln()).abs() < 1e-12);
        let z = birkhoff_sum(&orbit, |_| 0.0, 100).unwrap();
        assert_eq!(z, 0.0);
        assert!(birkhoff_sum(&orbit, |x| x, 101).is_err());
    }

    #[test]
    fn cocycle_additivity() {
        let sys = perturbed_sys(0.4);
        let psi = {
            let g = sys.generators[0].clone();
            move |x: f64| g.log_theta(x).unwrap()
        };
        let word = Word::constant(1, 12);
        let x = 0.237;
        let orbit = sys.compose_orbit(&word, x, 12).unwrap();
        let (n, m) = (7, 5);
        let left = birkhoff_sum(&orbit, &psi, n + m).unwrap();
        let first = birkhoff_sum(&orbit, &psi, n).unwrap();
        let tail_orbit = sys
            .compose_orbit(&Word::constant(1, m), orbit.points[n], m)
            .unwrap();
        let second = birkhoff_sum(&tail_orbit, &psi, m).unwrap();
        assert!((left - (first + second)).abs() < 1e-10);
    }

    #[test]
    fn log_theta_times_deriv_is_one() {
        let sys = perturbed_sys(0.5);
        let g = &sys.generators[0];
        for i in 0..1000 {
            let x = i as f64 / 1000.0;
            let theta = (-g.deriv(x).abs().ln()).exp();
            assert!((theta * g.deriv(x).abs() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn uniform_radius_doubling() {
        let sys = doubling_sys();
        // sup theta = 1/2, locality scale 0.25; doubling is injective on
        // any arc of length <= 1/2, so the full scale is feasible and the
        // returned radius is 0.25 / 2.
        let delta = sys.uniform_preball_radius();
        assert!((delta - 0.125).abs() < 1e-12);
    }

    #[test]
    fn rejects_mixed_domains() {
        let f = SmoothMap1D::new(
            DomainSpace::circle(),
            MapFamily::Affine { slope: 2, offset: 0.0 },
            None,
        )
        .unwrap();
        let g = SmoothMap1D::new(DomainSpace::interval(), MapFamily::Mobius { c: 0.5 }, None)
            .unwrap();
        assert!(GeneratorSystem::new(DomainSpace::circle(), vec![f, g], Mode::Semigroup).is_err());
    }
}
