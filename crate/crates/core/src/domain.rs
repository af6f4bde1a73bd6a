//! The two compact 1-D phase spaces: the circle R/Z and the unit interval.
//!
//! Points live in [0, 1). Circle points are canonicalized by reduction
//! mod 1; interval points are clamped to [0, 1]. All metric quantities are
//! normalized so each space has total Lebesgue measure 1.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Circle,
    Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSpace {
    pub kind: DomainKind,
}

impl DomainSpace {
    pub fn circle() -> Self {
        DomainSpace { kind: DomainKind::Circle }
    }

    pub fn interval() -> Self {
        DomainSpace { kind: DomainKind::Interval }
    }

    /// Canonical representative of a point. Idempotent: applying it twice
    /// yields the same bit pattern as applying it once.
    #[inline]
    pub fn canonicalize(&self, x: f64) -> f64 {
        match self.kind {
            DomainKind::Circle => {
                let y = x - x.floor();
                // x.floor() == x for integer x gives y = 0; negative inputs
                // land in [0,1); y can equal 1.0 only by rounding, fold it.
                if y >= 1.0 {
                    0.0
                } else {
                    y
                }
            }
            DomainKind::Interval => x.clamp(0.0, 1.0),
        }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        match self.kind {
            DomainKind::Circle => (0.0..1.0).contains(&x),
            DomainKind::Interval => (0.0..=1.0).contains(&x),
        }
    }

    /// Distance between canonical points. On the circle this is arc
    /// distance min(|x-y|, 1-|x-y|); on the interval, |x-y|.
    #[inline]
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        match self.kind {
            DomainKind::Circle => d.min(1.0 - d).max(0.0),
            DomainKind::Interval => d,
        }
    }

    /// Lebesgue measure of the metric ball B(c, r), clipped to the space.
    pub fn ball_measure(&self, c: f64, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match self.kind {
            DomainKind::Circle => (2.0 * r).min(1.0),
            DomainKind::Interval => {
                let lo = (c - r).max(0.0);
                let hi = (c + r).min(1.0);
                (hi - lo).max(0.0)
            }
        }
    }

    /// Endpoints of the metric ball B(c, r) as an ordered pair. On the
    /// circle the pair is (c - r, c + r) in lift coordinates (may leave
    /// [0,1)); on the interval it is clipped.
    pub fn ball_endpoints(&self, c: f64, r: f64) -> (f64, f64) {
        match self.kind {
            DomainKind::Circle => (c - r, c + r),
            DomainKind::Interval => ((c - r).max(0.0), (c + r).min(1.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_canonicalize_wraps() {
        let d = DomainSpace::circle();
        assert_eq!(d.canonicalize(1.25), 0.25);
        assert_eq!(d.canonicalize(-0.25), 0.75);
        assert_eq!(d.canonicalize(3.0), 0.0);
        assert_eq!(d.canonicalize(0.0), 0.0);
    }

    #[test]
    fn canonicalize_is_idempotent_bitwise() {
        let d = DomainSpace::circle();
        for &x in &[0.0, 0.1, 0.999999999, -5.3, 17.77, 1.0 - 1e-17] {
            let once = d.canonicalize(x);
            let twice = d.canonicalize(once);
            assert_eq!(once.to_bits(), twice.to_bits(), "x = {x}");
        }
        let i = DomainSpace::interval();
        for &x in &[-0.5, 0.0, 0.5, 1.0, 1.5] {
            let once = i.canonicalize(x);
            assert_eq!(once.to_bits(), i.canonicalize(once).to_bits());
        }
    }

    #[test]
    fn circle_distance_takes_short_arc() {
        let d = DomainSpace::circle();
        assert!((d.distance(0.1, 0.9) - 0.2).abs() < 1e-15);
        assert!((d.distance(0.0, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(d.distance(0.3, 0.3), 0.0);
    }

    #[test]
    fn interval_ball_is_clipped() {
        let d = DomainSpace::interval();
        assert!((d.ball_measure(0.05, 0.1) - 0.15).abs() < 1e-15);
        assert!((d.ball_measure(0.5, 0.1) - 0.2).abs() < 1e-15);
        assert_eq!(d.ball_measure(0.5, 2.0), 1.0);
    }

    #[test]
    fn circle_ball_measure_caps_at_one() {
        let d = DomainSpace::circle();
        assert!((d.ball_measure(0.3, 0.2) - 0.4).abs() < 1e-15);
        assert_eq!(d.ball_measure(0.3, 0.7), 1.0);
    }
}
