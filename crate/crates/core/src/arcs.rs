//! Exact arc images and grid-cell bookkeeping.
//!
//! Forward images of arcs under monotone-lift maps are computed from
//! endpoint lifts — an arc's image is again a single arc (or the whole
//! space once its lift length reaches one period), so covering statements
//! are exact rather than sampled.
//!
//! Grid cells are the half-open intervals [k/G, (k+1)/G). A cell counts as
//! covered only when the intersection with an arc has positive length:
//! endpoint touching contributes measure zero and must not flip coverage.

use crate::domain::{DomainKind, DomainSpace};
use crate::map::SmoothMap1D;
use serde::{Deserialize, Serialize};

/// A single arc (circle) or subinterval (interval), stored as a canonical
/// start point and a length. Lengths are capped at 1 = the whole space.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DomainArc {
    pub start: f64,
    pub len: f64,
}

impl DomainArc {
    pub fn new(domain: &DomainSpace, start: f64, len: f64) -> Self {
        let start = domain.canonicalize(start);
        let len = match domain.kind {
            DomainKind::Circle => len.clamp(0.0, 1.0),
            DomainKind::Interval => len.clamp(0.0, 1.0 - start),
        };
        DomainArc { start, len }
    }

    /// The metric ball around a center, as an arc.
    pub fn ball(domain: &DomainSpace, center: f64, radius: f64) -> Self {
        let c = domain.canonicalize(center);
        match domain.kind {
            DomainKind::Circle => {
                if radius >= 0.5 {
                    DomainArc { start: 0.0, len: 1.0 }
                } else {
                    DomainArc::new(domain, c - radius, 2.0 * radius)
                }
            }
            DomainKind::Interval => {
                let lo = (c - radius).max(0.0);
                let hi = (c + radius).min(1.0);
                DomainArc { start: lo, len: hi - lo }
            }
        }
    }

    pub fn is_full(&self) -> bool {
        self.len >= 1.0
    }

    /// Forward image under a map: endpoints through the monotone lift.
    pub fn image(&self, domain: &DomainSpace, map: &SmoothMap1D) -> DomainArc {
        if self.is_full() {
            return match domain.kind {
                // Any circle cover maps the full circle onto itself; an
                // interval map sends [0,1] onto [f(0), f(1)].
                DomainKind::Circle => *self,
                DomainKind::Interval => {
                    let lo = map.eval(0.0);
                    DomainArc { start: lo, len: map.eval(1.0) - lo }
                }
            };
        }
        let lo_lift = map.lift(self.start);
        let hi_lift = map.lift(self.start + self.len);
        let len = (hi_lift - lo_lift).min(1.0);
        match domain.kind {
            DomainKind::Circle => DomainArc { start: domain.canonicalize(lo_lift), len },
            DomainKind::Interval => DomainArc { start: lo_lift.clamp(0.0, 1.0), len },
        }
    }
}

/// Coverage bookkeeping over G half-open grid cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellGrid {
    pub cells: usize,
    pub covered: Vec<bool>,
}

/// Intersections shorter than this fraction of a cell do not count.
const CELL_OVERLAP_TOL: f64 = 1e-9;

impl CellGrid {
    pub fn new(eps_grid: f64) -> crate::error::Result<Self> {
        if !(eps_grid > 0.0 && eps_grid <= 0.5) {
            return Err(crate::error::Error::InvalidParameter(format!(
                "grid resolution must lie in (0, 0.5], got {eps_grid}"
            )));
        }
        let cells = (1.0 / eps_grid).round().max(2.0) as usize;
        Ok(CellGrid { cells, covered: vec![false; cells] })
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// Marks every cell whose intersection with the arc has positive
    /// length. Returns the number of newly covered cells.
    pub fn mark_arc(&mut self, domain_kind: DomainKind, arc: &DomainArc) -> usize {
        if arc.len <= 0.0 {
            return 0;
        }
        let mut added = 0;
        if arc.is_full() {
            for c in self.covered.iter_mut() {
                if !*c {
                    *c = true;
                    added += 1;
                }
            }
            return added;
        }
        // Split a wrapping circle arc into pieces inside [0, 1].
        let mut pieces: Vec<(f64, f64)> = Vec::with_capacity(2);
        let (a, b) = (arc.start, arc.start + arc.len);
        if b <= 1.0 {
            pieces.push((a, b));
        } else {
            debug_assert_eq!(domain_kind, DomainKind::Circle);
            pieces.push((a, 1.0));
            pieces.push((0.0, b - 1.0));
        }
        let g = self.cells as f64;
        let tol = CELL_OVERLAP_TOL / g;
        for (lo, hi) in pieces {
            if hi - lo <= tol {
                continue;
            }
            let mut k_first = (lo * g).floor() as isize;
            let mut k_last = (hi * g).ceil() as isize - 1;
            // Drop edge cells whose overlap is below the tolerance.
            if (k_first + 1) as f64 / g - lo <= tol {
                k_first += 1;
            }
            if hi - k_last as f64 / g <= tol {
                k_last -= 1;
            }
            for k in k_first.max(0)..=k_last.min(self.cells as isize - 1) {
                let c = &mut self.covered[k as usize];
                if !*c {
                    *c = true;
                    added += 1;
                }
            }
        }
        added
    }

    pub fn covered_count(&self) -> usize {
        self.covered.iter().filter(|c| **c).count()
    }

    pub fn fraction(&self) -> f64 {
        self.covered_count() as f64 / self.cells as f64
    }

    /// Complete relative to an exemption mask (exempt cells need not be
    /// covered). Pass an empty mask for literal completeness.
    pub fn complete_with_exemptions(&self, exempt: &[bool]) -> bool {
        self.covered
            .iter()
            .enumerate()
            .all(|(k, c)| *c || exempt.get(k).copied().unwrap_or(false))
    }

    pub fn complete(&self) -> bool {
        self.covered.iter().all(|c| *c)
    }
}
