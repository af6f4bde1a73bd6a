//! Monotone cubic Hermite splines with prescribed knot derivatives.
//!
//! A spline map is given by strictly increasing knots t_0 < ... < t_K,
//! values y_k and derivative values d_k. Evaluation uses the cubic Hermite
//! basis per piece, so f(t_k) = y_k and f'(t_k) = d_k hold exactly; the
//! derivative is evaluated from the closed-form basis, never by finite
//! differences. Strict monotonicity is enforced through the classical
//! box condition 0 < d_k < 3 * Delta on every piece (Fritsch-Carlson),
//! which keeps the piecewise-quadratic derivative strictly positive away
//! from knot ties.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MonotoneSpline {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl MonotoneSpline {
    /// Validates and constructs. `knots` must start at 0, end at 1, and be
    /// strictly increasing; `values` strictly increasing; the derivative
    /// box condition must hold strictly on every piece.
    pub fn new(knots: Vec<f64>, values: Vec<f64>, derivs: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidParameter("spline needs at least 2 knots".into()));
        }
        if knots.len() != values.len() || knots.len() != derivs.len() {
            return Err(Error::InvalidParameter(format!(
                "spline arrays disagree in length: {} knots, {} values, {} derivs",
                knots.len(),
                values.len(),
                derivs.len()
            )));
        }
        for v in knots.iter().chain(values.iter()).chain(derivs.iter()) {
            if !v.is_finite() {
                return Err(Error::InvalidParameter("spline data must be finite".into()));
            }
        }
        if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "spline knots must span [0, 1], got [{}, {}]",
                knots[0],
                knots.last().unwrap()
            )));
        }
        for w in knots.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter(format!(
                    "spline knots must increase strictly: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for (k, w) in values.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter(format!(
                    "spline values must increase strictly (piece {k})"
                )));
            }
        }
        for (k, pair) in knots.windows(2).enumerate() {
            let h = pair[1] - pair[0];
            let slope = (values[k + 1] - values[k]) / h;
            for &d in &[derivs[k], derivs[k + 1]] {
                if d <= 0.0 || d >= 3.0 * slope {
                    return Err(Error::InvalidParameter(format!(
                        "derivative {d} at piece {k} violates monotonicity box (0, {})",
                        3.0 * slope
                    )));
                }
            }
        }
        Ok(MonotoneSpline { knots, values, derivs })
    }

    pub fn pieces(&self) -> usize {
        self.knots.len() - 1
    }

    /// Index of the piece containing x in [0, 1].
    #[inline]
    fn piece_of(&self, x: f64) -> usize {
        // partition_point returns the first knot > x; the piece is one left.
        let i = self.knots.partition_point(|&t| t <= x);
        i.clamp(1, self.knots.len() - 1) - 1
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.piece_of(x);
        let h = self.knots[k + 1] - self.knots[k];
        let s = (x - self.knots[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        self.values[k] * h00
            + h * self.derivs[k] * h10
            + self.values[k + 1] * h01
            + h * self.derivs[k + 1] * h11
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        let k = self.piece_of(x);
        let h = self.knots[k + 1] - self.knots[k];
        let s = (x - self.knots[k]) / h;
        let slope = (self.values[k + 1] - self.values[k]) / h;
        6.0 * s * (1.0 - s) * slope
            + (1.0 - s) * (1.0 - 3.0 * s) * self.derivs[k]
            + s * (3.0 * s - 2.0) * self.derivs[k + 1]
    }

    #[inline]
    pub fn second_deriv(&self, x: f64) -> f64 {
        let k = self.piece_of(x);
        let h = self.knots[k + 1] - self.knots[k];
        let s = (x - self.knots[k]) / h;
        let slope = (self.values[k + 1] - self.values[k]) / h;
        (6.0 * (1.0 - 2.0 * s) * slope
            + (6.0 * s - 4.0) * self.derivs[k]
            + (6.0 * s - 2.0) * self.derivs[k + 1])
            / h
    }

    /// Exact minimum of f' over [0, 1]: per piece the derivative is a
    /// quadratic in the local coordinate, so the candidates are the two
    /// endpoints and the interior vertex.
    pub fn min_derivative(&self) -> f64 {
        let mut best = f64::INFINITY;
        for k in 0..self.pieces() {
            let h = self.knots[k + 1] - self.knots[k];
            let slope = (self.values[k + 1] - self.values[k]) / h;
            let (d0, d1) = (self.derivs[k], self.derivs[k + 1]);
            // f'(s) = a s^2 + b s + c
            let a = 3.0 * (d0 + d1) - 6.0 * slope;
            let b = 6.0 * slope - 4.0 * d0 - 2.0 * d1;
            let c = d0;
            best = best.min(c).min(a + b + c);
            if a.abs() > 0.0 {
                let sv = -b / (2.0 * a);
                if (0.0..=1.0).contains(&sv) {
                    best = best.min(a * sv * sv + b * sv + c);
                }
            }
        }
        best
    }

    /// Exact maximum of |f''| over the pieces (f'' is linear per piece, so
    /// the extremes sit at piece endpoints).
    pub fn max_abs_second_derivative(&self) -> f64 {
        let mut best: f64 = 0.0;
        for k in 0..self.pieces() {
            let h = self.knots[k + 1] - self.knots[k];
            let slope = (self.values[k + 1] - self.values[k]) / h;
            let (d0, d1) = (self.derivs[k], self.derivs[k + 1]);
            let at0 = (6.0 * slope - 4.0 * d0 - 2.0 * d1) / h;
            let at1 = (-6.0 * slope + 2.0 * d0 + 4.0 * d1) / h;
            best = best.max(at0.abs()).max(at1.abs());
        }
        best
    }
}
