//! Hyperbolic-time detection.
//!
//! The input is a finite sequence values[i] = log of the inverse-Lipschitz
//! factor at the i-th orbit point (negative where the dynamics expands).
//! A time n is sigma-hyperbolic when every backward window ending at n has
//! average at most log sigma:
//!
//! ```text
//! sum_{i=n-l}^{n-1} values[i] <= l * log sigma   for l = 1..n.
//! ```
//!
//! Two detectors are provided: a literal O(n^2) scan of that definition,
//! and a linear-time extraction via prefix-sum records (the classical
//! density argument). With sigma = exp(-a/2) and a_i = -values[i] - a/2,
//! a time is a record of the prefix sums of (a_i) exactly when it is
//! sigma-hyperbolic, so the two detectors see the same set.

use crate::error::{Error, Result};
use crate::system::OrbitRecord;
use serde::{Deserialize, Serialize};

/// Absolute slack applied to the log-domain boundary comparison, so float
/// noise cannot flip a non-strict inequality.
pub const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PhiMode {
    /// Use the pointwise log inverse-Lipschitz data as is.
    Pointwise,
    /// Add a uniform margin eta >= 0 to every value, emulating a local
    /// (neighborhood-uniform) inverse-Lipschitz constant.
    Inflated { eta: f64 },
}

/// A finite log inverse-Lipschitz sequence along an orbit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogPhiSequence {
    pub values: Vec<f64>,
    pub mode: PhiMode,
}

impl LogPhiSequence {
    pub fn pointwise(values: Vec<f64>) -> Result<Self> {
        validate_values(&values)?;
        Ok(LogPhiSequence { values, mode: PhiMode::Pointwise })
    }

    pub fn inflated(values: Vec<f64>, eta: f64) -> Result<Self> {
        if eta < 0.0 || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "inflation margin must be >= 0, got {eta}"
            )));
        }
        validate_values(&values)?;
        let values = values.into_iter().map(|v| v + eta).collect();
        Ok(LogPhiSequence { values, mode: PhiMode::Inflated { eta } })
    }

    /// Pointwise sequence read off an orbit record: -log |f'| per step.
    pub fn from_orbit(orbit: &OrbitRecord) -> Self {
        LogPhiSequence {
            values: orbit.log_theta_values(),
            mode: PhiMode::Pointwise,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn validate_values(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "log inverse-Lipschitz values must all be finite".into(),
        ));
    }
    Ok(())
}

fn validate_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must lie in (0, 1), got {sigma}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperbolicTimeReport {
    pub sigma: f64,
    /// 1-based hyperbolic times, sorted increasing.
    pub times: Vec<usize>,
    /// times.len() / sequence length.
    pub density: f64,
    /// Mean of the values: the finite-horizon Birkhoff average of log phi.
    pub exponent_estimate: f64,
    /// Set when the expansion hypothesis mean(-values) >= a failed, so
    /// the density guarantee does not apply.
    pub advisory: bool,
    /// The guaranteed density c/A from the record-scan argument, when the
    /// sup bound A is positive.
    pub density_bound: Option<f64>,
}

/// Literal definition check for a single time n (1-based).
pub fn is_hyperbolic_time(seq: &LogPhiSequence, n: usize, sigma: f64) -> Result<bool> {
    validate_sigma(sigma)?;
    if n < 1 || n > seq.len() {
        return Err(Error::InvalidParameter(format!(
            "time {n} outside 1..={}",
            seq.len()
        )));
    }
    let log_sigma = sigma.ln();
    let mut window_sum = 0.0;
    for l in 1..=n {
        window_sum += seq.values[n - l];
        if window_sum > l as f64 * log_sigma + BOUNDARY_SLACK {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All sigma-hyperbolic times by the O(n^2) definitional scan. Oracle-grade:
/// no prefix-sum tricks, each time checked independently.
pub fn hyperbolic_times_bruteforce(
    seq: &LogPhiSequence,
    sigma: f64,
) -> Result<HyperbolicTimeReport> {
    validate_sigma(sigma)?;
    let n = seq.len();
    let mut times = Vec::new();
    for t in 1..=n {
        if is_hyperbolic_time(seq, t, sigma)? {
            times.push(t);
        }
    }
    Ok(report_from_times(seq, sigma, times, false, None))
}

/// Prefix sums with Kahan compensation: S[0] = 0, S[k] = sum of the first k
/// terms, accumulated with error O(eps) per term independent of length.
fn prefix_sums_compensated(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() + 1);
    out.push(0.0);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        out.push(sum);
    }
    out
}

/// Record times of the prefix sums of a_seq: the 1-based indices n_j such
/// that every backward partial sum sum_{i=n}^{n_j - 1} a_i is >= 0 for all
/// 0 <= n < n_j. Whenever the hypothesis sum a_i >= c N holds, the count is
/// at least (c/A) N: each new record exceeds the previous by at most A, and
/// the final prefix sum c N is at most (number of records) * A.
pub fn pliss_times(a_seq: &[f64], c: f64, a_sup: f64) -> Result<Vec<usize>> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "record-density constant c must be positive, got {c}"
        )));
    }
    let sup = a_seq.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !a_seq.is_empty() && a_sup < sup {
        return Err(Error::InvalidBound { bound: a_sup, sup });
    }
    let prefix = prefix_sums_compensated(a_seq);
    let mut times = Vec::new();
    let mut running_max = 0.0f64; // S_0
    for n in 1..=a_seq.len() {
        if prefix[n] >= running_max {
            times.push(n);
        }
        running_max = running_max.max(prefix[n]);
    }
    Ok(times)
}

/// Hyperbolic times through the record-scan route: sigma = exp(-a/2),
/// a_i = -values[i] - a/2, c = a/2, A = sup a_i. Linear time. The report is
/// advisory when the expansion hypothesis mean(-values) >= a fails.
pub fn hyperbolic_times(seq: &LogPhiSequence, a: f64) -> Result<HyperbolicTimeReport> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "expansion margin a must be positive, got {a}"
        )));
    }
    let sigma = (-a / 2.0).exp();
    let c = a / 2.0;
    let a_seq: Vec<f64> = seq.values.iter().map(|v| -v - c).collect();
    let a_sup = a_seq.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = seq.len();
    let advisory = if n == 0 {
        true
    } else {
        let mean_expansion = -seq.values.iter().sum::<f64>() / n as f64;
        mean_expansion < a - BOUNDARY_SLACK
    };
    let times = if n == 0 {
        Vec::new()
    } else {
        pliss_times(&a_seq, c, a_sup)?
    };
    let density_bound = if a_sup > 0.0 { Some(c / a_sup) } else { None };
    Ok(report_from_times(seq, sigma, times, advisory, density_bound))
}

fn report_from_times(
    seq: &LogPhiSequence,
    sigma: f64,
    times: Vec<usize>,
    advisory: bool,
    density_bound: Option<f64>,
) -> HyperbolicTimeReport {
    let n = seq.len();
    let density = if n == 0 { 0.0 } else { times.len() as f64 / n as f64 };
    let exponent_estimate = if n == 0 {
        0.0
    } else {
        seq.values.iter().sum::<f64>() / n as f64
    };
    HyperbolicTimeReport { sigma, times, density, exponent_estimate, advisory, density_bound }
}

/// Finite-horizon expansion-rate estimate: the maximum over all sliding
/// windows of the given length of the window-average of the values. This is
/// a finite proxy for an asymptotic quantity and is documented as an
/// estimate, not a limit.
pub fn expansion_exponent(seq: &LogPhiSequence, window: usize) -> Result<f64> {
    let n = seq.len();
    if n == 0 {
        return Err(Error::InvalidParameter(
            "cannot estimate an exponent from an empty sequence".into(),
        ));
    }
    if window == 0 || window > n {
        return Err(Error::InvalidParameter(format!(
            "window must lie in 1..={n}, got {window}"
        )));
    }
    let prefix = prefix_sums_compensated(&seq.values);
    let mut best = f64::NEG_INFINITY;
    for start in 0..=(n - window) {
        let avg = (prefix[start + window] - prefix[start]) / window as f64;
        best = best.max(avg);
    }
    Ok(best)
}

/// Default window for exponent estimates: a quarter of the sequence.
pub fn default_window(len: usize) -> usize {
    (len.div_ceil(4)).max(1)
}
