//! Reservation values for random sequential search over Gaussian utilities.
//!
//! A searcher drawing fresh `U ~ Normal(mean, variance)` at cost `c` per draw
//! maximises expected net return by stopping at the first draw above the
//! threshold `T` that solves `E[(U - T)^+] = c`. The left side,
//! [`expected_excess`], is smooth and strictly decreasing in `T`, so the root
//! is unique and [`solve_threshold`] finds it by bracketing bisection followed
//! by safeguarded Newton steps (the derivative is `-P(U > T)`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Standard normal density.
#[inline]
pub fn normal_pdf<S: Scalar>(z: S) -> S {
    let half = S::of(0.5);
    (-half * z * z).exp() / (S::TAU()).sqrt()
}

/// Standard normal upper tail `P(Z > z) = erfc(z / sqrt 2) / 2`.
#[inline]
pub fn normal_upper_tail<S: Scalar>(z: S) -> S {
    S::of(0.5) * (z * S::FRAC_1_SQRT_2()).complementary_erf()
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf<S: Scalar>(z: S) -> S {
    normal_upper_tail(-z)
}

/// Mean and variance of a Gaussian utility distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec<S = f64> {
    mean: S,
    variance: S,
}

impl<S: Scalar> GaussianSpec<S> {
    pub fn new(mean: S, variance: S) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::config("mean", format!("must be finite, got {mean}")));
        }
        if !(variance.is_finite() && variance >= S::zero()) {
            return Err(Error::InvalidVariance(variance.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self { mean, variance })
    }

    pub fn standard() -> Self {
        Self {
            mean: S::zero(),
            variance: S::one(),
        }
    }

    pub fn mean(&self) -> S {
        self.mean
    }

    pub fn variance(&self) -> S {
        self.variance
    }

    pub fn std_dev(&self) -> S {
        self.variance.sqrt()
    }
}

/// `E[(U - threshold)^+]` for `U` distributed as `spec`.
///
/// Degenerate specs (zero variance) give `max(mean - threshold, 0)`.
pub fn expected_excess<S: Scalar>(spec: &GaussianSpec<S>, threshold: S) -> S {
    let sigma = spec.std_dev();
    if sigma == S::zero() {
        return (spec.mean - threshold).max(S::zero());
    }
    sigma * standard_excess((threshold - spec.mean) / sigma)
}

/// `E[(Z - z)^+]` for standard normal `Z`.
#[inline]
fn standard_excess<S: Scalar>(z: S) -> S {
    normal_pdf(z) - z * normal_upper_tail(z)
}

/// A solved reservation value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSolution<S = f64> {
    pub threshold: S,
    pub cost: S,
    /// `|expected_excess(spec, threshold) - cost|` at the returned threshold.
    pub residual: S,
}

const MAX_BRACKET_DOUBLINGS: usize = 16;
const MAX_REFINE_STEPS: usize = 200;

/// Finds the threshold `T` with `expected_excess(spec, T) == cost`.
pub fn solve_threshold<S: Scalar>(spec: &GaussianSpec<S>, cost: S) -> Result<ThresholdSolution<S>> {
    if !(cost.is_finite() && cost > S::zero()) {
        return Err(Error::InvalidCost(cost.to_f64().unwrap_or(f64::NAN)));
    }
    let sigma = spec.std_dev();
    if sigma == S::zero() {
        let threshold = spec.mean - cost;
        return Ok(finish(spec, cost, threshold));
    }

    // Solve in standardized units; T = mean + sigma * z.
    let target = cost / sigma;
    let excess = |z: S| standard_excess(z) - target;
    let two = S::of(2.0);

    let mut lo = S::of(-10.0);
    let mut hi = S::of(10.0);
    let mut doublings = 0;
    while excess(lo) < S::zero() {
        lo = lo * two;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(no_convergence(cost, "cost too large to bracket"));
        }
    }
    doublings = 0;
    while excess(hi) > S::zero() {
        hi = hi * two;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(no_convergence(cost, "cost too small to bracket"));
        }
    }

    let coarse = S::of(1e-3);
    while hi - lo > coarse {
        let mid = S::of(0.5) * (lo + hi);
        if excess(mid) > S::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Refine to step-size convergence rather than stopping at the residual
    // tolerance: where P(Z > z) is small a tiny residual still leaves z loose.
    let mut z = S::of(0.5) * (lo + hi);
    let step_floor = S::of(4.0) * S::epsilon();
    for _ in 0..MAX_REFINE_STEPS {
        let f = excess(z);
        if f == S::zero() {
            break;
        }
        if f > S::zero() {
            lo = z;
        } else {
            hi = z;
        }
        // d/dz excess = -P(Z > z)
        let slope = normal_upper_tail(z);
        let newton = z + f / slope;
        let next = if slope > S::zero() && newton > lo && newton < hi {
            newton
        } else {
            S::of(0.5) * (lo + hi)
        };
        let converged = (next - z).abs() <= step_floor * (S::one() + z.abs());
        z = next;
        if converged {
            break;
        }
    }

    let tolerance = S::root_tolerance();
    let solution = finish(spec, cost, spec.mean + sigma * z);
    if solution.residual <= tolerance {
        Ok(solution)
    } else {
        Err(no_convergence(
            cost,
            &format!("residual {} above tolerance {}", solution.residual, tolerance),
        ))
    }
}

fn finish<S: Scalar>(spec: &GaussianSpec<S>, cost: S, threshold: S) -> ThresholdSolution<S> {
    ThresholdSolution {
        threshold,
        cost,
        residual: (expected_excess(spec, threshold) - cost).abs(),
    }
}

fn no_convergence<S: Scalar>(cost: S, reason: &str) -> Error {
    Error::NoConvergence {
        cost: cost.to_f64().unwrap_or(f64::NAN),
        reason: reason.to_string(),
    }
}
