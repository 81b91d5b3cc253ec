//! Small summary statistics used for aggregation and acceptance checks.

use crate::scalar::Scalar;

pub fn mean<S: Scalar>(values: impl IntoIterator<Item = S>) -> Option<S> {
    let mut sum = S::zero();
    let mut n = 0usize;
    for v in values {
        sum = sum + v;
        n += 1;
    }
    (n > 0).then(|| sum / S::of_count(n))
}

/// Sample standard deviation with the `n - 1` denominator; zero below two values.
pub fn sample_sd<S: Scalar>(values: &[S]) -> S {
    if values.len() < 2 {
        return S::zero();
    }
    let m = mean(values.iter().copied()).expect("non-empty");
    let ss = values
        .iter()
        .fold(S::zero(), |acc, &v| acc + (v - m) * (v - m));
    (ss / S::of_count(values.len() - 1)).sqrt()
}

pub fn standard_error<S: Scalar>(values: &[S]) -> S {
    sample_sd(values) / S::of_count(values.len().max(1)).sqrt()
}

/// Standard error of a difference of two independent means.
pub fn difference_se<S: Scalar>(se_a: S, se_b: S) -> S {
    (se_a * se_a + se_b * se_b).sqrt()
}

/// Ordinary least-squares fit `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit<S = f64> {
    pub intercept: S,
    pub slope: S,
    pub slope_se: S,
}

impl<S: Scalar> LinearFit<S> {
    /// `slope +/- z * slope_se`.
    pub fn slope_interval(&self, z: S) -> (S, S) {
        (self.slope - z * self.slope_se, self.slope + z * self.slope_se)
    }
}

/// Needs at least three points and non-constant `xs`.
pub fn linear_fit<S: Scalar>(xs: &[S], ys: &[S]) -> Option<LinearFit<S>> {
    let n = xs.len();
    if n != ys.len() || n < 3 {
        return None;
    }
    let mx = mean(xs.iter().copied())?;
    let my = mean(ys.iter().copied())?;
    let mut sxx = S::zero();
    let mut sxy = S::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx = sxx + (x - mx) * (x - mx);
        sxy = sxy + (x - mx) * (y - my);
    }
    if sxx == S::zero() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = xs.iter().zip(ys).fold(S::zero(), |acc, (&x, &y)| {
        let r = y - intercept - slope * x;
        acc + r * r
    });
    let sigma2 = rss / S::of_count(n - 2);
    Some(LinearFit {
        intercept,
        slope,
        slope_se: (sigma2 / sxx).sqrt(),
    })
}
