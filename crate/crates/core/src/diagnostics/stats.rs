//! Sample statistics with compensated, order-fixed summation.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated sum.
pub fn sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    sum(xs.iter().copied()) / xs.len() as f64
}

/// Sample mean, unbiased variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let m = mean(xs);
        let variance = if n > 1 {
            sum(xs.iter().map(|x| (x - m) * (x - m))) / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean: m,
            variance,
            se: (variance / n as f64).sqrt(),
            n,
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    /// `(mean − reference)/se`; zero when both the deviation and the error vanish.
    pub fn z(&self, reference: f64) -> f64 {
        let d = self.mean - reference;
        if self.se == 0.0 {
            if d.abs() <= exact_tol(reference) {
                0.0
            } else {
                d.signum() * f64::INFINITY
            }
        } else {
            d / self.se
        }
    }
}

/// Tolerance used when a series has no spread and equality is checked exactly.
pub fn exact_tol(reference: f64) -> f64 {
    1e-12 * reference.abs().max(1.0)
}
