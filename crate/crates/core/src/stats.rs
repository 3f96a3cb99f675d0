//! Binomial summaries for Monte-Carlo trial counts.

use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// `hits` out of `trials`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Proportion {
    pub hits: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(hits: u64, trials: u64) -> Self {
        assert!(hits <= trials, "{hits} hits out of {trials}");
        Self { hits, trials }
    }

    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.hits as f64 / self.trials as f64
    }

    /// Wilson score interval at 95%.
    pub fn wilson95(&self) -> Interval {
        if self.trials == 0 {
            return Interval { lo: 0.0, hi: 1.0 };
        }
        let n = self.trials as f64;
        let p = self.rate();
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Interval {
            lo: if self.hits == 0 {
                0.0
            } else {
                (centre - half).max(0.0)
            },
            hi: if self.hits == self.trials {
                1.0
            } else {
                (centre + half).min(1.0)
            },
        }
    }

    /// Normal-approximation half-width `z·√(p(1−p)/n)`.
    pub fn half_width95(&self) -> f64 {
        if self.trials == 0 {
            return 1.0;
        }
        let p = self.rate();
        Z95 * (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Pearson χ² statistic of observed counts against expected counts.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum()
}
