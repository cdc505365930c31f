//! Binomial estimates with Wilson score intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Default two-sided confidence level.
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Two-sided standard-normal quantile for `level`.
pub fn z_for_level(level: f64) -> f64 {
    assert!(level > 0.0 && level < 1.0, "confidence level must lie in (0, 1)");
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(0.5 + level / 2.0)
}

/// A point estimate with its interval and the sample it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub successes: u64,
    pub trials: u64,
}

impl Estimate {
    pub fn half_width(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson(successes: u64, trials: u64, level: f64) -> Estimate {
    assert!(trials > 0, "wilson interval needs at least one trial");
    assert!(successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = z_for_level(level);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Estimate {
        point: p,
        lo: (centre - spread).max(0.0),
        hi: (centre + spread).min(1.0),
        successes,
        trials,
    }
}
