//! Maximum predictability from the limiting case of Fano's inequality.
//!
//! For an entropy rate `S` over `N` locations, `π^max` solves
//!
//! ```text
//! S = H_b(π) + (1 - π) log2(N - 1)
//! ```
//!
//! on `[1/N, 1]`, where the right-hand side falls strictly from `log2 N`
//! to 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Target accuracy of the root in entropy units.
pub const SOLVER_TOLERANCE: f64 = 1e-9;

/// Estimates this far above `log2 N` are treated as rounding and clamped.
pub const ENTROPY_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictabilityBound {
    /// Entropy in bits per symbol.
    #[serde(rename = "S")]
    pub entropy: f64,
    /// Number of distinct locations.
    #[serde(rename = "N")]
    pub locations: usize,
    pub pi_max: f64,
    /// `|F(pi_max) - S|`.
    pub residual: f64,
}

impl PredictabilityBound {
    /// Minimum achievable error probability.
    pub fn error_probability(&self) -> f64 {
        1.0 - self.pi_max
    }
}

fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// `-p log2 p - (1-p) log2 (1-p)` with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    Ok(-xlog2x(p) - xlog2x(1.0 - p))
}

/// Fano's right-hand side `H_b(π) + (1 - π) log2(N - 1)`.
pub fn fano_entropy(pi: f64, locations: usize) -> Result<f64> {
    if locations < 2 {
        return Err(Error::invalid(format!("need at least 2 locations, got {locations}")));
    }
    Ok(binary_entropy(pi)? + (1.0 - pi) * ((locations - 1) as f64).log2())
}

/// Solves for `π^max` by bisection on `[1/N, 1]`.
pub fn predictability_bound(entropy: f64, locations: usize) -> Result<PredictabilityBound> {
    if locations < 2 {
        return Err(Error::invalid(format!("need at least 2 locations, got {locations}")));
    }
    let max = (locations as f64).log2();
    if !entropy.is_finite() || entropy < 0.0 {
        return Err(Error::invalid(format!("entropy must be finite and non-negative, got {entropy}")));
    }
    if entropy > max + ENTROPY_SLACK {
        return Err(Error::EntropyAboveRandom { entropy, max });
    }
    let target = entropy.min(max);
    let f = |pi: f64| fano_entropy(pi, locations).expect("pi stays inside [0, 1]");

    let chance = 1.0 / locations as f64;
    if target == 0.0 || target >= f(chance) {
        let pi_max = if target == 0.0 { 1.0 } else { chance };
        let residual = (f(pi_max) - target).abs();
        return Ok(PredictabilityBound { entropy, locations, pi_max, residual });
    }
    let (mut lo, mut hi) = (chance, 1.0);
    // F(lo) > target > F(hi) = 0, F decreasing.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let pi_max = if (f(lo) - target).abs() <= (f(hi) - target).abs() { lo } else { hi };
    let residual = (f(pi_max) - target).abs();
    if residual > SOLVER_TOLERANCE {
        return Err(Error::Numeric(format!(
            "Fano solver residual {residual:e} exceeds tolerance for S = {entropy}, N = {locations}"
        )));
    }
    Ok(PredictabilityBound { entropy, locations, pi_max, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn binary_entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(binary_entropy(0.25).unwrap(), 0.811_278_124_459_132_8, epsilon = 1e-12);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn table_rows() {
        let privamov = predictability_bound(6.63, 2651).unwrap();
        assert!((privamov.pi_max - 0.505).abs() <= 0.005, "{privamov:?}");
        let geolife = predictability_bound(7.77, 3892).unwrap();
        assert!((geolife.pi_max - 0.432).abs() <= 0.005, "{geolife:?}");
    }

    #[test]
    fn zero_entropy_is_certainty() {
        for n in [2, 10, 5000] {
            assert_eq!(predictability_bound(0.0, n).unwrap().pi_max, 1.0);
        }
    }

    #[test]
    fn random_entropy_is_chance() {
        let b = predictability_bound(2.0, 4).unwrap();
        assert_eq!(b.pi_max, 0.25);
        assert!(b.residual <= SOLVER_TOLERANCE);
    }

    #[test]
    fn slack_and_errors() {
        let b = predictability_bound(3.0 + 5e-7, 8).unwrap();
        assert_abs_diff_eq!(b.pi_max, 0.125, epsilon = 1e-12);
        assert!(matches!(
            predictability_bound(3.1, 8),
            Err(Error::EntropyAboveRandom { .. })
        ));
        assert!(predictability_bound(-0.1, 8).is_err());
        assert!(predictability_bound(0.5, 1).is_err());
    }

    #[test]
    fn monotone_in_entropy_and_locations() {
        for n in [2usize, 5, 50, 3000] {
            let max = (n as f64).log2();
            let pis: Vec<f64> = (0..=20)
                .map(|j| predictability_bound(max * j as f64 / 20.0, n).unwrap().pi_max)
                .collect();
            assert!(pis.windows(2).all(|w| w[1] < w[0]), "{n}: {pis:?}");
        }
        for s in [0.3, 1.0, 2.5] {
            let pis: Vec<f64> = [8usize, 16, 64, 512, 4096]
                .iter()
                .map(|&n| predictability_bound(s, n).unwrap().pi_max)
                .collect();
            assert!(pis.windows(2).all(|w| w[1] > w[0]), "{s}: {pis:?}");
        }
    }

    proptest! {
        #[test]
        fn round_trip_through_forward_map(n in 2usize..5000, u in 0.0f64..1.0) {
            let lo = 1.0 / n as f64;
            let pi = lo + (1.0 - lo) * u;
            let s = fano_entropy(pi, n).unwrap();
            let b = predictability_bound(s, n).unwrap();
            prop_assert!((b.pi_max - pi).abs() < 1e-6, "pi {} vs {}", pi, b.pi_max);
        }
    }
}
