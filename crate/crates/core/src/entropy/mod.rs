//! Entropy estimators over symbol histograms and sequences.
//!
//! All results are in bits. The plug-in estimator is the maximum-likelihood
//! Shannon entropy; the Grassberger estimator replaces `log N_i` with the
//! digamma function to reduce undersampling bias. Temporal structure is
//! captured by the Lempel-Ziv parse in [`lz`] and by block entropies.

mod lz;

pub use lz::{entropy_lz, lz_parse, parse, LambdaParse, LzMode};

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::sequence::SymbolSequence;

/// Which entropy estimator to apply to a histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Plugin,
    #[default]
    Grassberger,
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plugin" => Ok(Estimator::Plugin),
            "grassberger" => Ok(Estimator::Grassberger),
            other => Err(Error::invalid(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Occurrence counts keyed by symbol. Every stored count is positive.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Histogram {
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_symbols<I: IntoIterator<Item = u64>>(symbols: I) -> Self {
        let mut h = Self::new();
        for s in symbols {
            h.add(s, 1);
        }
        h
    }

    /// Builds a histogram from `(symbol, count)` pairs; zero counts are skipped.
    pub fn from_counts<I: IntoIterator<Item = (u64, u64)>>(pairs: I) -> Self {
        let mut h = Self::new();
        for (s, c) in pairs {
            h.add(s, c);
        }
        h
    }

    pub fn add(&mut self, symbol: u64, count: u64) {
        if count > 0 {
            *self.counts.entry(symbol).or_insert(0) += count;
            self.total += count;
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, symbol: u64) -> u64 {
        self.counts.get(&symbol).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&s, &c)| (s, c))
    }

    fn counts(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.values().copied()
    }
}

pub(crate) fn plugin_from_counts<I: IntoIterator<Item = u64>>(counts: I) -> f64 {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h = -counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>();
    h.max(0.0)
}

pub(crate) fn grassberger_from_counts<I: IntoIterator<Item = u64>>(counts: I) -> f64 {
    let mut total = 0u64;
    let mut weighted = 0.0;
    for c in counts.into_iter().filter(|&c| c > 0) {
        total += c;
        weighted += c as f64 * digamma(c as f64);
    }
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    (n.ln() - weighted / n) / LN_2
}

pub(crate) fn estimate_from_counts<I: IntoIterator<Item = u64>>(
    counts: I,
    estimator: Estimator,
) -> f64 {
    match estimator {
        Estimator::Plugin => plugin_from_counts(counts),
        Estimator::Grassberger => grassberger_from_counts(counts),
    }
}

fn require_nonempty(h: &Histogram) -> Result<()> {
    if h.total() == 0 {
        Err(Error::invalid("entropy of an empty histogram"))
    } else {
        Ok(())
    }
}

/// Maximum-likelihood Shannon entropy `-Σ p log2 p`.
pub fn entropy_plugin(h: &Histogram) -> Result<f64> {
    require_nonempty(h)?;
    Ok(plugin_from_counts(h.counts()))
}

/// Grassberger's digamma-corrected entropy `(ln N - Σ N_i ψ(N_i) / N) / ln 2`.
pub fn entropy_grassberger(h: &Histogram) -> Result<f64> {
    require_nonempty(h)?;
    Ok(grassberger_from_counts(h.counts()))
}

pub fn entropy(h: &Histogram, estimator: Estimator) -> Result<f64> {
    match estimator {
        Estimator::Plugin => entropy_plugin(h),
        Estimator::Grassberger => entropy_grassberger(h),
    }
}

/// Entropy of the empirical distribution of all overlapping length-`window`
/// blocks, each block treated as one opaque symbol.
pub fn block_entropy(seq: &SymbolSequence, window: usize, estimator: Estimator) -> Result<f64> {
    let n = seq.len();
    if window == 0 || window > n {
        return Err(Error::invalid(format!(
            "block length {window} outside 1..={n}"
        )));
    }
    let mut blocks: HashMap<&[u32], u64> = HashMap::new();
    for w in seq.symbols().windows(window) {
        *blocks.entry(w).or_insert(0) += 1;
    }
    Ok(estimate_from_counts(blocks.into_values(), estimator))
}

/// Predictive information `2 S(T) - S(2T)` from block entropies.
pub fn predictive_information(
    seq: &SymbolSequence,
    window: usize,
    estimator: Estimator,
) -> Result<f64> {
    if window == 0 || 2 * window > seq.len() {
        return Err(Error::invalid(format!(
            "predictive information needs 2T <= n (T = {window}, n = {})",
            seq.len()
        )));
    }
    Ok(2.0 * block_entropy(seq, window, estimator)? - block_entropy(seq, 2 * window, estimator)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    fn counts(cs: &[u64]) -> Histogram {
        Histogram::from_counts(cs.iter().enumerate().map(|(i, &c)| (i as u64, c)))
    }

    fn seq(symbols: &[u32]) -> SymbolSequence {
        SymbolSequence::encode(symbols.iter().copied(), None).unwrap()
    }

    #[test]
    fn plugin_examples() {
        assert_abs_diff_eq!(entropy_plugin(&counts(&[5, 5, 5, 5])).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(entropy_plugin(&counts(&[7])).unwrap(), 0.0);
        assert_abs_diff_eq!(entropy_plugin(&counts(&[2, 1, 1])).unwrap(), 1.5, epsilon = 1e-12);
        assert!(entropy_plugin(&Histogram::new()).is_err());
    }

    #[test]
    fn grassberger_examples() {
        // ψ(4) = 1 + 1/2 + 1/3 - γ
        let psi4 = 11.0 / 6.0 - EULER_GAMMA;
        let expected = (8f64.ln() - psi4) / LN_2;
        assert_abs_diff_eq!(entropy_grassberger(&counts(&[4, 4])).unwrap(), expected, epsilon = 1e-10);
        assert_abs_diff_eq!(expected, 1.1878, epsilon = 1e-4);
        // ln 1 - ψ(1) = γ
        assert_abs_diff_eq!(
            entropy_grassberger(&counts(&[1])).unwrap(),
            EULER_GAMMA / LN_2,
            epsilon = 1e-10
        );
        assert!(entropy_grassberger(&Histogram::new()).is_err());
    }

    #[test]
    fn grassberger_uniform_eight_large_sample() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let h = Histogram::from_symbols((0..10_000).map(|_| rng.random_range(0..8u64)));
        let est = entropy_grassberger(&h).unwrap();
        assert!((est - 3.0).abs() < 0.02, "estimate {est}");
    }

    #[test]
    fn block_entropy_examples() {
        // Seven overlapping windows: four "ab", three "ba".
        let abab = seq(&[0, 1, 0, 1, 0, 1, 0, 1]);
        let h47 = -(4.0f64 / 7.0) * (4.0f64 / 7.0).log2() - (3.0f64 / 7.0) * (3.0f64 / 7.0).log2();
        assert_abs_diff_eq!(block_entropy(&abab, 2, Estimator::Plugin).unwrap(), h47, epsilon = 1e-12);
        let long: Vec<u32> = (0..20_000).map(|i| i % 2).collect();
        assert_abs_diff_eq!(block_entropy(&seq(&long), 2, Estimator::Plugin).unwrap(), 1.0, epsilon = 1e-6);
        let constant = seq(&[3; 20]);
        for t in 1..=20 {
            assert_eq!(block_entropy(&constant, t, Estimator::Plugin).unwrap(), 0.0);
        }
        let s = seq(&[0, 1, 1, 2, 0, 0, 1, 2, 2, 2]);
        let h = Histogram::from_symbols(s.symbols().iter().map(|&x| x as u64));
        assert_abs_diff_eq!(
            block_entropy(&s, 1, Estimator::Plugin).unwrap(),
            entropy_plugin(&h).unwrap(),
            epsilon = 1e-12
        );
        assert!(block_entropy(&s, 11, Estimator::Plugin).is_err());
        assert!(block_entropy(&s, 0, Estimator::Plugin).is_err());
    }

    #[test]
    fn predictive_information_examples() {
        // 2 S(1) - S(2) with S(1) = 1 and 32 "ab" / 31 "ba" windows.
        let abab: Vec<u32> = (0..64).map(|i| i % 2).collect();
        let (a, b) = (32.0f64 / 63.0, 31.0f64 / 63.0);
        assert_abs_diff_eq!(
            predictive_information(&seq(&abab), 1, Estimator::Plugin).unwrap(),
            2.0 + a * a.log2() + b * b.log2(),
            epsilon = 1e-12
        );
        let long: Vec<u32> = (0..20_000).map(|i| i % 2).collect();
        assert_abs_diff_eq!(predictive_information(&seq(&long), 1, Estimator::Plugin).unwrap(), 1.0, epsilon = 1e-6);
        assert_eq!(predictive_information(&seq(&[2; 10]), 3, Estimator::Plugin).unwrap(), 0.0);
        assert!(predictive_information(&seq(&[0, 1, 0]), 2, Estimator::Plugin).is_err());
    }

    #[test]
    fn predictive_information_iid_binary_vanishes() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let bits: Vec<u32> = (0..100_000).map(|_| rng.random_range(0..2)).collect();
        let ipred = predictive_information(&seq(&bits), 4, Estimator::Plugin).unwrap();
        assert!(ipred.abs() < 0.05, "I_pred = {ipred}");
    }

    #[test]
    fn predictive_information_of_periodic_source() {
        for p in 2..6u32 {
            let s: Vec<u32> = (0..60_000).map(|i| i % p).collect();
            for t in p as usize..8 {
                let ipred = predictive_information(&seq(&s), t, Estimator::Plugin).unwrap();
                assert_abs_diff_eq!(ipred, (p as f64).log2(), epsilon = 1e-3);
            }
        }
    }

    proptest! {
        #[test]
        fn plugin_bounded_by_log_support(cs in proptest::collection::vec(1u64..50, 1..20)) {
            let h = counts(&cs);
            let e = entropy_plugin(&h).unwrap();
            prop_assert!(e >= 0.0);
            prop_assert!(e <= (cs.len() as f64).log2() + 1e-12);
        }

        #[test]
        fn grassberger_dominates_plugin(cs in proptest::collection::vec(1u64..200, 1..30)) {
            let h = counts(&cs);
            prop_assert!(entropy_grassberger(&h).unwrap() >= entropy_plugin(&h).unwrap());
        }
    }
}
