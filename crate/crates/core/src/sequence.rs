//! Symbol sequences: the common input of every estimator and predictor.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense symbol identifier.
pub type Symbol = u32;

/// A temporally ordered sequence of discrete location symbols for one user.
///
/// Symbols are always densely encoded: every id lies in `0..alphabet_size`
/// and every id in that range occurs at least once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSequence {
    symbols: Vec<Symbol>,
    timestamps: Option<Vec<f64>>,
    alphabet_size: usize,
}

impl SymbolSequence {
    /// Builds a sequence from already dense symbols.
    pub fn new(symbols: Vec<Symbol>, timestamps: Option<Vec<f64>>) -> Result<Self> {
        let mut seen = Vec::new();
        for &s in &symbols {
            let s = s as usize;
            if s >= seen.len() {
                seen.resize(s + 1, false);
            }
            seen[s] = true;
        }
        if let Some(missing) = seen.iter().position(|&present| !present) {
            return Err(Error::invalid(format!(
                "symbols are not densely encoded: id {missing} is unused"
            )));
        }
        let alphabet_size = seen.len();
        if let Some(ts) = &timestamps {
            validate_timestamps(ts, symbols.len())?;
        }
        Ok(Self {
            symbols,
            timestamps,
            alphabet_size,
        })
    }

    /// Re-encodes arbitrary labels to dense ids in order of first appearance.
    pub fn encode<T, I>(labels: I, timestamps: Option<Vec<f64>>) -> Result<Self>
    where
        T: Eq + Hash,
        I: IntoIterator<Item = T>,
    {
        let mut ids: HashMap<T, Symbol> = HashMap::new();
        let symbols: Vec<Symbol> = labels
            .into_iter()
            .map(|label| {
                let next = ids.len() as Symbol;
                *ids.entry(label).or_insert(next)
            })
            .collect();
        if let Some(ts) = &timestamps {
            validate_timestamps(ts, symbols.len())?;
        }
        Ok(Self {
            alphabet_size: ids.len(),
            symbols,
            timestamps,
        })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    /// Number of distinct symbols, `N`.
    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Sequence length, `n`.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Occurrence count of every symbol, indexed by id.
    pub fn symbol_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.alphabet_size];
        for &s in &self.symbols {
            counts[s as usize] += 1;
        }
        counts
    }

    /// The same symbols in reverse order, re-encoded densely.
    pub fn reversed(&self) -> SymbolSequence {
        let symbols: Vec<Symbol> = self.symbols.iter().rev().copied().collect();
        SymbolSequence::encode(symbols, None).expect("no timestamps to validate")
    }
}

fn validate_timestamps(ts: &[f64], len: usize) -> Result<()> {
    if ts.len() != len {
        return Err(Error::invalid(format!(
            "{} timestamps for {} symbols",
            ts.len(),
            len
        )));
    }
    if ts.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("non-finite timestamp"));
    }
    if let Some(i) = ts.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::invalid(format!(
            "timestamps decrease at index {}",
            i + 1
        )));
    }
    Ok(())
}
