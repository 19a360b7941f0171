use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{check_symbol, Predictor};
use crate::error::{Error, Result};
use crate::sequence::{Symbol, SymbolSequence};

pub const MAX_ORDER: usize = 5;

type ContextTable = HashMap<Vec<Symbol>, HashMap<Symbol, u64>>;

/// Successor counts for every context of length `1..=order`, plus global
/// symbol counts for tie-breaking and the final fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    order: usize,
    alphabet_size: usize,
    /// `tables[j]` holds contexts of length `j + 1`.
    tables: Vec<ContextTable>,
    frequencies: Vec<u64>,
}

impl TransitionMatrix {
    pub fn new(order: usize, alphabet_size: usize) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::invalid(format!("Markov order {order} outside 1..={MAX_ORDER}")));
        }
        Ok(Self {
            order,
            alphabet_size,
            tables: vec![ContextTable::new(); order],
            frequencies: vec![0; alphabet_size],
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Counts for full-length contexts.
    pub fn counts(&self) -> &HashMap<Vec<Symbol>, HashMap<Symbol, u64>> {
        &self.tables[self.order - 1]
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequencies
    }

    /// Tallies `next` after every suffix of `history` up to the model order.
    pub fn record(&mut self, history: &[Symbol], next: Symbol) {
        let reach = self.order.min(history.len());
        for len in 1..=reach {
            let context = &history[history.len() - len..];
            let table = &mut self.tables[len - 1];
            let successors = match table.get_mut(context) {
                Some(s) => s,
                None => table.entry(context.to_vec()).or_default(),
            };
            *successors.entry(next).or_insert(0) += 1;
        }
        let idx = next as usize;
        if idx >= self.frequencies.len() {
            self.frequencies.resize(idx + 1, 0);
            self.alphabet_size = idx + 1;
        }
        self.frequencies[idx] += 1;
    }

    fn mode(&self) -> Symbol {
        let mut best = 0usize;
        for (s, &c) in self.frequencies.iter().enumerate() {
            if c > self.frequencies[best] {
                best = s;
            }
        }
        best as Symbol
    }

    fn frequency(&self, s: Symbol) -> u64 {
        self.frequencies.get(s as usize).copied().unwrap_or(0)
    }

    fn best_successor(&self, successors: &HashMap<Symbol, u64>) -> Option<Symbol> {
        successors
            .iter()
            .map(|(&s, &c)| (c, self.frequency(s), s))
            .max_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(b.2.cmp(&a.2)))
            .map(|(_, _, s)| s)
    }
}

/// Counts all `n - k` (context, next) pairs of order `k`.
pub fn fit_markov(seq: &SymbolSequence, order: usize) -> Result<TransitionMatrix> {
    let s = seq.symbols();
    if s.len() <= order {
        return Err(Error::invalid(format!(
            "order-{order} fit needs more than {order} symbols, got {}",
            s.len()
        )));
    }
    let mut m = TransitionMatrix::new(order, seq.alphabet_size())?;
    // Lower-order tables also see the first `order` positions.
    for i in 1..s.len() {
        m.record(&s[..i], s[i]);
    }
    m.frequencies[s[0] as usize] += 1;
    Ok(m)
}

/// Most frequent successor of the longest seen suffix of `context`; ties go
/// to the globally more frequent symbol, then to the smaller id. Without
/// any seen suffix the global mode is returned.
pub fn markov_predict(m: &TransitionMatrix, context: &[Symbol]) -> Symbol {
    let reach = m.order.min(context.len());
    for len in (1..=reach).rev() {
        let suffix = &context[context.len() - len..];
        if let Some(next) = m.tables[len - 1].get(suffix).and_then(|s| m.best_successor(s)) {
            return next;
        }
    }
    m.mode()
}

/// Order-`k` Markov predictor whose counts grow with every observation.
#[derive(Debug, Clone)]
pub struct MarkovPredictor {
    model: TransitionMatrix,
    history: Vec<Symbol>,
}

impl MarkovPredictor {
    pub fn new(order: usize) -> Result<Self> {
        Ok(Self { model: TransitionMatrix::new(order, 0)?, history: Vec::new() })
    }

    pub fn model(&self) -> &TransitionMatrix {
        &self.model
    }
}

impl Predictor for MarkovPredictor {
    fn warm_up(&mut self, history: &[Symbol], alphabet_size: usize) -> Result<()> {
        self.model = TransitionMatrix::new(self.model.order, alphabet_size)?;
        self.history.clear();
        for &s in history {
            self.observe(s)?;
        }
        Ok(())
    }

    fn predict(&mut self) -> Result<Symbol> {
        Ok(markov_predict(&self.model, &self.history))
    }

    fn observe(&mut self, symbol: Symbol) -> Result<()> {
        check_symbol(symbol, self.model.alphabet_size)?;
        let start = self.history.len().saturating_sub(self.model.order);
        self.model.record(&self.history[start..], symbol);
        self.history.push(symbol);
        Ok(())
    }
}
