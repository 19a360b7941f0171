//! Next-place predictors behind one streaming contract, and the online
//! evaluation harness that scores them.
//!
//! A predictor is first warmed up on a prefix, then alternates between
//! predicting the next symbol and observing the true one. The Markov
//! predictor keeps counting as it observes; the HMM and RNN are fitted once
//! on the warm-up prefix and only update their filtered state afterwards.

mod hmm;
mod markov;
mod rnn;

pub use hmm::{fit_hmm, hmm_predict_next, HmmConfig, HmmModel, HmmPredictor};
pub use markov::{fit_markov, markov_predict, MarkovPredictor, TransitionMatrix, MAX_ORDER};
pub use rnn::{rnn_gradient_check, train_rnn, RnnConfig, RnnModel, RnnPredictor};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{Symbol, SymbolSequence};

pub trait Predictor {
    /// Resets the predictor and conditions it on `history`.
    fn warm_up(&mut self, history: &[Symbol], alphabet_size: usize) -> Result<()>;

    /// Most likely next symbol given everything seen so far.
    fn predict(&mut self) -> Result<Symbol>;

    /// Appends the true next symbol to the history.
    fn observe(&mut self, symbol: Symbol) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub predictions_made: usize,
    pub correct: usize,
    pub warmup_skipped: usize,
    /// Predicted symbol for each evaluated index, in order.
    #[serde(skip)]
    pub predictions: Vec<Symbol>,
    /// Hit or miss for each evaluated index, in order.
    #[serde(skip)]
    pub outcomes: Vec<bool>,
}

impl EvalReport {
    /// Running accuracy after each evaluated index.
    pub fn accuracy_curve(&self) -> Vec<f64> {
        let mut hits = 0usize;
        self.outcomes
            .iter()
            .enumerate()
            .map(|(i, &hit)| {
                hits += hit as usize;
                hits as f64 / (i + 1) as f64
            })
            .collect()
    }
}

/// Predicts `s[i]` from `s[..i]` for every `i` in `warmup..n`.
pub fn online_evaluate(seq: &SymbolSequence, predictor: &mut dyn Predictor, warmup: usize) -> Result<EvalReport> {
    let s = seq.symbols();
    if warmup >= s.len() {
        return Err(Error::invalid(format!(
            "warm-up {warmup} leaves nothing to evaluate in a sequence of length {}",
            s.len()
        )));
    }
    predictor.warm_up(&s[..warmup], seq.alphabet_size())?;
    let mut predictions = Vec::with_capacity(s.len() - warmup);
    for &actual in &s[warmup..] {
        predictions.push(predictor.predict()?);
        predictor.observe(actual)?;
    }
    let outcomes: Vec<bool> = predictions.iter().zip(&s[warmup..]).map(|(p, a)| p == a).collect();
    let correct = outcomes.iter().filter(|&&hit| hit).count();
    Ok(EvalReport {
        accuracy: correct as f64 / outcomes.len() as f64,
        predictions_made: outcomes.len(),
        correct,
        warmup_skipped: warmup,
        predictions,
        outcomes,
    })
}

/// Index of the largest value; ties go to the smallest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_symbol(symbol: Symbol, alphabet_size: usize) -> Result<()> {
    if (symbol as usize) < alphabet_size {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "symbol {symbol} outside alphabet of size {alphabet_size}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::synth::rng_from_seed;

    fn seq(symbols: &[u32]) -> SymbolSequence {
        SymbolSequence::encode(symbols.iter().copied(), None).unwrap()
    }

    fn predictors() -> Vec<Box<dyn Predictor>> {
        vec![
            Box::new(MarkovPredictor::new(2).unwrap()),
            Box::new(HmmPredictor::new(HmmConfig { states: 3, iterations: 20, restarts: 1, ..HmmConfig::default() })),
            Box::new(RnnPredictor::new(RnnConfig { hidden: 6, epochs: 3, ..RnnConfig::default() })),
        ]
    }

    #[test]
    fn warmup_bounds() {
        let s = seq(&[0, 1, 2, 0, 1, 2, 0, 1]);
        let mut m = MarkovPredictor::new(1).unwrap();
        let r = online_evaluate(&s, &mut m, 7).unwrap();
        assert_eq!((r.predictions_made, r.warmup_skipped), (1, 7));
        assert!(online_evaluate(&s, &mut m, 8).is_err());
    }

    #[test]
    fn accuracy_curve_ends_at_accuracy() {
        let s = seq(&[0, 1, 0, 2, 0, 1, 1, 0, 2, 0]);
        let r = online_evaluate(&s, &mut MarkovPredictor::new(1).unwrap(), 2).unwrap();
        let curve = r.accuracy_curve();
        assert_eq!(curve.len(), r.predictions_made);
        assert_eq!(*curve.last().unwrap(), r.accuracy);
        assert_eq!(r.accuracy, r.correct as f64 / r.predictions_made as f64);
    }

    #[test]
    fn predictions_ignore_the_future() {
        let mut rng = rng_from_seed(31);
        let base: Vec<u32> = (0..120).map(|_| rng.random_range(0..4)).collect();
        for cut in [40usize, 77, 110] {
            let mut mutated = base.clone();
            for x in &mut mutated[cut..] {
                *x = (*x + 1 + rng.random_range(0..3)) % 4;
            }
            for (mut p, mut q) in predictors().into_iter().zip(predictors()) {
                let a = online_evaluate(&seq(&base), p.as_mut(), 30).unwrap();
                let b = online_evaluate(&seq(&mutated), q.as_mut(), 30).unwrap();
                let upto = cut - 30;
                assert_eq!(a.predictions[..=upto], b.predictions[..=upto]);
            }
        }
    }

    #[test]
    fn iid_accuracy_is_chance() {
        let mut rng = rng_from_seed(77);
        let s: Vec<u32> = (0..100_000).map(|_| rng.random_range(0..4)).collect();
        let s = seq(&s);
        let mut frozen = HmmPredictor::new(HmmConfig { states: 2, iterations: 10, restarts: 1, ..HmmConfig::default() });
        let r = online_evaluate(&s, &mut frozen, 2000).unwrap();
        assert!((r.accuracy - 0.25).abs() < 0.01, "{}", r.accuracy);
    }
}
