use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, check_symbol, Predictor};
use crate::error::{Error, Result};
use crate::sequence::{Symbol, SymbolSequence};
use crate::synth::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmmConfig {
    pub states: usize,
    pub iterations: usize,
    /// Stop once an iteration gains less log-likelihood than this (nats).
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for HmmConfig {
    fn default() -> Self {
        Self { states: 8, iterations: 100, tolerance: 1e-4, restarts: 5, seed: 0 }
    }
}

/// Discrete hidden Markov model. Rows of `transitions` and `emissions` are
/// probability vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    pub initial: Vec<f64>,
    pub transitions: Vec<Vec<f64>>,
    pub emissions: Vec<Vec<f64>>,
    /// Log-likelihood of the training data (nats) before each update.
    pub log_likelihood_trace: Vec<f64>,
}

impl HmmModel {
    pub fn states(&self) -> usize {
        self.initial.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.emissions.first().map_or(0, Vec::len)
    }

    fn random(states: usize, alphabet: usize, rng: &mut impl Rng) -> Self {
        let mut row = |len: usize| {
            let r: Vec<f64> = (0..len).map(|_| 0.5 + rng.random::<f64>()).collect();
            let sum: f64 = r.iter().sum();
            r.into_iter().map(|x| x / sum).collect::<Vec<f64>>()
        };
        Self {
            initial: row(states),
            transitions: (0..states).map(|_| row(states)).collect(),
            emissions: (0..states).map(|_| row(alphabet)).collect(),
            log_likelihood_trace: Vec::new(),
        }
    }

    /// Hidden-state distribution one step after `belief`.
    fn propagate(&self, belief: &[f64]) -> Vec<f64> {
        let k = self.states();
        let mut next = vec![0.0; k];
        for (i, &b) in belief.iter().enumerate() {
            if b != 0.0 {
                for (j, nj) in next.iter_mut().enumerate() {
                    *nj += b * self.transitions[i][j];
                }
            }
        }
        next
    }

    /// Conditions a prior over the current hidden state on seeing `symbol`.
    /// Returns the normaliser; when it is zero the prior is left unchanged.
    fn condition(&self, prior: &mut [f64], symbol: Symbol) -> f64 {
        let x = symbol as usize;
        let mut post: Vec<f64> = prior.iter().enumerate().map(|(i, p)| p * self.emissions[i][x]).collect();
        let norm: f64 = post.iter().sum();
        if norm > 0.0 && norm.is_finite() {
            post.iter_mut().for_each(|p| *p /= norm);
            prior.copy_from_slice(&post);
        }
        norm
    }

    fn symbol_distribution(&self, prior: &[f64]) -> Vec<f64> {
        let mut dist = vec![0.0; self.alphabet_size()];
        for (i, &p) in prior.iter().enumerate() {
            for (x, d) in dist.iter_mut().enumerate() {
                *d += p * self.emissions[i][x];
            }
        }
        dist
    }
}

/// Scaled forward-backward pass; returns (log-likelihood, per-step state
/// posteriors, expected transition counts).
struct Expectations {
    log_likelihood: f64,
    gamma: Vec<Vec<f64>>,
    xi: Vec<Vec<f64>>,
}

fn expectations(m: &HmmModel, s: &[Symbol]) -> Result<Expectations> {
    let (n, k) = (s.len(), m.states());
    let mut alpha = vec![vec![0.0; k]; n];
    let mut scale = vec![0.0; n];
    for t in 0..n {
        let x = s[t] as usize;
        let prior = if t == 0 { m.initial.clone() } else { m.propagate(&alpha[t - 1]) };
        for j in 0..k {
            alpha[t][j] = prior[j] * m.emissions[j][x];
        }
        let c: f64 = alpha[t].iter().sum();
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Numeric(format!("forward scaling factor {c} at step {t}")));
        }
        alpha[t].iter_mut().for_each(|a| *a /= c);
        scale[t] = c;
    }
    let mut beta = vec![1.0; k];
    let mut gamma = vec![vec![0.0; k]; n];
    let mut xi = vec![vec![0.0; k]; k];
    for t in (0..n).rev() {
        let norm: f64 = (0..k).map(|i| alpha[t][i] * beta[i]).sum();
        for i in 0..k {
            gamma[t][i] = alpha[t][i] * beta[i] / norm;
        }
        if t == 0 {
            break;
        }
        let x = s[t] as usize;
        let eb: Vec<f64> = (0..k).map(|j| m.emissions[j][x] * beta[j]).collect();
        for i in 0..k {
            for j in 0..k {
                xi[i][j] += alpha[t - 1][i] * m.transitions[i][j] * eb[j] / scale[t];
            }
        }
        beta = (0..k)
            .map(|i| (0..k).map(|j| m.transitions[i][j] * eb[j]).sum::<f64>() / scale[t])
            .collect();
    }
    Ok(Expectations { log_likelihood: scale.iter().map(|c| c.ln()).sum(), gamma, xi })
}

fn normalise_rows(rows: &mut [Vec<f64>], fallback: &[Vec<f64>]) {
    for (row, old) in rows.iter_mut().zip(fallback) {
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|x| *x /= sum);
        } else {
            row.copy_from_slice(old);
        }
    }
}

fn baum_welch(mut m: HmmModel, s: &[Symbol], cfg: &HmmConfig) -> Result<HmmModel> {
    let (k, a) = (m.states(), m.alphabet_size());
    for _ in 0..cfg.iterations {
        let e = expectations(&m, s)?;
        if let Some(&last) = m.log_likelihood_trace.last() {
            if e.log_likelihood - last < cfg.tolerance {
                m.log_likelihood_trace.push(e.log_likelihood);
                return Ok(m);
            }
        }
        m.log_likelihood_trace.push(e.log_likelihood);
        m.initial = e.gamma[0].clone();
        let mut transitions = e.xi;
        normalise_rows(&mut transitions, &m.transitions);
        let mut emissions = vec![vec![0.0; a]; k];
        for (t, g) in e.gamma.iter().enumerate() {
            for i in 0..k {
                emissions[i][s[t] as usize] += g[i];
            }
        }
        normalise_rows(&mut emissions, &m.emissions);
        m.transitions = transitions;
        m.emissions = emissions;
    }
    let e = expectations(&m, s)?;
    m.log_likelihood_trace.push(e.log_likelihood);
    Ok(m)
}

fn fit_symbols(s: &[Symbol], alphabet_size: usize, cfg: &HmmConfig) -> Result<HmmModel> {
    if cfg.states < 1 {
        return Err(Error::invalid("HMM needs at least one hidden state"));
    }
    if s.len() < 2 {
        return Err(Error::invalid(format!("HMM fit needs at least 2 symbols, got {}", s.len())));
    }
    for &x in s {
        check_symbol(x, alphabet_size)?;
    }
    let mut rng = rng_from_seed(cfg.seed);
    let mut best: Option<HmmModel> = None;
    for _ in 0..cfg.restarts.max(1) {
        let start = HmmModel::random(cfg.states, alphabet_size, &mut rng);
        let fitted = baum_welch(start, s, cfg)?;
        let ll = *fitted.log_likelihood_trace.last().expect("trace is never empty");
        if best.as_ref().is_none_or(|b| ll > *b.log_likelihood_trace.last().unwrap()) {
            best = Some(fitted);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Baum-Welch from seeded random starts, keeping the most likely fit.
pub fn fit_hmm(seq: &SymbolSequence, cfg: &HmmConfig) -> Result<HmmModel> {
    fit_symbols(seq.symbols(), seq.alphabet_size(), cfg)
}

/// Most probable next symbol after filtering `history`; ties go to the
/// smaller id.
pub fn hmm_predict_next(m: &HmmModel, history: &[Symbol]) -> Result<Symbol> {
    let mut prior = m.initial.clone();
    for &x in history {
        check_symbol(x, m.alphabet_size())?;
        m.condition(&mut prior, x);
        prior = m.propagate(&prior);
    }
    Ok(argmax(&m.symbol_distribution(&prior)) as Symbol)
}

/// Fits on the warm-up prefix, then only filters.
#[derive(Debug, Clone)]
pub struct HmmPredictor {
    config: HmmConfig,
    model: Option<HmmModel>,
    /// Distribution of the hidden state that emits the next symbol.
    prior: Vec<f64>,
}

impl HmmPredictor {
    pub fn new(config: HmmConfig) -> Self {
        Self { config, model: None, prior: Vec::new() }
    }

    pub fn model(&self) -> Option<&HmmModel> {
        self.model.as_ref()
    }

    fn fitted(&self) -> Result<&HmmModel> {
        self.model.as_ref().ok_or_else(|| Error::invalid("HMM predictor used before warm-up"))
    }
}

impl Predictor for HmmPredictor {
    fn warm_up(&mut self, history: &[Symbol], alphabet_size: usize) -> Result<()> {
        let model = fit_symbols(history, alphabet_size, &self.config)?;
        self.prior = model.initial.clone();
        self.model = Some(model);
        for &x in history {
            self.observe(x)?;
        }
        Ok(())
    }

    fn predict(&mut self) -> Result<Symbol> {
        let m = self.fitted()?;
        Ok(argmax(&m.symbol_distribution(&self.prior)) as Symbol)
    }

    fn observe(&mut self, symbol: Symbol) -> Result<()> {
        let m = self.fitted()?;
        check_symbol(symbol, m.alphabet_size())?;
        let mut prior = self.prior.clone();
        m.condition(&mut prior, symbol);
        self.prior = m.propagate(&prior);
        Ok(())
    }
}
