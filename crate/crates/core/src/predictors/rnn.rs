use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, check_symbol, Predictor};
use crate::error::{Error, Result};
use crate::sequence::{Symbol, SymbolSequence};
use crate::synth::rng_from_seed;

/// Gradients are rescaled so their global norm never exceeds this.
pub const GRADIENT_CLIP: f64 = 5.0;
const FINITE_DIFFERENCE_STEP: f64 = 1e-5;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RnnConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    /// Steps per truncated backpropagation window.
    pub truncation: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for RnnConfig {
    fn default() -> Self {
        Self { hidden: 32, learning_rate: 0.005, truncation: 25, epochs: 10, seed: 0 }
    }
}

/// One tanh recurrent layer with a softmax readout. Matrices are row-major:
/// `wxh` is H×N, `whh` H×H, `why` N×H.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnModel {
    pub hidden: usize,
    pub alphabet_size: usize,
    pub wxh: Vec<f64>,
    pub whh: Vec<f64>,
    pub why: Vec<f64>,
    pub bh: Vec<f64>,
    pub by: Vec<f64>,
    /// Mean cross-entropy (nats per prediction) of each training epoch.
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct Gradients {
    wxh: Vec<f64>,
    whh: Vec<f64>,
    why: Vec<f64>,
    bh: Vec<f64>,
    by: Vec<f64>,
}

impl Gradients {
    fn zeros_like(m: &RnnModel) -> Self {
        Self {
            wxh: vec![0.0; m.wxh.len()],
            whh: vec![0.0; m.whh.len()],
            why: vec![0.0; m.why.len()],
            bh: vec![0.0; m.bh.len()],
            by: vec![0.0; m.by.len()],
        }
    }

    fn tensors(&self) -> [&Vec<f64>; 5] {
        [&self.wxh, &self.whh, &self.why, &self.bh, &self.by]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [&mut self.wxh, &mut self.whh, &mut self.why, &mut self.bh, &mut self.by]
    }

    fn clip(&mut self, max_norm: f64) {
        let norm = self.tensors().iter().flat_map(|t| t.iter()).map(|g| g * g).sum::<f64>().sqrt();
        if norm > max_norm {
            let scale = max_norm / norm;
            for t in self.tensors_mut() {
                t.iter_mut().for_each(|g| *g *= scale);
            }
        }
    }
}

fn softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    logits.iter_mut().for_each(|l| *l /= sum);
}

impl RnnModel {
    /// Weights uniform in `±1/sqrt(H)` for the recurrence and `±0.01` for
    /// the readout, zero biases.
    pub fn new(hidden: usize, alphabet_size: usize, seed: u64) -> Result<Self> {
        if hidden == 0 || alphabet_size == 0 {
            return Err(Error::invalid("RNN needs a positive hidden size and alphabet"));
        }
        let mut rng = rng_from_seed(seed);
        let scale = 1.0 / (hidden as f64).sqrt();
        let mut uniform = |len: usize, s: f64| -> Vec<f64> {
            (0..len).map(|_| s * (2.0 * rng.random::<f64>() - 1.0)).collect()
        };
        Ok(Self {
            hidden,
            alphabet_size,
            wxh: uniform(hidden * alphabet_size, scale),
            whh: uniform(hidden * hidden, scale),
            why: uniform(alphabet_size * hidden, 0.01),
            bh: vec![0.0; hidden],
            by: vec![0.0; alphabet_size],
            epoch_losses: Vec::new(),
        })
    }

    /// All parameters zero.
    pub fn zeros(hidden: usize, alphabet_size: usize) -> Self {
        Self {
            hidden,
            alphabet_size,
            wxh: vec![0.0; hidden * alphabet_size],
            whh: vec![0.0; hidden * hidden],
            why: vec![0.0; alphabet_size * hidden],
            bh: vec![0.0; hidden],
            by: vec![0.0; alphabet_size],
            epoch_losses: Vec::new(),
        }
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [&mut self.wxh, &mut self.whh, &mut self.why, &mut self.bh, &mut self.by]
    }

    pub fn is_finite(&self) -> bool {
        [&self.wxh, &self.whh, &self.why, &self.bh, &self.by]
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Hidden state after reading `x` from state `h`.
    pub fn step(&self, h: &[f64], x: Symbol) -> Vec<f64> {
        let (hs, n) = (self.hidden, self.alphabet_size);
        (0..hs)
            .map(|i| {
                let row = &self.whh[i * hs..(i + 1) * hs];
                let rec: f64 = row.iter().zip(h).map(|(w, v)| w * v).sum();
                (self.wxh[i * n + x as usize] + rec + self.bh[i]).tanh()
            })
            .collect()
    }

    /// Next-symbol distribution from hidden state `h`.
    pub fn output(&self, h: &[f64]) -> Vec<f64> {
        let hs = self.hidden;
        let mut logits: Vec<f64> = (0..self.alphabet_size)
            .map(|k| {
                let row = &self.why[k * hs..(k + 1) * hs];
                row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.by[k]
            })
            .collect();
        softmax(&mut logits);
        logits
    }

    /// Summed cross-entropy (nats) of predicting `window[t + 1]` from
    /// `window[..=t]`, starting from hidden state `h0`.
    pub fn loss(&self, window: &[Symbol], h0: &[f64]) -> f64 {
        let mut h = h0.to_vec();
        let mut loss = 0.0;
        for t in 0..window.len().saturating_sub(1) {
            h = self.step(&h, window[t]);
            loss -= self.output(&h)[window[t + 1] as usize].ln();
        }
        loss
    }

    /// Loss, gradients and final hidden state over one window.
    fn backprop(&self, window: &[Symbol], h0: &[f64]) -> (f64, Gradients, Vec<f64>) {
        let (hs, n) = (self.hidden, self.alphabet_size);
        let steps = window.len().saturating_sub(1);
        let mut states = Vec::with_capacity(steps + 1);
        states.push(h0.to_vec());
        let mut probs = Vec::with_capacity(steps);
        let mut loss = 0.0;
        for t in 0..steps {
            let h = self.step(&states[t], window[t]);
            let p = self.output(&h);
            loss -= p[window[t + 1] as usize].ln();
            states.push(h);
            probs.push(p);
        }
        let mut g = Gradients::zeros_like(self);
        let mut dh_next = vec![0.0; hs];
        for t in (0..steps).rev() {
            let h = &states[t + 1];
            let mut dy = probs[t].clone();
            dy[window[t + 1] as usize] -= 1.0;
            let mut dh = dh_next.clone();
            for k in 0..n {
                g.by[k] += dy[k];
                for i in 0..hs {
                    g.why[k * hs + i] += dy[k] * h[i];
                    dh[i] += self.why[k * hs + i] * dy[k];
                }
            }
            let draw: Vec<f64> = dh.iter().zip(h).map(|(d, v)| d * (1.0 - v * v)).collect();
            let prev = &states[t];
            let x = window[t] as usize;
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..hs {
                g.bh[i] += draw[i];
                g.wxh[i * n + x] += draw[i];
                for j in 0..hs {
                    g.whh[i * hs + j] += draw[i] * prev[j];
                    dh_next[j] += self.whh[i * hs + j] * draw[i];
                }
            }
        }
        let last = states.pop().expect("states holds h0");
        (loss, g, last)
    }
}

/// Trains with truncated backpropagation through time and Adam. The
/// hidden state is carried across windows within an epoch.
pub fn train_rnn(seq: &SymbolSequence, cfg: &RnnConfig) -> Result<RnnModel> {
    train_symbols(seq.symbols(), seq.alphabet_size(), cfg)
}

fn train_symbols(s: &[Symbol], alphabet_size: usize, cfg: &RnnConfig) -> Result<RnnModel> {
    if cfg.truncation < 2 || s.len() < cfg.truncation {
        return Err(Error::invalid(format!(
            "RNN training needs n >= truncation >= 2 (n = {}, truncation = {})",
            s.len(),
            cfg.truncation
        )));
    }
    for &x in s {
        check_symbol(x, alphabet_size)?;
    }
    let mut model = RnnModel::new(cfg.hidden, alphabet_size, cfg.seed)?;
    let mut first = Gradients::zeros_like(&model);
    let mut second = Gradients::zeros_like(&model);
    let mut updates = 0i32;
    for epoch in 0..cfg.epochs {
        let mut h = vec![0.0; cfg.hidden];
        let (mut total, mut count) = (0.0, 0usize);
        let mut start = 0;
        // Windows overlap by one symbol so every transition is trained on.
        while start + 1 < s.len() {
            let end = (start + cfg.truncation + 1).min(s.len());
            let (loss, mut grads, h_last) = model.backprop(&s[start..end], &h);
            total += loss;
            count += end - start - 1;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            grads.clip(GRADIENT_CLIP);
            updates += 1;
            let step = cfg.learning_rate * (1.0 - ADAM_BETA2.powi(updates)).sqrt()
                / (1.0 - ADAM_BETA1.powi(updates));
            for (((param, grad), m1), m2) in model
                .tensors_mut()
                .into_iter()
                .zip(grads.tensors())
                .zip(first.tensors_mut())
                .zip(second.tensors_mut())
            {
                for (((p, g), a), b) in param.iter_mut().zip(grad.iter()).zip(m1.iter_mut()).zip(m2.iter_mut()) {
                    *a = ADAM_BETA1 * *a + (1.0 - ADAM_BETA1) * g;
                    *b = ADAM_BETA2 * *b + (1.0 - ADAM_BETA2) * g * g;
                    *p -= step * *a / (b.sqrt() + ADAM_EPSILON);
                }
            }
            h = h_last;
            start = end - 1;
        }
        let mean = total / count as f64;
        if !mean.is_finite() || !model.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        model.epoch_losses.push(mean);
    }
    Ok(model)
}

/// Largest relative disagreement between backpropagated gradients and
/// central finite differences, over every parameter, for the loss of
/// `batch` from a zero hidden state.
pub fn rnn_gradient_check(model: &RnnModel, batch: &[Symbol]) -> f64 {
    let h0 = vec![0.0; model.hidden];
    let (_, analytic, _) = model.backprop(batch, &h0);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (t, grad) in analytic.tensors().into_iter().enumerate() {
        for (i, &ga) in grad.iter().enumerate() {
            let original = probe.tensors_mut()[t][i];
            probe.tensors_mut()[t][i] = original + FINITE_DIFFERENCE_STEP;
            let plus = probe.loss(batch, &h0);
            probe.tensors_mut()[t][i] = original - FINITE_DIFFERENCE_STEP;
            let minus = probe.loss(batch, &h0);
            probe.tensors_mut()[t][i] = original;
            let gn = (plus - minus) / (2.0 * FINITE_DIFFERENCE_STEP);
            worst = worst.max((ga - gn).abs() / (ga.abs() + gn.abs()).max(1e-8));
        }
    }
    worst
}

/// Trains on the warm-up prefix, then only advances the hidden state.
#[derive(Debug, Clone)]
pub struct RnnPredictor {
    config: RnnConfig,
    model: Option<RnnModel>,
    hidden: Vec<f64>,
}

impl RnnPredictor {
    pub fn new(config: RnnConfig) -> Self {
        Self { config, model: None, hidden: Vec::new() }
    }

    pub fn model(&self) -> Option<&RnnModel> {
        self.model.as_ref()
    }

    fn fitted(&self) -> Result<&RnnModel> {
        self.model.as_ref().ok_or_else(|| Error::invalid("RNN predictor used before warm-up"))
    }
}

impl Predictor for RnnPredictor {
    fn warm_up(&mut self, history: &[Symbol], alphabet_size: usize) -> Result<()> {
        let model = train_symbols(history, alphabet_size, &self.config)?;
        self.hidden = vec![0.0; model.hidden];
        self.model = Some(model);
        for &x in history {
            self.observe(x)?;
        }
        Ok(())
    }

    fn predict(&mut self) -> Result<Symbol> {
        let m = self.fitted()?;
        Ok(argmax(&m.output(&self.hidden)) as Symbol)
    }

    fn observe(&mut self, symbol: Symbol) -> Result<()> {
        let m = self.fitted()?;
        check_symbol(symbol, m.alphabet_size)?;
        self.hidden = m.step(&self.hidden, symbol);
        Ok(())
    }
}
