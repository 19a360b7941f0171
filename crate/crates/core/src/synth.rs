//! Synthetic sources with closed-form oracles.
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64`. Real-valued draws use `Rng::random::<f64>()` (53-bit
//! uniform on `[0, 1)`); categorical draws walk the cumulative row until it
//! exceeds the uniform draw.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{Symbol, SymbolSequence};

const ROW_SUM_TOLERANCE: f64 = 1e-12;
const STATIONARY_TOLERANCE: f64 = 1e-12;
const STATIONARY_MAX_ITER: usize = 1_000_000;

pub fn rng_from_seed(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Row-stochastic transition matrix `M[a][b] = P(next = b | current = a)`.
pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovSpec {
    pub transition: Matrix,
    pub initial: Vec<f64>,
    pub seed: u64,
}

impl MarkovSpec {
    /// Spec starting from the uniform distribution.
    pub fn new(transition: Matrix, seed: u64) -> Result<Self> {
        let k = transition.len();
        let spec = Self { initial: vec![1.0 / k as f64; k], transition, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn states(&self) -> usize {
        self.transition.len()
    }

    pub fn validate(&self) -> Result<()> {
        validate_stochastic(&self.transition)?;
        if self.initial.len() != self.transition.len() {
            return Err(Error::invalid("initial distribution has the wrong length"));
        }
        let sum: f64 = self.initial.iter().sum();
        if self.initial.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::invalid(format!("initial distribution sums to {sum}")));
        }
        Ok(())
    }
}

fn validate_stochastic(m: &Matrix) -> Result<()> {
    let k = m.len();
    if k == 0 {
        return Err(Error::invalid("empty transition matrix"));
    }
    for (row, r) in m.iter().enumerate() {
        if r.len() != k {
            return Err(Error::invalid(format!("row {row} has {} entries, expected {k}", r.len())));
        }
        let sum: f64 = r.iter().sum();
        if r.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::NotStochastic { row, sum });
        }
    }
    Ok(())
}

/// Rows drawn from a flat Dirichlet, mixed with the identity:
/// `M = stay * I + (1 - stay) * D`.
pub fn random_transition_matrix(states: usize, stay: f64, rng: &mut impl Rng) -> Matrix {
    (0..states)
        .map(|a| {
            let gammas: Vec<f64> = (0..states).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let total: f64 = gammas.iter().sum();
            let mut row: Vec<f64> = gammas
                .iter()
                .enumerate()
                .map(|(b, g)| (1.0 - stay) * g / total + if a == b { stay } else { 0.0 })
                .collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= sum);
            row
        })
        .collect()
}

fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap at the top of the row.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Sample path of raw state indices.
pub fn sample_markov_states(spec: &MarkovSpec, n: usize) -> Result<Vec<usize>> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let mut path = Vec::with_capacity(n);
    if n == 0 {
        return Ok(path);
    }
    let mut state = sample_index(&spec.initial, rng.random());
    path.push(state);
    for _ in 1..n {
        state = sample_index(&spec.transition[state], rng.random());
        path.push(state);
    }
    Ok(path)
}

/// Sample path encoded as a dense symbol sequence (ids in first-appearance
/// order, so they need not equal state indices).
pub fn gen_markov(spec: &MarkovSpec, n: usize) -> Result<SymbolSequence> {
    if n == 0 {
        return Err(Error::invalid("sequence length must be at least 1"));
    }
    SymbolSequence::encode(sample_markov_states(spec, n)?, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ergodicity {
    Ergodic,
    Reducible,
    Periodic,
}

fn reachable(adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    level[start] = Some(0);
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        let d = level[u].unwrap();
        for &v in &adj[u] {
            if level[v].is_none() {
                level[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    level
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Classifies the support graph of `m`.
pub fn is_ergodic(m: &Matrix) -> Ergodicity {
    let k = m.len();
    let forward: Vec<Vec<usize>> = m
        .iter()
        .map(|row| (0..k).filter(|&b| row[b] > 0.0).collect())
        .collect();
    let mut backward = vec![Vec::new(); k];
    for (a, succ) in forward.iter().enumerate() {
        for &b in succ {
            backward[b].push(a);
        }
    }
    let levels = reachable(&forward, 0);
    if levels.iter().any(Option::is_none) || reachable(&backward, 0).iter().any(Option::is_none) {
        return Ergodicity::Reducible;
    }
    // Every edge u -> v closes cycles whose lengths differ by
    // level(u) + 1 - level(v); their gcd is the period.
    let mut period = 0;
    for (u, succ) in forward.iter().enumerate() {
        for &v in succ {
            let diff = (levels[u].unwrap() + 1) as isize - levels[v].unwrap() as isize;
            period = gcd(period, diff.unsigned_abs());
        }
    }
    if period > 1 {
        Ergodicity::Periodic
    } else {
        Ergodicity::Ergodic
    }
}

/// Stationary distribution by power iteration on the lazy chain `(I + M)/2`,
/// which shares the stationary vector of `M` and is aperiodic.
pub fn stationary_distribution(m: &Matrix) -> Result<Vec<f64>> {
    validate_stochastic(m)?;
    if is_ergodic(m) == Ergodicity::Reducible {
        return Err(Error::Reducible);
    }
    let k = m.len();
    let mut pi = vec![1.0 / k as f64; k];
    for _ in 0..STATIONARY_MAX_ITER {
        let mut next = vec![0.0; k];
        for a in 0..k {
            let w = 0.5 * pi[a];
            next[a] += w;
            for b in 0..k {
                next[b] += w * m[a][b];
            }
        }
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|p| *p /= sum);
        let delta = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>();
        pi = next;
        if delta < STATIONARY_TOLERANCE {
            return Ok(pi);
        }
    }
    Err(Error::Numeric("power iteration did not converge".into()))
}

/// Entropy rate `-Σ_a π_a Σ_b M_ab log2 M_ab` in bits per symbol.
pub fn markov_entropy_rate(spec: &MarkovSpec) -> Result<f64> {
    let pi = stationary_distribution(&spec.transition)?;
    Ok(-pi
        .iter()
        .zip(&spec.transition)
        .map(|(&p, row)| {
            p * row.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
        })
        .sum::<f64>())
}

/// Accuracy of the Bayes-optimal one-step predictor, `Σ_a π_a max_b M_ab`.
pub fn markov_optimal_accuracy(spec: &MarkovSpec) -> Result<f64> {
    let pi = stationary_distribution(&spec.transition)?;
    Ok(pi
        .iter()
        .zip(&spec.transition)
        .map(|(&p, row)| p * row.iter().copied().fold(0.0, f64::max))
        .sum())
}

/// Binary substitution grammar with per-child noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrammarSpec {
    pub alphabet: usize,
    pub depth: u32,
    /// `rules[s] = (left, right)` children of symbol `s`.
    pub rules: Vec<(Symbol, Symbol)>,
    pub epsilon: f64,
    pub seed: u64,
}

impl GrammarSpec {
    /// Rule table whose left children and right children are each a random
    /// permutation of the alphabet, so a parent is recoverable from either
    /// child. The table is drawn from a stream separate from generation.
    pub fn with_random_rules(alphabet: usize, depth: u32, epsilon: f64, seed: u64) -> Result<Self> {
        if alphabet == 0 {
            return Err(Error::invalid("grammar alphabet must be non-empty"));
        }
        let mut rng = rng_from_seed(seed);
        rng.set_stream(1);
        let mut left: Vec<Symbol> = (0..alphabet as Symbol).collect();
        let mut right = left.clone();
        left.shuffle(&mut rng);
        right.shuffle(&mut rng);
        let spec = Self {
            alphabet,
            depth,
            rules: left.into_iter().zip(right).collect(),
            epsilon,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphabet == 0 || self.rules.len() != self.alphabet {
            return Err(Error::invalid("rule table must cover every symbol"));
        }
        let a = self.alphabet as Symbol;
        if self.rules.iter().any(|&(l, r)| l >= a || r >= a) {
            return Err(Error::invalid("rule produces a symbol outside the alphabet"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        if self.depth > 30 {
            return Err(Error::invalid(format!("depth {} too large", self.depth)));
        }
        Ok(())
    }
}

/// Expands a uniformly drawn root `depth` times; each child is replaced by a
/// uniform random symbol with probability `epsilon`. Output length is
/// `2^depth`, densely re-encoded.
pub fn gen_grammar(spec: &GrammarSpec) -> Result<SymbolSequence> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let a = spec.alphabet as Symbol;
    let mut level = vec![rng.random_range(0..a)];
    for _ in 0..spec.depth {
        let mut children = Vec::with_capacity(level.len() * 2);
        for &s in &level {
            let (l, r) = spec.rules[s as usize];
            for child in [l, r] {
                let child = if rng.random::<f64>() < spec.epsilon {
                    rng.random_range(0..a)
                } else {
                    child
                };
                children.push(child);
            }
        }
        level = children;
    }
    SymbolSequence::encode(level, None)
}
