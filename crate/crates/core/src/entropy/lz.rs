//! Lempel-Ziv style match-length parse and the entropy rate estimate built on it.
//!
//! For every index `i` the parse needs the longest prefix of `s[i..]` that
//! occurs as a contiguous substring of `s[..i]`. The prefix `s[..i]` is held
//! in an online suffix automaton that grows by one symbol per index, and the
//! current match is tracked as an `(state, length)` pair. Moving from `i` to
//! `i + 1` drops the first symbol of the match, so the whole parse costs
//! amortised `O(n)` automaton steps instead of the naive `O(n^2)` scan.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{Symbol, SymbolSequence};

/// Convention for indices whose every continuation has already been seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LzMode {
    /// Shortest unseen substring length, set to zero once the suffix is
    /// exhausted.
    Paper,
    /// Longest previous match plus one, capped at the remaining length.
    Kontoyiannis,
}

impl std::str::FromStr for LzMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(LzMode::Paper),
            "kontoyiannis" => Ok(LzMode::Kontoyiannis),
            other => Err(Error::invalid(format!("unknown LZ mode {other:?}"))),
        }
    }
}

/// Per-index shortest-new-substring lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LambdaParse {
    pub lambdas: Vec<usize>,
    pub n: usize,
}

impl LambdaParse {
    pub fn mean(&self) -> f64 {
        self.lambdas.iter().sum::<usize>() as f64 / self.n as f64
    }

    /// `(λ, count)` pairs in increasing λ.
    pub fn histogram(&self) -> Vec<(usize, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for &l in &self.lambdas {
            *counts.entry(l).or_insert(0usize) += 1;
        }
        counts.into_iter().collect()
    }
}

struct State {
    len: usize,
    link: Option<usize>,
    next: HashMap<Symbol, usize>,
}

/// Online suffix automaton over the symbols appended so far.
struct SuffixAutomaton {
    states: Vec<State>,
    last: usize,
}

impl SuffixAutomaton {
    fn with_capacity(n: usize) -> Self {
        let mut states = Vec::with_capacity(2 * n + 1);
        states.push(State { len: 0, link: None, next: HashMap::new() });
        Self { states, last: 0 }
    }

    /// Appends `c`. Returns `(split, clone)` when an existing state was split.
    fn extend(&mut self, c: Symbol) -> Option<(usize, usize)> {
        let cur = self.states.len();
        self.states.push(State {
            len: self.states[self.last].len + 1,
            link: None,
            next: HashMap::new(),
        });
        let mut p = Some(self.last);
        while let Some(pi) = p {
            if self.states[pi].next.contains_key(&c) {
                break;
            }
            self.states[pi].next.insert(c, cur);
            p = self.states[pi].link;
        }
        self.last = cur;
        let Some(pi) = p else {
            self.states[cur].link = Some(0);
            return None;
        };
        let q = self.states[pi].next[&c];
        if self.states[pi].len + 1 == self.states[q].len {
            self.states[cur].link = Some(q);
            return None;
        }
        let clone = self.states.len();
        self.states.push(State {
            len: self.states[pi].len + 1,
            link: self.states[q].link,
            next: self.states[q].next.clone(),
        });
        let mut p = Some(pi);
        while let Some(pj) = p {
            if self.states[pj].next.get(&c) != Some(&q) {
                break;
            }
            self.states[pj].next.insert(c, clone);
            p = self.states[pj].link;
        }
        self.states[q].link = Some(clone);
        self.states[cur].link = Some(clone);
        Some((q, clone))
    }
}

/// Longest match lengths: entry `i` is the largest `L` such that
/// `s[i..i + L]` occurs inside `s[..i]`.
fn longest_previous_matches(s: &[Symbol]) -> Vec<usize> {
    let n = s.len();
    let mut sam = SuffixAutomaton::with_capacity(n);
    let mut matches = Vec::with_capacity(n);
    let (mut state, mut len) = (0usize, 0usize);
    for i in 0..n {
        while i + len < n {
            match sam.states[state].next.get(&s[i + len]) {
                Some(&next) => {
                    state = next;
                    len += 1;
                }
                None => break,
            }
        }
        matches.push(len);

        // Grow the automaton to cover s[..=i]; if the state holding the match
        // was split, the match now lives in the clone when it is short enough.
        if let Some((split, clone)) = sam.extend(s[i]) {
            if state == split && len <= sam.states[clone].len {
                state = clone;
            }
        }
        // Drop the first symbol of the match for index i + 1.
        if len > 0 {
            len -= 1;
            if let Some(link) = sam.states[state].link {
                if len <= sam.states[link].len {
                    state = link;
                }
            }
        }
        if len == 0 {
            state = 0;
        }
    }
    matches
}

/// Paper-convention parse: `λ_i` is the length of the shortest substring
/// starting at `i` that does not occur in `s[..i]`, or 0 when every
/// substring up to the end of the sequence has occurred.
pub fn lz_parse(seq: &SymbolSequence) -> LambdaParse {
    let s = seq.symbols();
    let n = s.len();
    let lambdas = longest_previous_matches(s)
        .into_iter()
        .enumerate()
        .map(|(i, l)| if i + l < n { l + 1 } else { 0 })
        .collect();
    LambdaParse { lambdas, n }
}

fn kontoyiannis_parse(seq: &SymbolSequence) -> LambdaParse {
    let s = seq.symbols();
    let n = s.len();
    let lambdas = longest_previous_matches(s)
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l + 1).min(n - i))
        .collect();
    LambdaParse { lambdas, n }
}

/// Parse for either convention.
pub fn parse(seq: &SymbolSequence, mode: LzMode) -> LambdaParse {
    match mode {
        LzMode::Paper => lz_parse(seq),
        LzMode::Kontoyiannis => kontoyiannis_parse(seq),
    }
}

/// Entropy rate estimate `log2(n) / mean(λ)` in bits per symbol.
pub fn entropy_lz(seq: &SymbolSequence, mode: LzMode) -> Result<f64> {
    let n = seq.len();
    if n < 2 {
        return Err(Error::invalid(format!("LZ entropy needs n >= 2, got {n}")));
    }
    let parse = parse(seq, mode);
    Ok((n as f64).log2() / parse.mean())
}
