//! Entropy rates, predictability bounds, next-place predictors and
//! criticality diagnostics for symbolic mobility sequences.
//!
//! Raw GPS fixes are discretised onto a grid and collapsed into visit
//! sequences ([`trajectory`]). Their entropy ([`entropy`]) bounds the
//! accuracy of any next-place predictor through Fano's inequality
//! ([`bound`]), which [`predictors`] can be measured against. The
//! [`criticality`] module tests whether correlations decay like a Markov
//! process would allow, and [`synth`] generates sources with known answers.

pub mod bound;
pub mod criticality;
pub mod entropy;
pub mod error;
pub mod io;
pub mod predictors;
pub mod sequence;
pub mod synth;
pub mod trajectory;

pub use bound::{predictability_bound, PredictabilityBound};
pub use entropy::{Estimator, Histogram, LzMode};
pub use error::{Error, Result};
pub use sequence::{Symbol, SymbolSequence};
