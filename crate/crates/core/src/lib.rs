//! Speech-based depression detection with a gender-bias study.
//!
//! The crate covers the whole experiment: a synthetic interview corpus
//! ([`synth`]), log-mel and raw-waveform features ([`dsp`]), class- and
//! gender-balanced sampling ([`dataset`]), a small CNN+LSTM trained from
//! scratch ([`nn`]) and per-gender F1 / fairness reporting ([`eval`]).

pub mod dataset;
pub mod dsp;
mod error;
pub mod eval;
pub mod exec;
pub mod features;
pub mod nn;
pub mod seed;
pub mod synth;
pub mod wav;

pub use error::{Error, Result};
pub use exec::Execution;
