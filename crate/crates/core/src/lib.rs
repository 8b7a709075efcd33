//! Trace reconstruction toolkit for DNA data storage.
//!
//! The crate covers the full synthetic pipeline: an insertion/deletion/substitution
//! (IDS) channel simulator, tokenized dataset export for next-token-prediction models,
//! real-data preprocessing, classical reconstruction algorithms (BMA, BMALA, VS,
//! TrellisBMA, MSA + majority vote), evaluation metrics, and a small experiment
//! harness for the logistic-regression generalization bound on substitution channels.
//!
//! Work over many clusters is data-parallel through [`exec::Execution`]; with the
//! `parallel` feature disabled every map runs sequentially and produces identical output.

pub mod algorithms;
pub mod align;
pub mod baselines;
pub mod channel;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod io;
pub mod metrics;
pub mod seq;
pub mod theory;
pub mod trellis;

pub use error::{Error, Result};
pub use seq::{Base, DnaSequence, Trace};
