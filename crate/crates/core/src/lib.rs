//! Feature-density analysis and classifier benchmarking for short-text
//! harmful-content detection.
//!
//! The pipeline: load a labelled corpus with its CoNLL-U annotations
//! ([`corpus`]), derive one of eleven feature-sequence [`variants`] per
//! sample, measure [`density`], vectorise ([`vectorize`]), train and score
//! the classifier families ([`learn`], [`balance`]), cross-validate and
//! correlate ([`evaluate`]), and drive the whole grid from a config
//! ([`experiment`]).

pub mod balance;
pub mod blob;
pub mod corpus;
pub mod density;
pub mod error;
pub mod evaluate;
pub mod exec;
pub mod experiment;
pub mod learn;
pub mod seed;
pub mod variants;
pub mod vectorize;

pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
