//! Evaluation toolkit for generated code: lexical, syntactic, edit-distance,
//! embedding and execution metrics, identifier perturbations, and statistics
//! for judging the metrics themselves.

// Config checks are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codebleu;
pub mod config;
pub mod corpus;
pub mod edit;
pub mod embedding;
pub mod error;
pub mod execution;
pub mod lexical;
pub mod meta;
pub mod metastats;
pub mod perturb;
pub mod pipeline;
pub mod report;
pub mod syntax;
pub mod tokenize;

pub use error::{Error, Result};
