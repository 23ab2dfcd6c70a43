//! Community question retrieval.
//!
//! Archived Q&A pairs are ranked against a user query by combining
//! question-relevance features (language model, word translation model,
//! query-weighted topic model) with answer quality derived from user
//! authority, fused by a LambdaMART ranker.

pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod index;
pub mod io;
pub mod ltr;
pub mod pipeline;
pub mod quality;
pub mod relevance;
pub mod synth;
pub mod topics;
pub mod translation;

pub use error::{Error, Result};
