//! An end-to-end related-item recommender engine.
//!
//! Given a query item, the engine narrows a corpus to a set of plausibly
//! related candidates (board co-occurrence, random graph walks, session
//! embeddings, text search, visual similarity, locale-segmented sources),
//! adjusts for memorized engagement corrected for position bias, and orders
//! the survivors with a learned ranking model. An offline evaluation and
//! simulation layer closes the loop with synthetic position-biased users,
//! and a root/leaf scatter-gather service serves the whole pipeline over
//! HTTP with pin data kept local to the leaves.
//!
//! The `relrec` binary exposes every stage as a subcommand; see the README
//! for a worked end-to-end session.

pub mod cli;
pub mod corpus;
pub mod eval;
pub mod graph;
pub mod memboost;
pub mod pin2vec;
pub mod pipeline;
pub mod ranking;
pub mod serve;
pub mod supplemental;
pub mod synth;
pub mod util;

pub use corpus::Signature;
pub use graph::{Candidate, CandidateFlag, CandidateSet, CandidateSource};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("feature schema mismatch: model {model:#018x}, extractor {extractor:#018x}")]
    SchemaMismatch { model: u64, extractor: u64 },
    #[error("unknown signature: {0}")]
    UnknownSignature(String),
    #[error("transport: {0}")]
    Transport(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn corrupt(msg: impl Into<String>) -> Self {
        Error::CorruptFile(msg.into())
    }
}
