//! Explicit-state models of the busy-forbidden lock and the term library,
//! with checkers for their safety, conditional liveness and entry
//! properties and a divergence-preserving branching bisimulation check.

pub mod action;
pub mod aut;
pub mod bisim;
pub mod cli;
pub mod explore;
pub mod liveness;
pub mod lts;
pub mod models;
pub mod properties;
pub mod safety;

use thiserror::Error;

pub use action::Action;
pub use explore::{explore, Model, DEFAULT_STATE_CAP};
pub use lts::Lts;
pub use properties::{Dims, Property, Verdict};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("state space exceeds the cap of {cap} states")]
    StateCapExceeded { cap: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("visible alphabets differ (only left: {left_only:?}; only right: {right_only:?})")]
    AlphabetMismatch {
        left_only: Vec<String>,
        right_only: Vec<String>,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
