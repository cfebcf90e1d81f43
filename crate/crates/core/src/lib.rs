//! Conspiracy-narrative classification pipeline.

pub mod analysis;
pub mod annotation;
pub mod classifiers;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod llm;
pub mod mock_server;
pub mod provider;
pub mod rng;
pub mod split;
pub mod stats;
pub mod store;
pub mod types;

pub use error::{Error, Result};
pub use types::{Label, Verdict};
