//! Explaining a trained policy from its replay data: discretize states into
//! predicates, summarize state/action regularities as conditions, turn them
//! into weighted rules and measure how faithful and useful those rules are.

pub mod ape;
pub mod condition;
pub mod config;
pub mod envs;
pub mod error;
pub mod eval;
pub mod kmeans;
pub mod pipeline;
pub mod predicates;
pub mod query;
pub mod refine;
pub mod replay;
pub mod rng;
pub mod rules;
pub mod summarizer;
pub mod sweep;
pub mod text;
pub mod trainer;
pub mod tree;

pub use error::{Error, Result};
