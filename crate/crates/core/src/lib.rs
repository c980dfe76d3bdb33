//! Data-oriented parsing language models.
//!
//! A stochastic tree-substitution grammar is read off a treebank of
//! semantically annotated trees ([`fragments`], [`stsg`]), optionally
//! reestimated by expectation maximization over derivation trellises
//! ([`em`]), and used to pick the most probable string in a recognizer
//! word-graph ([`decoder`]). [`ngram`] supplies a Katz back-off baseline and
//! [`harness`] runs the word-error-rate comparison over random splits.

pub mod corpus;
pub mod decoder;
pub mod em;
pub mod error;
pub mod fragments;
pub mod harness;
pub mod logspace;
pub mod ngram;
pub mod stsg;

pub use error::{Error, Result};
