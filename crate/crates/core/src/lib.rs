//! Topic-grounded local explanations and semantic counterexample generation
//! for explanatory interactive learning on text.
//!
//! The crate is `no_std` with `alloc`. Everything that touches files, sockets
//! or the clock lives in the `semloop` companion crate.
//!
//! Pipeline overview:
//!
//! * [`corpus`] turns raw text into vocabulary-indexed documents.
//! * [`topic_model`] fits LDA by collapsed Gibbs sampling, infers topic
//!   mixtures and samples synthetic documents from manipulated mixtures.
//! * [`learner`] is the softmax-regression base classifier.
//! * [`explainers`] builds word-level (LIME) and topic-level (topicLIME)
//!   local surrogates.
//! * [`oracle`] simulates expert knowledge with sparse regression Gold Standards.
//! * [`strategies`] implements active learning, CAIPI and SemanticPush and the
//!   interaction loop that drives them.
//! * [`metrics`] holds predictive and explanation-quality measures.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod corpus;
pub mod error;
pub mod explainers;
pub mod learner;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod split;
pub mod strategies;
pub mod synthetic;
pub mod text;
pub mod topic_model;

pub use error::{Error, Result};
