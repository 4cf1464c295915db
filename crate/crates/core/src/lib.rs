//! Selective explanations for text classifiers.
//!
//! The crate turns LIME keyword explanations of a black-box sentiment
//! classifier into *selective* explanations: a word-level belief model,
//! trained from a small amount of human (or simulated) input, predicts which
//! keywords the recipient would consider relevant, and the rest are grayed
//! out when rendered.
//!
//! Modules follow the pipeline order:
//!
//! - [`corpus`]: documents, tokenization, deterministic splits
//! - [`classifier`]: the black-box interface, a bag-of-words reference model
//!   and a remote HTTP client
//! - [`explainer`]: LIME surrogate fitting and SP-LIME example selection
//! - [`belief`]: embeddings, input records, negative sampling, belief model
//! - [`selector`]: per-token display states (highlight / gray / plain)
//! - [`study`]: conditions, sessions, sampling, oracle annotators, metrics
//! - [`synthetic`]: a seeded review corpus and embedding table for desk runs

pub mod belief;
pub mod classifier;
pub mod corpus;
pub mod explainer;
pub mod optim;
pub mod seed;
pub mod selector;
pub mod study;
pub mod synthetic;

pub use corpus::{Document, Label, Token, TokenizedReview};
