//! Contextual spoken language understanding toolkit.
//!
//! Three dialogue-context encoders (previous-utterance, memory network,
//! sequential dialogue encoder network) feed a stacked Bi-RNN joint tagger
//! for domain, intent and IOB slot prediction. The crate also carries the
//! data machinery: an agenda-based dialogue simulator with a rule-based
//! system policy and template NLG, the dialogue-recombination augmenter,
//! corpus encoding, training and evaluation.

pub mod cells;
pub mod config;
pub mod corpus;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod sim;
pub mod model;
pub mod optim;
pub mod params;
pub mod pipeline;
pub mod rng;
pub mod tagger;
pub mod train;
pub mod tape;

pub use error::SluError;
