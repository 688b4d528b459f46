//! Distilling noisy ensemble annotations into small per-utterance dialogue
//! classifiers.
//!
//! The workflow: an ensemble of annotator calls labels every utterance
//! ([`simulator`], or externally produced scores via [`scores`]); draws are
//! averaged into confidence scores whose calibration is measured with ECE;
//! dialogues are cut into prefix segments ([`corpus`]); discordant
//! intra-session segment pairs ([`pairing`]) pretrain a student with a
//! margin-aware pairwise ranking loss ([`student`]) before it is fine-tuned on
//! a small gold set. [`harness`] wires the experiments to files and a CLI.

pub mod corpus;
pub mod error;
pub mod harness;
pub mod numeric;
pub mod pairing;
pub mod rng;
pub mod scores;
pub mod simulator;
pub mod student;

pub use error::{Error, Result};
