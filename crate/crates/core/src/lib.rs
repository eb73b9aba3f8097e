//! Evaluation and training toolkit for Chinese spelling and grammatical
//! error correction.
//!
//! * [`text`]: unit-level (Unicode scalar) text representation and normalization.
//! * [`corpus`]: parallel corpora in TSV/JSONL, unification and splitting.
//! * [`align`]: minimum-cost character alignment and its exhaustive reference.
//! * [`edits`]: span edits, merging, application, matching and the M2-like gold format.
//! * [`metrics`]: sentence-level CSC F1, edit-level F-beta, macro averaging.
//! * [`model`]: confusion-channel + n-gram corrector with staged NLL fitting and beam decoding.
//! * [`synth`]: deterministic synthetic corpora for smoke tests and demos.

pub mod align;
pub mod corpus;
pub mod edits;
pub mod error;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
