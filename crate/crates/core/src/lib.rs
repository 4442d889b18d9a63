//! One-stage event extraction by word-pair relation grid tagging.
//!
//! Events are encoded per event type as grids of span relations (trigger and
//! argument boundaries) and role relations (trigger word to argument word).
//! A small neural scorer fuses event-type embeddings into word
//! representations, scores every word pair with a rotary distance-aware
//! product, and is trained with a circle-style loss. Decoding turns score
//! grids back into overlapped and nested event structures in a single pass.

pub mod error;
pub mod event_model;
pub mod fusion;
pub mod grid_codec;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod predictor;
pub mod trainer;

pub use error::{Error, Result};
