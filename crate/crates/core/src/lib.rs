//! Caption canonicalization laboratory for contrastive text–motion retrieval.
//!
//! The crate generates multi-caption corpora with known latent content,
//! canonicalizes captions, trains linear dual encoders with symmetric InfoNCE
//! and hand-derived gradients, evaluates retrieval under three correctness
//! protocols, and measures how caption noise shows up in embeddings and
//! gradients.

pub mod canon;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod lingstats;
pub mod model;
pub mod noiselab;
pub mod stats;
pub mod text;

pub use error::{Error, Result};
