//! Trip recommendation from a start/end query: contrastive POI embeddings,
//! contrastive trip-encoder warm-up, and destination-aware supervised
//! training of a query-conditioned GRU.

pub mod augment;
pub mod config;
pub mod corpus;
pub mod diffnum;
pub mod embed;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod geograph;
pub mod rng;
pub mod selftrain;
pub mod synth;
pub mod vocab;

pub use error::{Error, ErrorKind, Result};
