//! diffmask: find what makes a target corpus different from the general
//! domain, and turn that into masking plans for self-supervised continued
//! pretraining.
//!
//! The pipeline has four stages:
//!
//! 1. **seeds** — score every corpus word by the ratio of its in-corpus
//!    relative frequency to its background relative frequency and select
//!    the top-K eligible words (the diff-set) with their embeddings.
//! 2. **plan** — turn each document into a per-token masking distribution
//!    (nearest-neighbor similarity to the diff-set by default; centroid,
//!    uniform, attention, and entity-span strategies are also available)
//!    and sample a group-atomic mask plan against a token budget.
//! 3. **apply** — realize plans as masked token sequences, replacing masked
//!    tokens with a sentinel or random vocabulary items.
//! 4. **stats** — aggregate masked-word histograms, chosen-seed usage,
//!    seed-embedding variance, and masked-label fractions.
//!
//! All sampling is deterministic: each document draws from an RNG stream
//! derived from the global seed and the document id (see
//! [`masker::doc_stream_seed`]), so results do not depend on worker count
//! or evaluation order.

pub mod analysis;
pub mod background;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod formats;
pub mod masker;
pub mod pipeline;
pub mod tficf;
pub mod warnings;

pub use error::{Error, Result};
pub use warnings::Warnings;
