//! Refined graph encoder embedding.
//!
//! A linear-time supervised graph embedding (`Z = A W` with a
//! column-normalized one-hot projection), refined by discriminant
//! self-training and latent community recovery, plus the stochastic block
//! model generators and evaluation harness used to validate it.

pub mod embed;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod lda;
pub mod refine;
pub mod sbm;

pub use embed::{gee_embed, one_hot_weights, ColumnBlock, Embedding};
pub use error::{Error, Result};
pub use graph::{class_counts, remove_singletons, Dataset, IndexRemap, LabelVector, SparseGraph};
pub use refine::{refine, RefineConfig, RefineResult};
