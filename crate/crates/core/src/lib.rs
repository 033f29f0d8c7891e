//! Compact image representations from max-pooled object-region descriptors.
//!
//! The pipeline runs in stages, each with its own module and file format:
//!
//! 1. [`proposals`]: graph-based segmentation, hierarchical grouping into
//!    scored boxes, IoU suppression.
//! 2. [`descriptors`]: one fixed-length vector per box, built in or imported
//!    through OFPF files.
//! 3. [`pooling`]: component-wise maximum over all region vectors.
//! 4. [`compression`]: PCA projection and ITQ binary codes.
//! 5. [`index`] and [`eval`]: exact l2/Hamming search and retrieval metrics.
//!
//! Per-image stages and search scans run on rayon when the `parallel`
//! feature is enabled (default); results never depend on the thread count.

mod binio;
pub mod cli;
pub mod compression;
pub mod descriptors;
pub mod error;
pub mod eval;
pub mod exec;
pub mod index;
pub mod pipeline;
pub mod pooling;
pub mod proposals;
pub mod raster;
pub mod synthetic;

pub use error::{Error, Result};
pub use exec::Execution;
