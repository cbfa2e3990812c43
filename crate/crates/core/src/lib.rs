//! Stroke localization in untrimmed telecast video.
//!
//! The crate is organised the way the processing flows:
//!
//! * [`ingest`] reads raw grayscale `.gry` streams and plans external decodes.
//! * [`features`] computes gray-level histograms, consecutive-frame
//!   differences and HOG descriptors.
//! * [`learners`] holds the random forest (CUT classifier) and the linear SVM
//!   (first-frame camera classifier).
//! * [`pipeline`] turns difference series into CUTs and CUTs into stroke
//!   segments.
//! * [`evalkit`] scores CUTs (precision/recall/F) and segments (temporal IoU).
//! * [`batchrun`] runs per-video jobs over a worker pool.
//! * [`synthcorpus`] generates labelled synthetic videos.
//! * [`workspace`] wires the stages together over an on-disk layout.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batchrun;
pub mod error;
pub mod evalkit;
pub mod features;
pub mod fsio;
pub mod ingest;
pub mod learners;
pub mod pipeline;
pub mod synthcorpus;
pub mod workspace;

pub use error::{Error, Result};

/// Version tag written into every structured-text artifact.
pub const FORMAT_VERSION: &str = "1";
