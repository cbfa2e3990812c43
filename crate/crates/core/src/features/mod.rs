//! Per-frame descriptors.
//!
//! [`histogram`] covers gray-level histograms and the consecutive-frame
//! difference series used for CUT detection; [`hog`] covers the first-frame
//! HOG descriptor used by the camera models.

pub mod histogram;
pub mod hog;

pub use histogram::{
    diff_series, gray_histogram, rgb_histograms, sum_abs_hist_diff, sum_abs_rgb_diff, weighted_chi2_diff,
    DiffKind, DiffSeries, GrayHistogram, DEFAULT_BINS,
};
pub use hog::{hog, read_hog_block, write_hog_block, HogDescriptor, HogLayout, HogParams};
