//! Supervised models trained from scratch: a random forest for CUT
//! classification and a linear SVM for first-frame camera classification.
//!
//! Both are deterministic under their seed and immutable once trained.

mod forest;
mod persist;
mod svm;

pub use forest::{train_rf, ForestConfig, Node, RandomForestModel, Tree};
pub use persist::{load_model, save_model, Model};
pub use svm::{svm_objective, train_svm, train_svm_traced, LinearSvmModel, SvmConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub rf: ForestConfig,
    pub svm: SvmConfig,
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        TrainConfig {
            rf: ForestConfig { seed, ..ForestConfig::default() },
            svm: SvmConfig { seed, ..SvmConfig::default() },
        }
    }
}

/// Checks a labelled sample matrix and returns its feature dimension.
fn check_training_set(samples: &[Vec<f64>], labels: &[u8]) -> Result<usize> {
    if samples.is_empty() {
        return Err(Error::EmptyData);
    }
    if samples.len() != labels.len() {
        return Err(Error::Shape {
            expected: samples.len(),
            got: labels.len(),
        });
    }
    let d = samples[0].len();
    for s in samples {
        if s.len() != d {
            return Err(Error::Shape { expected: d, got: s.len() });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("training features must be finite".into()));
        }
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Label(bad));
    }
    Ok(d)
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape { expected, got });
    }
    Ok(())
}
