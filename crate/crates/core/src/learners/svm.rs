use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_dims, check_training_set};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-4,
            epochs: 50,
            seed: 42,
        }
    }
}

/// Linear SVM. `weights` has one entry per feature plus a trailing bias
/// that multiplies an implicit constant-1 feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub config: SvmConfig,
}

impl LinearSvmModel {
    pub fn n_features(&self) -> usize {
        self.weights.len() - 1
    }

    /// `w · [x; 1]`.
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        check_dims(self.n_features(), x.len())?;
        Ok(augmented_dot(&self.weights, x))
    }

    /// Class 1 iff the margin is non-negative.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.margin(x)? >= 0.0))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Parse("SVM weights must be non-empty and finite".into()));
        }
        Ok(())
    }
}

#[inline]
fn augmented_dot(w: &[f64], x: &[f64]) -> f64 {
    let (bias, w) = w.split_last().expect("weights include the bias");
    w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias
}

/// Primal objective `λ/2 ‖w‖² + mean hinge loss` over `{0,1}` labels.
pub fn svm_objective(weights: &[f64], lambda: f64, samples: &[Vec<f64>], labels: &[u8]) -> f64 {
    let reg = 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>();
    let hinge: f64 = samples
        .iter()
        .zip(labels)
        .map(|(x, &l)| {
            let y = if l == 1 { 1.0 } else { -1.0 };
            (1.0 - y * augmented_dot(weights, x)).max(0.0)
        })
        .sum();
    reg + hinge / samples.len() as f64
}

pub fn train_svm(samples: &[Vec<f64>], labels: &[u8], cfg: &SvmConfig) -> Result<LinearSvmModel> {
    fit(samples, labels, cfg, false).map(|(m, _)| m)
}

/// Like [`train_svm`] but also returns the primal objective at the end of
/// every epoch.
pub fn train_svm_traced(samples: &[Vec<f64>], labels: &[u8], cfg: &SvmConfig) -> Result<(LinearSvmModel, Vec<f64>)> {
    fit(samples, labels, cfg, true)
}

/// Pegasos: at update `t` the step is `1/(λt)`, the weights shrink by
/// `1 - 1/t`, and a margin violation adds `y x / (λt)`. The weight vector is
/// kept as `scale * v` so the shrink step costs O(1).
fn fit(samples: &[Vec<f64>], labels: &[u8], cfg: &SvmConfig, trace: bool) -> Result<(LinearSvmModel, Vec<f64>)> {
    if !(cfg.lambda > 0.0) || cfg.epochs == 0 {
        return Err(Error::Config("SVM needs lambda > 0 and at least one epoch".into()));
    }
    let d = check_training_set(samples, labels)?;
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::Degenerate(format!("all labels are {}", labels[0])));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut v = vec![0.0; d + 1];
    let mut scale = 1.0f64;
    let mut t = 0u64;
    let mut objectives = Vec::new();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (cfg.lambda * t as f64);
            let x = &samples[i];
            let y = if labels[i] == 1 { 1.0 } else { -1.0 };
            let margin = y * scale * augmented_dot(&v, x);

            let shrink = 1.0 - 1.0 / t as f64;
            if shrink == 0.0 {
                v.iter_mut().for_each(|w| *w = 0.0);
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                let step = eta * y / scale;
                for (w, xi) in v.iter_mut().zip(x) {
                    *w += step * xi;
                }
                v[d] += step;
            }
            if scale < 1e-150 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
        if trace {
            let w: Vec<f64> = v.iter().map(|w| w * scale).collect();
            objectives.push(svm_objective(&w, cfg.lambda, samples, labels));
        }
    }

    let weights: Vec<f64> = v.iter().map(|w| w * scale).collect();
    let model = LinearSvmModel {
        weights,
        config: cfg.clone(),
    };
    model.validate()?;
    Ok((model, objectives))
}
