use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::window::RmsVector;

/// Lower bound applied to per-channel standard deviations so dead channels
/// normalize to zero instead of dividing by zero.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Per-channel z-score parameters fitted on training RMS windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Fits per-channel mean and population standard deviation.
pub fn fit_normalizer(training: &[RmsVector]) -> Result<Normalizer> {
    if training.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "normalizer needs at least 2 training windows, got {}",
            training.len()
        )));
    }
    let m = training[0].len();
    if let Some(bad) = training.iter().find(|v| v.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: bad.len(),
        });
    }
    let n = training.len() as f64;
    let mut mu = vec![0.0; m];
    for v in training {
        for (acc, x) in mu.iter_mut().zip(&v.0) {
            *acc += x;
        }
    }
    mu.iter_mut().for_each(|x| *x /= n);
    let mut var = vec![0.0; m];
    for v in training {
        for ((acc, x), mean) in var.iter_mut().zip(&v.0).zip(&mu) {
            *acc += (x - mean) * (x - mean);
        }
    }
    let sigma = var.into_iter().map(|v| (v / n).sqrt().max(SIGMA_FLOOR)).collect();
    Ok(Normalizer { mu, sigma })
}

impl Normalizer {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Elementwise `(x - mu) / sigma`.
    pub fn normalize(&self, rms: &RmsVector) -> Result<Vec<f64>> {
        if rms.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: rms.len(),
            });
        }
        Ok(rms
            .0
            .iter()
            .zip(self.mu.iter().zip(&self.sigma))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }
}
