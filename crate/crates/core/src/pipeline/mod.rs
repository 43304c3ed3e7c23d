//! Raw multi-channel EMG to K-dimensional feature vectors.
//!
//! Stages: channel rejection, 4th-order 120 Hz Butterworth high-pass, per
//! channel RMS over the window, z-score, PCA projection.
//!
//! Every window is filtered independently from a zeroed filter state, so a
//! window's features depend only on its own N samples. Offline labeling and
//! live decoding therefore see identical features for the same samples.
//!
//! The RMS stage squares each sample before averaging (standard RMS).

pub mod channels;
pub mod filter;
pub mod normalize;
pub mod pca;
pub mod window;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use channels::{reject_channels, ChannelMask, ElectrodeArray, DEFAULT_IMPEDANCE_THRESHOLD_OHMS};
pub use filter::{design_highpass, filter_step, Biquad, FilterSpec, FilterState};
pub use normalize::{fit_normalizer, Normalizer};
pub use pca::{fit_pca, pca_project, FeatureVector, PcaBasis, DEFAULT_COMPONENTS};
pub use window::{window_rms, RmsVector, SampleWindow, DEFAULT_WINDOW_LEN};

use crate::error::{Error, Result};

pub const DEFAULT_FILTER_ORDER: usize = 4;
pub const DEFAULT_CUTOFF_HZ: f64 = 120.0;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 4000.0;

/// The unfitted front half of the pipeline: channel selection, filtering, RMS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub mask: ChannelMask,
    pub filter: FilterSpec,
    pub window_len: usize,
}

impl Preprocessor {
    pub fn new(mask: ChannelMask, filter: FilterSpec, window_len: usize) -> Self {
        Self {
            mask,
            filter,
            window_len,
        }
    }

    /// Standard configuration for `mask` at `sample_rate_hz`.
    pub fn standard(mask: ChannelMask, sample_rate_hz: f64) -> Result<Self> {
        Ok(Self::new(
            mask,
            design_highpass(DEFAULT_FILTER_ORDER, DEFAULT_CUTOFF_HZ, sample_rate_hz)?,
            DEFAULT_WINDOW_LEN,
        ))
    }

    /// Accepted channels of `raw`, each high-pass filtered from a zero state.
    pub fn filtered(&self, raw: &SampleWindow) -> Result<SampleWindow> {
        if raw.data().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("raw window"));
        }
        let mut w = raw.select(&self.mask)?;
        for ch in 0..w.channels() {
            self.filter.filter_in_place(w.channel_mut(ch));
        }
        Ok(w)
    }

    pub fn rms(&self, raw: &SampleWindow) -> Result<RmsVector> {
        if raw.len() != self.window_len {
            return Err(Error::DimensionMismatch {
                expected: self.window_len,
                actual: raw.len(),
            });
        }
        window_rms(&self.filtered(raw)?)
    }
}

/// A pipeline with its normalizer and PCA basis fitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub pre: Preprocessor,
    pub normalizer: Normalizer,
    pub basis: PcaBasis,
}

impl FittedPipeline {
    /// Fits the normalizer and a `k`-component basis on training RMS windows.
    pub fn fit(pre: Preprocessor, training_rms: &[RmsVector], k: usize) -> Result<Self> {
        let normalizer = fit_normalizer(training_rms)?;
        let m = normalizer.dim();
        if m != pre.mask.count() {
            return Err(Error::DimensionMismatch {
                expected: pre.mask.count(),
                actual: m,
            });
        }
        let mut z = DMatrix::zeros(m, training_rms.len());
        for (col, rms) in training_rms.iter().enumerate() {
            z.set_column(col, &nalgebra::DVector::from_vec(normalizer.normalize(rms)?));
        }
        let basis = fit_pca(&z, k)?;
        Ok(Self {
            pre,
            normalizer,
            basis,
        })
    }

    pub fn k(&self) -> usize {
        self.basis.k()
    }

    pub fn features_from_rms(&self, rms: &RmsVector) -> Result<FeatureVector> {
        self.basis.project(&self.normalizer.normalize(rms)?)
    }

    /// Full pipeline on one raw window (all recorded channels).
    pub fn features(&self, raw: &SampleWindow) -> Result<FeatureVector> {
        self.features_from_rms(&self.pre.rms(raw)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_window(channels: usize, len: usize, seed: u64) -> SampleWindow {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..channels * len).map(|_| rng.random_range(-1e-4..1e-4)).collect();
        SampleWindow::from_channel_major(channels, len, data, 0.0).unwrap()
    }

    #[test]
    fn rms_is_scale_equivariant() {
        let pre = Preprocessor::standard(ChannelMask::all(4), 4000.0).unwrap();
        let w = noise_window(4, 1000, 1);
        let base = pre.rms(&w).unwrap();
        for c in [-3.0, 0.5, 7.0] {
            let scaled = pre.rms(&w.scaled(c)).unwrap();
            for (a, b) in scaled.0.iter().zip(&base.0) {
                assert!((a - c.abs() * b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn filtering_is_window_local_and_matches_streaming() {
        let pre = Preprocessor::standard(ChannelMask::all(3), 4000.0).unwrap();
        let w = noise_window(3, 1000, 2);
        let batch = pre.filtered(&w).unwrap();
        let mut state = FilterState::new(&pre.filter, 3);
        for i in 0..1000 {
            let frame: Vec<f64> = (0..3).map(|c| w.channel(c)[i]).collect();
            let out = filter_step(&pre.filter, &mut state, &frame).unwrap();
            for c in 0..3 {
                assert!((out[c] - batch.channel(c)[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fitted_pipeline_is_deterministic() {
        let pre = Preprocessor::standard(ChannelMask::all(6), 4000.0).unwrap();
        let rms: Vec<RmsVector> = (0..20).map(|s| pre.rms(&noise_window(6, 1000, s)).unwrap()).collect();
        let a = FittedPipeline::fit(pre.clone(), &rms, 4).unwrap();
        let b = FittedPipeline::fit(pre, &rms, 4).unwrap();
        assert_eq!(a, b);
        let w = noise_window(6, 1000, 99);
        assert_eq!(a.features(&w).unwrap(), b.features(&w).unwrap());
        assert_eq!(a.features(&w).unwrap().len(), 4);
    }

    #[test]
    fn wrong_window_length_is_rejected() {
        let pre = Preprocessor::standard(ChannelMask::all(2), 4000.0).unwrap();
        assert!(pre.rms(&noise_window(2, 999, 0)).is_err());
    }
}
