//! The persisted model: fitted pipeline, network, label table and training
//! history in one versioned JSON document.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{
    evaluate, softmax, split_for, train_with_split, ConfusionMatrix, FeatureDataset, Mlp, Split, TrainConfig,
    TrainingHistory,
};
use crate::error::{Error, Result};
use crate::gesture::Gesture;
use crate::pipeline::{FittedPipeline, Preprocessor, RmsVector, SampleWindow, DEFAULT_COMPONENTS};

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BundleConfig {
    pub components: usize,
    pub train: TrainConfig,
}

impl Default for BundleConfig {
    fn default() -> Self {
        Self {
            components: DEFAULT_COMPONENTS,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub version: u32,
    pub pipeline: FittedPipeline,
    pub network: Mlp,
    /// Class names indexed by network output.
    pub labels: Vec<String>,
    pub config: BundleConfig,
    pub history: TrainingHistory,
    pub split: Split,
    /// Held-out test confusion matrix from training.
    pub test: Option<ConfusionMatrix>,
}

impl ModelBundle {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let r = BufReader::new(File::open(path)?);
        let bundle: ModelBundle = serde_json::from_reader(r)?;
        if bundle.version != BUNDLE_VERSION {
            return Err(Error::UnsupportedVersion(bundle.version));
        }
        Ok(bundle)
    }

    /// Class probabilities for one raw window.
    pub fn predict_proba(&self, window: &SampleWindow) -> Result<Vec<f64>> {
        let f = self.pipeline.features(window)?;
        Ok(softmax(&self.network.logits(&f.0)?))
    }

    pub fn predict_proba_rms(&self, rms: &RmsVector) -> Result<Vec<f64>> {
        let f = self.pipeline.features_from_rms(rms)?;
        Ok(softmax(&self.network.logits(&f.0)?))
    }

    pub fn features_from_rms(&self, rms: &[RmsVector]) -> Result<Vec<Vec<f64>>> {
        rms.iter()
            .map(|r| self.pipeline.features_from_rms(r).map(|f| f.0))
            .collect()
    }

    /// Confusion matrix over RMS windows with known labels.
    pub fn evaluate_rms(&self, rms: &[RmsVector], labels: &[Gesture]) -> Result<ConfusionMatrix> {
        let ids: Vec<usize> = labels.iter().map(|g| g.id()).collect();
        evaluate(&self.network, &self.features_from_rms(rms)?, &ids)
    }

    pub fn test_accuracy(&self) -> Option<f64> {
        self.test.as_ref().map(ConfusionMatrix::accuracy)
    }
}

/// Fits normalizer and PCA on the training split of `rms`, then trains the
/// network on the transformed features with the same split.
pub fn train_bundle(
    pre: Preprocessor,
    rms: &[RmsVector],
    labels: &[Gesture],
    config: &BundleConfig,
) -> Result<ModelBundle> {
    if rms.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if rms.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rms.len(),
            actual: labels.len(),
        });
    }
    let split = split_for(labels, &config.train)?;
    for g in Gesture::ALL {
        if !split.train.iter().any(|&i| labels[i] == g) {
            return Err(Error::MissingClass(g));
        }
    }
    let train_rms: Vec<RmsVector> = split.train.iter().map(|&i| rms[i].clone()).collect();
    let pipeline = FittedPipeline::fit(pre, &train_rms, config.components)?;
    let mut dataset = FeatureDataset::default();
    for (r, &g) in rms.iter().zip(labels) {
        dataset.push(pipeline.features_from_rms(r)?.0, g);
    }
    let outcome = train_with_split(&dataset, split, &config.train)?;
    Ok(ModelBundle {
        version: BUNDLE_VERSION,
        pipeline,
        network: outcome.model,
        labels: Gesture::label_table(),
        config: config.clone(),
        history: outcome.history,
        split: outcome.split,
        test: outcome.test,
    })
}

/// A fresh bundle trained only on new data, keeping the original channel
/// mask and filter. Normalizer, PCA basis and network are all refit.
pub fn recalibrate(
    previous: &ModelBundle,
    rms: &[RmsVector],
    labels: &[Gesture],
    config: &BundleConfig,
) -> Result<ModelBundle> {
    train_bundle(previous.pipeline.pre.clone(), rms, labels, config)
}
