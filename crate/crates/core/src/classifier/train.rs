use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::{Gesture, NUM_GESTURES};

use super::adam::{Adam, AdamConfig};
use super::evaluate::{evaluate, ConfusionMatrix};
use super::mlp::{batch_matrix, Mlp};
use super::split::{stratified_split, Split};

/// Pipeline-transformed feature vectors with their gesture labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Gesture>,
}

impl FeatureDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn push(&mut self, features: Vec<f64>, label: Gesture) {
        self.features.push(features);
        self.labels.push(label);
    }

    pub fn label_ids(&self) -> Vec<usize> {
        self.labels.iter().map(|g| g.id()).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> FeatureDataset {
        FeatureDataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            val_fraction: 0.16,
            test_fraction: 0.20,
            hidden: vec![512, 512],
            dropout: 0.2,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Mean minibatch loss per epoch (dropout active).
    pub train_loss: Vec<f64>,
    /// Inference-mode validation loss per epoch. Equals the training-set
    /// inference loss when the validation split is empty.
    pub val_loss: Vec<f64>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainingHistory {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch]
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Mlp,
    pub history: TrainingHistory,
    pub split: Split,
    /// Confusion matrix on the held-out test split (`None` if it is empty).
    pub test: Option<ConfusionMatrix>,
}

/// Stratified split, Adam training for `config.epochs`, and selection of the
/// epoch with the lowest validation loss.
pub fn train(dataset: &FeatureDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let split = split_for(&dataset.labels, config)?;
    train_with_split(dataset, split, config)
}

/// The stratified split [`train`] uses for these labels and config.
pub fn split_for(labels: &[Gesture], config: &TrainConfig) -> Result<Split> {
    let ids: Vec<usize> = labels.iter().map(|g| g.id()).collect();
    stratified_split(&ids, NUM_GESTURES, config.val_fraction, config.test_fraction, config.seed)
}

/// [`train`] with a caller-supplied partition of `dataset`.
pub fn train_with_split(dataset: &FeatureDataset, split: Split, config: &TrainConfig) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::InvalidParameter("epochs and batch size must be positive".into()));
    }
    let dim = dataset.dim();
    if let Some(bad) = dataset.features.iter().find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    if dataset.features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features"));
    }
    let labels = dataset.label_ids();
    if let Some(&bad) = split.train.iter().chain(&split.val).chain(&split.test).find(|&&i| i >= labels.len()) {
        return Err(Error::InvalidParameter(format!("split index {bad} out of range")));
    }
    for g in Gesture::ALL {
        if !split.train.iter().any(|&i| labels[i] == g.id()) {
            return Err(Error::MissingClass(g));
        }
    }

    let mut model = Mlp::new(dim, &config.hidden, NUM_GESTURES, config.dropout, config.seed)?;
    let shapes: Vec<usize> = model
        .layers
        .iter()
        .flat_map(|l| [l.weights.len(), l.bias.len()])
        .collect();
    let mut adam = Adam::new(config.adam, &shapes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_da7a);

    let columns = |idx: &[usize]| batch_matrix(dim, idx.iter().map(|&i| dataset.features[i].as_slice()));
    let select_labels = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();
    let monitor = if split.val.is_empty() { &split.train } else { &split.val };
    let monitor_x = columns(monitor);
    let monitor_y = select_labels(monitor);

    let mut history = TrainingHistory::default();
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut order = split.train.clone();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let x = columns(batch);
            let y = select_labels(batch);
            let (loss, grads) = model.loss_and_gradients(&x, &y, Some(&mut rng))?;
            epoch_loss += loss * batch.len() as f64;
            let mut params: Vec<&mut [f64]> = Vec::with_capacity(shapes.len());
            for layer in &mut model.layers {
                params.push(&mut layer.weights);
                params.push(&mut layer.bias);
            }
            let g: Vec<&[f64]> = grads
                .weights
                .iter()
                .zip(&grads.bias)
                .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
                .collect();
            adam.step(&mut params, &g);
        }
        let val = model.batch_loss(&monitor_x, &monitor_y)?;
        history.train_loss.push(epoch_loss / order.len() as f64);
        history.val_loss.push(val);
        if val < best_loss {
            best_loss = val;
            best = model.clone();
            history.best_epoch = epoch;
        }
    }
    if !best.is_finite() {
        return Err(Error::NonFinite("trained parameters"));
    }

    let test = if split.test.is_empty() {
        None
    } else {
        let test_set = dataset.subset(&split.test);
        Some(evaluate(&best, &test_set.features, &test_set.label_ids())?)
    };
    Ok(TrainOutcome {
        model: best,
        history,
        split,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Ten well-separated Gaussian clusters, `per_class` samples each.
    fn clusters(per_class: usize, dim: usize, seed: u64) -> FeatureDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ds = FeatureDataset::default();
        for g in Gesture::ALL {
            for _ in 0..per_class {
                let f = (0..dim)
                    .map(|d| if d == g.id() % dim { 4.0 } else { 0.0 } + rng.random_range(-0.3..0.3))
                    .map(|v| v * if g.id() >= dim { -1.0 } else { 1.0 })
                    .collect();
                ds.push(f, g);
            }
        }
        ds
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            epochs: 200,
            hidden: vec![32, 32],
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_toy_data_reaches_full_accuracy() {
        let ds = clusters(8, 5, 1);
        assert_eq!(ds.len(), 80);
        let out = train(&ds, &small_config()).unwrap();
        assert_eq!(out.test.unwrap().accuracy(), 1.0);
    }

    #[test]
    fn same_seed_same_parameters() {
        let ds = clusters(8, 5, 2);
        let cfg = TrainConfig {
            epochs: 20,
            ..small_config()
        };
        let a = train(&ds, &cfg).unwrap();
        let b = train(&ds, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn returned_model_has_minimum_validation_loss() {
        let ds = clusters(10, 5, 3);
        let cfg = TrainConfig {
            epochs: 40,
            ..small_config()
        };
        let out = train(&ds, &cfg).unwrap();
        let min = out.history.val_loss.iter().copied().fold(f64::INFINITY, f64::min);
        let val = ds.subset(&out.split.val);
        let x = batch_matrix(5, val.features.iter().map(Vec::as_slice));
        let recomputed = out.model.batch_loss(&x, &val.label_ids()).unwrap();
        assert!((recomputed - min).abs() < 1e-12);
        assert_eq!(out.history.best_val_loss(), min);
        assert_eq!(out.history.val_loss.len(), 40);
    }

    #[test]
    fn missing_class_is_rejected() {
        let mut ds = clusters(8, 5, 4);
        let keep: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] != Gesture::WristUp).collect();
        ds = ds.subset(&keep);
        match train(&ds, &small_config()) {
            Err(Error::MissingClass(g)) => assert_eq!(g, Gesture::WristUp),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(train(&FeatureDataset::default(), &small_config()), Err(Error::EmptyDataset)));
    }
}
