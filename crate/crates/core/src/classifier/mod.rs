//! Feedforward gesture classifier: K → 512 → 512 → 10 with ReLU hidden
//! units, inverted dropout, softmax output and cross-entropy loss, trained
//! with Adam and validation-loss model selection.

pub mod adam;
pub mod evaluate;
pub mod mlp;
pub mod split;
pub mod train;

pub use adam::{Adam, AdamConfig};
pub use evaluate::{evaluate, ConfusionMatrix};
pub use mlp::{Dense, Gradients, Mlp};
pub use split::{stratified_split, Split};
pub use train::{split_for, train, train_with_split, FeatureDataset, TrainConfig, TrainOutcome, TrainingHistory};

use crate::error::{Error, Result};

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `ln Σ exp(s)`, computed without overflow.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

/// `-ln softmax(logits)[class]` in the log domain.
pub fn cross_entropy(logits: &[f64], class: usize) -> Result<f64> {
    if class >= logits.len() {
        return Err(Error::InvalidParameter(format!(
            "class {class} out of range for {} logits",
            logits.len()
        )));
    }
    Ok((log_sum_exp(logits) - logits[class]).max(0.0))
}

/// Gradient of [`cross_entropy`] with respect to the logits.
pub fn cross_entropy_grad(logits: &[f64], class: usize) -> Vec<f64> {
    let mut g = softmax(logits);
    g[class] -= 1.0;
    g
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits() {
        let p = softmax(&[0.7; 10]);
        assert!(p.iter().all(|x| (x - 0.1).abs() < 1e-15));
        assert!((cross_entropy(&[0.0; 10], 4).unwrap() - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_softmax() {
        let mut s = [0.0; 10];
        s[0] = 3f64.ln();
        let p = softmax(&s);
        assert!((p[0] - 0.25).abs() < 1e-15);
        assert!(p[1..].iter().all(|x| (x - 1.0 / 12.0).abs() < 1e-15));
    }

    #[test]
    fn confident_correct_class_has_zero_loss() {
        let mut s = [0.0; 10];
        s[2] = 800.0;
        assert_eq!(cross_entropy(&s, 2).unwrap(), 0.0);
        assert!(cross_entropy(&s, 3).unwrap() > 700.0);
        assert!(cross_entropy(&s, 10).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let s = [0.3, -1.2, 2.0, 0.0, 0.5, -0.4, 1.1, 0.9, -2.2, 0.05];
        let g = cross_entropy_grad(&s, 6);
        let h = 1e-6;
        for i in 0..10 {
            let mut up = s;
            let mut down = s;
            up[i] += h;
            down[i] -= h;
            let num = (cross_entropy(&up, 6).unwrap() - cross_entropy(&down, 6).unwrap()) / (2.0 * h);
            assert!((num - g[i]).abs() / num.abs().max(g[i].abs()).max(1e-8) < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            s in proptest::collection::vec(-50.0f64..50.0, 10),
            c in -1e3f64..1e3,
        ) {
            let p = softmax(&s);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|x| *x >= 0.0 && *x <= 1.0));
            let shifted: Vec<f64> = s.iter().map(|x| x + c).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
