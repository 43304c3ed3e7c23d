use nalgebra::{DMatrix, DMatrixView, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{cross_entropy, log_sum_exp, softmax};

/// Fully connected layer. `weights` is `outputs × inputs`, column-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// He-uniform weights, zero biases.
    pub fn he_uniform<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    pub fn w(&self) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.weights, self.outputs, self.inputs)
    }

    /// `W·x + b` for every column of `x`.
    fn affine(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = self.w() * x;
        for mut col in z.column_iter_mut() {
            for (v, b) in col.iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        z
    }
}

/// Parameter gradients laid out like [`Mlp::layers`].
#[derive(Clone, Debug)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

/// Multilayer perceptron with ReLU hidden layers and linear output logits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub dropout_rate: f64,
    pub seed: u64,
}

struct Cache {
    /// Input to each layer (post-dropout for hidden layers).
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<DMatrix<f64>>,
    /// Inverted-dropout multipliers applied after each hidden layer.
    masks: Vec<Option<DMatrix<f64>>>,
    logits: DMatrix<f64>,
}

impl Mlp {
    /// Network with widths `input → hidden… → outputs`, He-uniform initialized
    /// from `seed`.
    pub fn new(input: usize, hidden: &[usize], outputs: usize, dropout_rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidParameter(format!("dropout rate {dropout_rate} not in [0, 1)")));
        }
        if input == 0 || outputs == 0 || hidden.contains(&0) {
            return Err(Error::InvalidParameter("layer widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(outputs);
        let layers = widths
            .windows(2)
            .map(|w| Dense::he_uniform(w[0], w[1], &mut rng))
            .collect();
        Ok(Self {
            layers,
            dropout_rate,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Logits for one feature vector. Dropout is applied only when `dropout`
    /// supplies a random source.
    pub fn forward<R: Rng>(&self, features: &[f64], dropout: Option<&mut R>) -> Result<Vec<f64>> {
        self.check_dim(features.len())?;
        let x = DMatrix::from_column_slice(features.len(), 1, features);
        Ok(self.forward_batch(&x, dropout).logits.column(0).iter().copied().collect())
    }

    /// Inference-mode logits.
    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.forward::<ChaCha8Rng>(features, None)
    }

    /// Inference-mode class probabilities.
    pub fn predict_proba(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(features)?))
    }

    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        Ok(super::argmax(&self.logits(features)?))
    }

    /// Mean cross-entropy over a batch whose columns are samples.
    pub fn batch_loss(&self, x: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
        self.check_dim(x.nrows())?;
        let logits = self.forward_batch::<ChaCha8Rng>(x, None).logits;
        let mut total = 0.0;
        for (col, &y) in logits.column_iter().zip(labels) {
            let s: Vec<f64> = col.iter().copied().collect();
            total += cross_entropy(&s, y)?;
        }
        Ok(total / labels.len() as f64)
    }

    /// Mean cross-entropy and its gradient for a batch (columns are samples).
    pub fn loss_and_gradients<R: Rng>(
        &self,
        x: &DMatrix<f64>,
        labels: &[usize],
        dropout: Option<&mut R>,
    ) -> Result<(f64, Gradients)> {
        self.check_dim(x.nrows())?;
        if x.ncols() != labels.len() || labels.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.output_dim()) {
            return Err(Error::InvalidParameter(format!("label {bad} out of range")));
        }
        let cache = self.forward_batch(x, dropout);
        let batch = labels.len() as f64;

        let mut loss = 0.0;
        let mut delta = DMatrix::zeros(self.output_dim(), labels.len());
        for (j, &y) in labels.iter().enumerate() {
            let s: Vec<f64> = cache.logits.column(j).iter().copied().collect();
            loss += log_sum_exp(&s) - s[y];
            let p = softmax(&s);
            for (i, pi) in p.into_iter().enumerate() {
                delta[(i, j)] = (pi - if i == y { 1.0 } else { 0.0 }) / batch;
            }
        }

        let n = self.layers.len();
        let mut gw = vec![Vec::new(); n];
        let mut gb = vec![Vec::new(); n];
        for l in (0..n).rev() {
            let input = &cache.inputs[l];
            gw[l] = (&delta * input.transpose()).as_slice().to_vec();
            gb[l] = delta.column_sum().as_slice().to_vec();
            if l == 0 {
                break;
            }
            let mut upstream = self.layers[l].w().transpose() * &delta;
            if let Some(mask) = &cache.masks[l - 1] {
                upstream.component_mul_assign(mask);
            }
            upstream.zip_apply(&cache.pre[l - 1], |g, z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
            delta = upstream;
        }
        Ok((
            loss / batch,
            Gradients {
                weights: gw,
                bias: gb,
            },
        ))
    }

    fn forward_batch<R: Rng>(&self, x: &DMatrix<f64>, mut dropout: Option<&mut R>) -> Cache {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n - 1);
        let mut masks = Vec::with_capacity(n - 1);
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(&a);
            inputs.push(a);
            if l == n - 1 {
                return Cache {
                    inputs,
                    pre,
                    masks,
                    logits: z,
                };
            }
            let mut h = z.map(|v| v.max(0.0));
            let mask = match dropout.as_deref_mut() {
                Some(rng) if self.dropout_rate > 0.0 => {
                    let keep = 1.0 - self.dropout_rate;
                    let m = DMatrix::from_fn(h.nrows(), h.ncols(), |_, _| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    h.component_mul_assign(&m);
                    Some(m)
                }
                _ => None,
            };
            pre.push(z);
            masks.push(mask);
            a = h;
        }
        unreachable!("network has at least one layer")
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: got,
            });
        }
        Ok(())
    }
}

/// Columns-as-samples matrix from a list of feature vectors.
pub fn batch_matrix<'a, I>(dim: usize, rows: I) -> DMatrix<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let cols: Vec<DVector<f64>> = rows.into_iter().map(DVector::from_column_slice).collect();
    if cols.is_empty() {
        return DMatrix::zeros(dim, 0);
    }
    DMatrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_batch(k: usize, n: usize, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(k, n, |_, _| rng.random_range(-2.0..2.0));
        let y = (0..n).map(|_| rng.random_range(0..10)).collect();
        (x, y)
    }

    fn param_mut(m: &mut Mlp, layer: usize, is_bias: bool, i: usize) -> &mut f64 {
        if is_bias {
            &mut m.layers[layer].bias[i]
        } else {
            &mut m.layers[layer].weights[i]
        }
    }

    fn max_relative_error(model: &Mlp, x: &DMatrix<f64>, y: &[usize]) -> f64 {
        let (_, grads) = model.loss_and_gradients::<ChaCha8Rng>(x, y, None).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        let mut probe = model.clone();
        for l in 0..model.layers.len() {
            for (is_bias, analytic) in [(false, &grads.weights[l]), (true, &grads.bias[l])] {
                for i in 0..analytic.len() {
                    let orig = *param_mut(&mut probe, l, is_bias, i);
                    *param_mut(&mut probe, l, is_bias, i) = orig + h;
                    let up = probe.batch_loss(x, y).unwrap();
                    *param_mut(&mut probe, l, is_bias, i) = orig - h;
                    let down = probe.batch_loss(x, y).unwrap();
                    *param_mut(&mut probe, l, is_bias, i) = orig;
                    let numeric = (up - down) / (2.0 * h);
                    let a = analytic[i];
                    let denom = a.abs().max(numeric.abs()).max(1e-7);
                    worst = worst.max((a - numeric).abs() / denom);
                }
            }
        }
        worst
    }

    #[test]
    fn gradient_check_reduced_network() {
        let model = Mlp::new(5, &[8, 8], 10, 0.2, 11).unwrap();
        let (x, y) = random_batch(5, 7, 3);
        let err = max_relative_error(&model, &x, &y);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn zero_network_is_uniform() {
        let mut model = Mlp::new(4, &[6, 6], 10, 0.2, 0).unwrap();
        for l in &mut model.layers {
            *l = Dense::zeros(l.inputs, l.outputs);
        }
        let logits = model.logits(&[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert!(logits.iter().all(|&v| v == 0.0));
        assert!(model.predict_proba(&[0.0; 4]).unwrap().iter().all(|p| (p - 0.1).abs() < 1e-15));
    }

    #[test]
    fn inference_is_deterministic() {
        let model = Mlp::new(30, &[512, 512], 10, 0.2, 5).unwrap();
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        assert_eq!(model.logits(&x).unwrap(), model.logits(&x).unwrap());
        assert!(model.logits(&x[..29]).is_err());
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        // Positive inputs and weights keep every ReLU in its linear region, so
        // the dropout expectation is exactly the inference output.
        let mut model = Mlp::new(3, &[6, 6], 10, 0.2, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for l in &mut model.layers {
            l.weights.iter_mut().for_each(|w| *w = rng.random_range(0.1..1.0));
            l.bias.iter_mut().for_each(|b| *b = rng.random_range(0.0..0.5));
        }
        let x = [0.4, 1.3, 0.8];
        let reference = model.logits(&x).unwrap();
        let draws = 10_000;
        let mut mean = vec![0.0; 10];
        for _ in 0..draws {
            for (m, v) in mean.iter_mut().zip(model.forward(&x, Some(&mut rng)).unwrap()) {
                *m += v / draws as f64;
            }
        }
        for (m, r) in mean.iter().zip(&reference) {
            assert!((m - r).abs() / r.abs() < 0.02, "{m} vs {r}");
        }
    }

    #[test]
    fn same_seed_same_initialization() {
        let a = Mlp::new(30, &[16, 16], 10, 0.2, 77).unwrap();
        let b = Mlp::new(30, &[16, 16], 10, 0.2, 77).unwrap();
        let c = Mlp::new(30, &[16, 16], 10, 0.2, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.parameter_count(), 30 * 16 + 16 + 16 * 16 + 16 + 16 * 10 + 10);
    }

    #[test]
    fn rejects_bad_labels_and_rates() {
        let model = Mlp::new(2, &[3], 10, 0.0, 0).unwrap();
        let x = DMatrix::zeros(2, 1);
        assert!(model.loss_and_gradients::<ChaCha8Rng>(&x, &[10], None).is_err());
        assert!(Mlp::new(2, &[3], 10, 1.0, 0).is_err());
    }
}
