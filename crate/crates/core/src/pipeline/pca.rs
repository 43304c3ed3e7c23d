//! PCA through the SVD of the z-scored training matrix.
//!
//! The training matrix has channels as rows and windows as columns. It is not
//! re-centered: z-scoring already puts channel means at zero on the training
//! data, and inference applies the same uncentered projection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of principal components kept by default.
pub const DEFAULT_COMPONENTS: usize = 30;

/// The first K left-singular vectors of the training matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    input_dim: usize,
    k: usize,
    /// Column-major M x K.
    components: Vec<f64>,
    /// All singular values of the training matrix, descending.
    pub singular_values: Vec<f64>,
}

/// K-dimensional projection of a z-scored window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Fits a `k`-component basis to `z_matrix` (channels x samples).
pub fn fit_pca(z_matrix: &DMatrix<f64>, k: usize) -> Result<PcaBasis> {
    let (m, samples) = z_matrix.shape();
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(format!(
            "component count {k} must be in 1..={m}"
        )));
    }
    if samples < k {
        return Err(Error::InsufficientData(format!(
            "PCA with {k} components needs at least {k} samples, got {samples}"
        )));
    }
    if z_matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("PCA training matrix"));
    }

    let svd = z_matrix.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut components = Vec::with_capacity(m * k);
    for &col in order.iter().take(k) {
        let mut c: Vec<f64> = u.column(col).iter().copied().collect();
        // Sign convention: the largest-magnitude loading is positive.
        let pivot = c.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            c.iter_mut().for_each(|x| *x = -*x);
        }
        components.extend(c);
    }
    Ok(PcaBasis {
        input_dim: m,
        k,
        components,
        singular_values: order.iter().map(|&i| svd.singular_values[i]).collect(),
    })
}

impl PcaBasis {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Principal component `j` (length M).
    pub fn component(&self, j: usize) -> &[f64] {
        &self.components[j * self.input_dim..(j + 1) * self.input_dim]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.input_dim, self.k, &self.components)
    }

    /// Fraction of training energy captured by each kept component.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        self.singular_values
            .iter()
            .take(self.k)
            .map(|s| if total > 0.0 { s * s / total } else { 0.0 })
            .collect()
    }

    /// `y_j = z . u_j` for every kept component.
    pub fn project(&self, z: &[f64]) -> Result<FeatureVector> {
        if z.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: z.len(),
            });
        }
        Ok(FeatureVector(
            (0..self.k)
                .map(|j| self.component(j).iter().zip(z).map(|(u, x)| u * x).sum())
                .collect(),
        ))
    }
}

pub fn pca_project(basis: &PcaBasis, z: &[f64]) -> Result<FeatureVector> {
    basis.project(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn rank_one_component_is_parallel() {
        let v = [0.2, -0.5, 0.7, 0.1];
        let scales = [1.0, -2.0, 0.5, 3.0, 1.5];
        let a = DMatrix::from_fn(4, 5, |r, c| v[r] * scales[c]);
        let basis = fit_pca(&a, 1).unwrap();
        let norm_v: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cos: f64 = basis.component(0).iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / norm_v;
        assert!(cos.abs() > 1.0 - 1e-8);
    }

    #[test]
    fn components_are_orthonormal() {
        let basis = fit_pca(&random_matrix(12, 40, 1), 7).unwrap();
        let u = basis.matrix();
        let gram = u.transpose() * &u;
        for i in 0..7 {
            for j in 0..7 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn full_rank_projection_is_an_isometry() {
        let a = random_matrix(8, 100, 2);
        let basis = fit_pca(&a, 8).unwrap();
        let projected: Vec<Vec<f64>> = (0..100)
            .map(|c| basis.project(a.column(c).as_slice()).unwrap().0)
            .collect();
        // Gram matrices before and after projection agree.
        for i in (0..100).step_by(7) {
            for j in (0..100).step_by(11) {
                let before = a.column(i).dot(&a.column(j));
                let after: f64 = projected[i].iter().zip(&projected[j]).map(|(x, y)| x * y).sum();
                assert!((before - after).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn projection_of_a_component_is_a_unit_vector() {
        let basis = fit_pca(&random_matrix(6, 30, 3), 4).unwrap();
        let y = basis.project(basis.component(0)).unwrap();
        assert!((y.0[0] - 1.0).abs() < 1e-10);
        assert!(y.0[1..].iter().all(|x| x.abs() < 1e-10));
        assert!(basis.project(&[0.0; 6]).unwrap().0.iter().all(|&x| x == 0.0));
        assert!(basis.project(&[0.0; 5]).is_err());
    }

    #[test]
    fn low_rank_training_data_is_reconstructed() {
        let b = random_matrix(10, 3, 4);
        let c = random_matrix(3, 50, 5);
        let a = &b * &c;
        let basis = fit_pca(&a, 4).unwrap();
        let u = basis.matrix();
        let recon = &u * (u.transpose() * &a);
        assert!((recon - a).abs().max() < 1e-8);
    }

    #[test]
    fn parameter_errors() {
        let a = random_matrix(4, 10, 6);
        assert!(fit_pca(&a, 5).is_err());
        assert!(fit_pca(&a, 0).is_err());
        assert!(fit_pca(&random_matrix(4, 2, 7), 3).is_err());
    }

    #[test]
    fn explained_variance_is_sorted() {
        let basis = fit_pca(&random_matrix(10, 60, 8), 10).unwrap();
        let ev = basis.explained_variance_ratio();
        assert!(ev.windows(2).all(|w| w[0] >= w[1]));
        assert!((ev.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}
