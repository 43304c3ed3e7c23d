//! Mean RMS heatmaps and distance/similarity matrices between datasets.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::{Gesture, NUM_GESTURES};
use crate::pipeline::{ChannelMask, ElectrodeArray, RmsVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetTag {
    Initial,
    Recalibration,
}

impl DatasetTag {
    pub fn name(self) -> &'static str {
        match self {
            DatasetTag::Initial => "initial",
            DatasetTag::Recalibration => "recalibration",
        }
    }
}

/// Per-electrode values on the grid, row-major. Rejected electrodes hold 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub values: Vec<f64>,
    pub gesture: Gesture,
    pub dataset_tag: DatasetTag,
}

impl Heatmap {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.grid_cols + col]
    }

    /// Grid position of the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let i = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        (i / self.grid_cols, i % self.grid_cols)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("row");
        for c in 0..self.grid_cols {
            let _ = write!(s, ",col{c}");
        }
        s.push('\n');
        for r in 0..self.grid_rows {
            let _ = write!(s, "{r}");
            for c in 0..self.grid_cols {
                let _ = write!(s, ",{}", self.at(r, c));
            }
            s.push('\n');
        }
        s
    }
}

fn check_dataset(rms: &[RmsVector], labels: &[Gesture], mask: &ChannelMask) -> Result<()> {
    if rms.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rms.len(),
            actual: labels.len(),
        });
    }
    if let Some(r) = rms.iter().find(|r| r.len() != mask.count()) {
        return Err(Error::DimensionMismatch {
            expected: mask.count(),
            actual: r.len(),
        });
    }
    Ok(())
}

fn mean_of(rows: &[&[f64]], dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r.iter()) {
            *a += b;
        }
    }
    m.iter_mut().for_each(|x| *x /= rows.len() as f64);
    m
}

fn to_grid(values: &[f64], array: &ElectrodeArray, mask: &ChannelMask) -> Result<Vec<f64>> {
    if mask.channel_count() != array.channel_count {
        return Err(Error::DimensionMismatch {
            expected: array.channel_count,
            actual: mask.channel_count(),
        });
    }
    let mut grid = vec![0.0; array.grid_rows * array.grid_cols];
    for (v, ch) in values.iter().zip(mask.indices()) {
        let (r, c) = array
            .position(ch)
            .ok_or_else(|| Error::InvalidParameter(format!("channel {ch} outside the grid")))?;
        grid[r * array.grid_cols + c] = *v;
    }
    Ok(grid)
}

/// Per-electrode mean RMS over every window labeled `gesture`, on the grid.
pub fn mean_rms_heatmap(
    rms: &[RmsVector],
    labels: &[Gesture],
    gesture: Gesture,
    array: &ElectrodeArray,
    mask: &ChannelMask,
    dataset_tag: DatasetTag,
) -> Result<Heatmap> {
    check_dataset(rms, labels, mask)?;
    let rows: Vec<&[f64]> = rms
        .iter()
        .zip(labels)
        .filter(|(_, g)| **g == gesture)
        .map(|(r, _)| r.as_slice())
        .collect();
    if rows.is_empty() {
        return Err(Error::GestureAbsent(gesture));
    }
    Ok(Heatmap {
        grid_rows: array.grid_rows,
        grid_cols: array.grid_cols,
        values: to_grid(&mean_of(&rows, mask.count()), array, mask)?,
        gesture,
        dataset_tag,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Cosine,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Cosine similarity; a zero vector is similar only to itself.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub metric: Metric,
    pub labels: Vec<(Gesture, DatasetTag)>,
    pub values: Vec<Vec<f64>>,
}

impl PairwiseMatrix {
    /// Matrix of `metric` between every pair of vectors.
    pub fn from_vectors(metric: Metric, labels: Vec<(Gesture, DatasetTag)>, vectors: &[Vec<f64>]) -> Self {
        let n = vectors.len();
        let mut values = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = match metric {
                    Metric::Euclidean if i == j => 0.0,
                    Metric::Euclidean => euclidean(&vectors[i], &vectors[j]),
                    Metric::Cosine if i == j => 1.0,
                    Metric::Cosine => cosine(&vectors[i], &vectors[j]),
                };
                values[i][j] = v;
                values[j][i] = v;
            }
        }
        Self { metric, labels, values }
    }

    pub fn index_of(&self, gesture: Gesture, tag: DatasetTag) -> Option<usize> {
        self.labels.iter().position(|l| *l == (gesture, tag))
    }

    pub fn to_csv(&self) -> String {
        let name = |(g, t): &(Gesture, DatasetTag)| format!("{}/{}", t.name(), g.name());
        let mut s = String::from("label");
        for l in &self.labels {
            let _ = write!(s, ",{}", name(l));
        }
        s.push('\n');
        for (l, row) in self.labels.iter().zip(&self.values) {
            s.push_str(&name(l));
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

/// Distance or similarity between the per-gesture mean RMS patterns of two
/// datasets: 10 gestures of `a` followed by 10 gestures of `b`.
///
/// Each electrode is z-scored over the pooled windows of both datasets
/// before averaging.
pub fn pairwise_matrix(
    a: (&[RmsVector], &[Gesture]),
    b: (&[RmsVector], &[Gesture]),
    metric: Metric,
) -> Result<PairwiseMatrix> {
    let dim = a.0.first().or(b.0.first()).ok_or(Error::EmptyDataset)?.len();
    for (rms, labels) in [a, b] {
        if rms.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rms.len(),
                actual: labels.len(),
            });
        }
        if let Some(r) = rms.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.len(),
            });
        }
        for g in Gesture::ALL {
            if !labels.contains(&g) {
                return Err(Error::GestureAbsent(g));
            }
        }
    }
    let pooled: Vec<&[f64]> = a.0.iter().chain(b.0).map(RmsVector::as_slice).collect();
    let mean = mean_of(&pooled, dim);
    let sd: Vec<f64> = (0..dim)
        .map(|c| {
            let v = pooled.iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>() / pooled.len() as f64;
            v.sqrt().max(1e-12)
        })
        .collect();
    let mut labels = Vec::with_capacity(2 * NUM_GESTURES);
    let mut vectors = Vec::with_capacity(2 * NUM_GESTURES);
    for ((rms, ls), tag) in [(a, DatasetTag::Initial), (b, DatasetTag::Recalibration)] {
        for g in Gesture::ALL {
            let z: Vec<Vec<f64>> = rms
                .iter()
                .zip(ls)
                .filter(|(_, l)| **l == g)
                .map(|(r, _)| (0..dim).map(|c| (r.0[c] - mean[c]) / sd[c]).collect())
                .collect();
            let rows: Vec<&[f64]> = z.iter().map(Vec::as_slice).collect();
            vectors.push(mean_of(&rows, dim));
            labels.push((g, tag));
        }
    }
    Ok(PairwiseMatrix::from_vectors(metric, labels, &vectors))
}
