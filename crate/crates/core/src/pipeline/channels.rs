//! Electrode grid geometry and impedance-based channel rejection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Impedance above which an electrode is ignored, in ohms.
pub const DEFAULT_IMPEDANCE_THRESHOLD_OHMS: f64 = 500e3;

/// Geometry of the electrode array. Channels are numbered row-major over the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeArray {
    pub channel_count: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Inter-electrode spacing (tangential, axial) in millimetres.
    pub inter_electrode_mm: (f64, f64),
}

impl Default for ElectrodeArray {
    fn default() -> Self {
        Self {
            channel_count: 64,
            grid_rows: 8,
            grid_cols: 8,
            inter_electrode_mm: (10.0, 15.0),
        }
    }
}

impl ElectrodeArray {
    pub fn grid(rows: usize, cols: usize) -> Self {
        Self {
            channel_count: rows * cols,
            grid_rows: rows,
            grid_cols: cols,
            ..Self::default()
        }
    }

    /// Grid (row, col) of a channel.
    pub fn position(&self, channel: usize) -> Option<(usize, usize)> {
        (channel < self.channel_count).then(|| (channel / self.grid_cols, channel % self.grid_cols))
    }

    pub fn channel_at(&self, row: usize, col: usize) -> Option<usize> {
        (row < self.grid_rows && col < self.grid_cols).then(|| row * self.grid_cols + col)
    }
}

/// Which recorded channels take part in decoding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelMask {
    accepted: Vec<bool>,
}

impl ChannelMask {
    /// Mask accepting every one of `channel_count` channels.
    pub fn all(channel_count: usize) -> Self {
        Self {
            accepted: vec![true; channel_count],
        }
    }

    pub fn from_accepted(accepted: Vec<bool>) -> Result<Self> {
        if !accepted.iter().any(|&a| a) {
            return Err(Error::NoUsableChannels);
        }
        Ok(Self { accepted })
    }

    pub fn accepted(&self) -> &[bool] {
        &self.accepted
    }

    /// Number of recorded channels the mask refers to.
    pub fn channel_count(&self) -> usize {
        self.accepted.len()
    }

    /// Number of accepted channels (M).
    pub fn count(&self) -> usize {
        self.accepted.iter().filter(|&&a| a).count()
    }

    /// Indices of accepted channels in ascending order.
    pub fn indices(&self) -> Vec<usize> {
        self.accepted
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
            .collect()
    }
}

/// Accepts a channel iff its impedance is at most `threshold_ohms`.
pub fn reject_channels(impedances: &[f64], threshold_ohms: f64) -> Result<ChannelMask> {
    if !(threshold_ohms > 0.0) || !threshold_ohms.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "impedance threshold must be positive, got {threshold_ohms}"
        )));
    }
    if let Some(bad) = impedances.iter().find(|z| !z.is_finite() || **z < 0.0) {
        return Err(Error::InvalidParameter(format!("invalid impedance {bad}")));
    }
    ChannelMask::from_accepted(impedances.iter().map(|&z| z <= threshold_ohms).collect())
}
