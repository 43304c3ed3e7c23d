use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::channels::ChannelMask;

/// Default analysis window: 250 ms at 4 kHz.
pub const DEFAULT_WINDOW_LEN: usize = 1000;

/// A block of multi-channel samples, stored channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleWindow {
    channels: usize,
    len: usize,
    data: Vec<f64>,
    /// Time of the first sample, seconds since stream start.
    pub start_time: f64,
}

impl SampleWindow {
    /// Builds a window from channel-major data (`channels * len` values).
    pub fn from_channel_major(channels: usize, len: usize, data: Vec<f64>, start_time: f64) -> Result<Self> {
        if data.len() != channels * len {
            return Err(Error::DimensionMismatch {
                expected: channels * len,
                actual: data.len(),
            });
        }
        Ok(Self {
            channels,
            len,
            data,
            start_time,
        })
    }

    pub fn from_f32(channels: usize, len: usize, data: &[f32], start_time: f64) -> Result<Self> {
        Self::from_channel_major(channels, len, data.iter().map(|&x| x as f64).collect(), start_time)
    }

    /// Builds a window from per-channel sample vectors of equal length.
    pub fn from_channels(channels: &[Vec<f64>], start_time: f64) -> Result<Self> {
        let len = channels.first().map_or(0, Vec::len);
        if let Some(bad) = channels.iter().find(|c| c.len() != len) {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: bad.len(),
            });
        }
        Self::from_channel_major(channels.len(), len, channels.concat(), start_time)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Samples per channel (N).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        &self.data[ch * self.len..(ch + 1) * self.len]
    }

    pub fn channel_mut(&mut self, ch: usize) -> &mut [f64] {
        &mut self.data[ch * self.len..(ch + 1) * self.len]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Keeps only the channels the mask accepts.
    pub fn select(&self, mask: &ChannelMask) -> Result<SampleWindow> {
        if mask.channel_count() != self.channels {
            return Err(Error::DimensionMismatch {
                expected: mask.channel_count(),
                actual: self.channels,
            });
        }
        let idx = mask.indices();
        let mut data = Vec::with_capacity(idx.len() * self.len);
        for &ch in &idx {
            data.extend_from_slice(self.channel(ch));
        }
        Ok(SampleWindow {
            channels: idx.len(),
            len: self.len,
            data,
            start_time: self.start_time,
        })
    }

    pub fn scaled(&self, factor: f64) -> SampleWindow {
        SampleWindow {
            data: self.data.iter().map(|x| x * factor).collect(),
            ..self.clone()
        }
    }
}

/// Per-channel RMS of a window, in volts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsVector(pub Vec<f64>);

impl RmsVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Root-mean-square of every channel over the window.
pub fn window_rms(window: &SampleWindow) -> Result<RmsVector> {
    if window.is_empty() {
        return Err(Error::InvalidParameter("empty window".into()));
    }
    let n = window.len() as f64;
    let mut values = Vec::with_capacity(window.channels());
    for ch in 0..window.channels() {
        let sum_sq: f64 = window.channel(ch).iter().map(|x| x * x).sum();
        if !sum_sq.is_finite() {
            return Err(Error::NonFinite("window samples"));
        }
        values.push((sum_sq / n).sqrt());
    }
    Ok(RmsVector(values))
}
