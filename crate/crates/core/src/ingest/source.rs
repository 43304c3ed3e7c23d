use crate::error::{Error, Result};
use crate::pipeline::SampleWindow;

/// Random-access multi-channel sample storage.
///
/// Blocks are channel-major: channel `c` occupies `out[c·len..(c+1)·len]`.
pub trait SampleSource: Send + Sync {
    fn sample_rate_hz(&self) -> f64;

    fn channel_count(&self) -> usize;

    /// Samples per channel.
    fn len(&self) -> u64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fills `out` with samples `start..start + out.len()` of `channel`.
    fn read_channel(&self, channel: usize, start: u64, out: &mut [f32]) -> Result<()>;

    fn read_block(&self, start: u64, len: usize, out: &mut [f32]) -> Result<()> {
        let channels = self.channel_count();
        if out.len() != channels * len {
            return Err(Error::DimensionMismatch {
                expected: channels * len,
                actual: out.len(),
            });
        }
        for (c, chunk) in out.chunks_exact_mut(len.max(1)).enumerate().take(channels) {
            self.read_channel(c, start, &mut chunk[..len])?;
        }
        Ok(())
    }

    /// The `len`-sample window starting at sample `start`.
    fn window(&self, start: u64, len: usize) -> Result<SampleWindow> {
        let mut buf = vec![0.0f32; self.channel_count() * len];
        self.read_block(start, len, &mut buf)?;
        SampleWindow::from_f32(self.channel_count(), len, &buf, start as f64 / self.sample_rate_hz())
    }

    /// Per-channel electrode impedances in ohms, when known.
    fn impedances(&self) -> Option<&[f64]> {
        None
    }
}

pub(crate) fn check_range(source_len: u64, channels: usize, channel: usize, start: u64, len: usize) -> Result<()> {
    if channel >= channels {
        return Err(Error::InvalidParameter(format!("channel {channel} of {channels}")));
    }
    if start + len as u64 > source_len {
        return Err(Error::InsufficientData(format!(
            "samples {start}..{} requested from a source of {source_len}",
            start + len as u64
        )));
    }
    Ok(())
}
