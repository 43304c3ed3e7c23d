//! Tick-paced decoding of a whole source.

use std::time::Duration;

use anyhow::{bail, Result};
use emg_core::bundle::ModelBundle;
use emg_core::decoder::{DecoderConfig, DecoderOutput, RealtimeDecoder};
use emg_core::ingest::{tick_window_end, WindowFetch};

use crate::input::DecodeSource;

/// Longest wait for streamed samples before giving up.
const STREAM_TIMEOUT: Duration = Duration::from_secs(10);

/// Decodes one window per tick until the source ends, handing each output to
/// `sink`. Ticks whose window fell into a stream gap are skipped. Returns the
/// number of ticks decoded.
pub fn run(
    bundle: &ModelBundle,
    source: &DecodeSource,
    config: DecoderConfig,
    mut sink: impl FnMut(&DecoderOutput) -> Result<()>,
) -> Result<u64> {
    let n = bundle.pipeline.pre.window_len;
    let rate = match source {
        DecodeSource::Stored(s) => s.sample_rate_hz(),
        DecodeSource::Stream(c) => c.sample_rate_hz(),
    };
    let tick_rate = config.tick_rate_hz;
    let mut decoder = RealtimeDecoder::new(config)?;
    let mut decoded = 0;
    for k in 0.. {
        let end = tick_window_end(k, n, rate, tick_rate);
        let window = match source {
            DecodeSource::Stored(s) => {
                if end > s.len() {
                    break;
                }
                s.window(end - n as u64, n)?
            }
            DecodeSource::Stream(c) => match c.wait_window(end, n, STREAM_TIMEOUT) {
                WindowFetch::Ready(w) => w,
                WindowFetch::Unavailable => continue,
                WindowFetch::Ended => break,
                WindowFetch::NotYet => match c.error() {
                    Some(e) => bail!("stream failed: {e}"),
                    None => bail!("no samples up to {end} within {STREAM_TIMEOUT:?}"),
                },
            },
        };
        sink(&decoder.decode_step(bundle, &window)?)?;
        decoded += 1;
    }
    Ok(decoded)
}
