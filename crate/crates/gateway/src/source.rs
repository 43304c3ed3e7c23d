//! Sample sources the session can pace through.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use emg_core::ingest::{CueSchedule, Recording, SampleSource, StreamClient, SynthConfig, SynthSession, WindowFetch};
use emg_core::pipeline::SampleWindow;

use crate::protocol::SourceDescriptor;

/// Samples kept by the stream client: 30 s at 4 kHz.
const STREAM_CAPACITY: usize = 120_000;

pub enum LiveSource {
    None,
    /// Finite random-access source with an optional cue schedule aligned to
    /// its sample 0.
    Stored {
        source: Arc<dyn SampleSource>,
        schedule: Option<CueSchedule>,
    },
    Stream(StreamClient),
}

#[derive(Debug)]
pub enum Fetch {
    Ready(SampleWindow),
    /// Not yet received; try again next tick.
    Pending,
    /// The source has no more samples.
    Ended,
}

impl LiveSource {
    pub fn open(desc: &SourceDescriptor) -> Result<Self, String> {
        match desc {
            SourceDescriptor::None => Ok(LiveSource::None),
            SourceDescriptor::Synth {
                seed,
                setup_seed,
                preset,
                cue_seed,
            } => {
                let schedule = CueSchedule::preset(*preset, *cue_seed).map_err(|e| e.to_string())?;
                let config = SynthConfig {
                    seed: *seed,
                    setup_seed: *setup_seed,
                    ..SynthConfig::default()
                };
                let session = SynthSession::new(config, schedule.clone()).map_err(|e| e.to_string())?;
                Ok(LiveSource::Stored {
                    source: Arc::new(session),
                    schedule: Some(schedule),
                })
            }
            SourceDescriptor::Recording { path, cues } => {
                let rec = Recording::read(Path::new(path)).map_err(|e| format!("{path}: {e}"))?;
                let schedule = match cues {
                    Some(c) => Some(CueSchedule::load(c).map_err(|e| format!("{c}: {e}"))?),
                    None => None,
                };
                Ok(LiveSource::Stored {
                    source: Arc::new(rec),
                    schedule,
                })
            }
            SourceDescriptor::Tcp { addr } => StreamClient::connect(addr.as_str(), STREAM_CAPACITY)
                .map(LiveSource::Stream)
                .map_err(|e| format!("{addr}: {e}")),
        }
    }

    pub fn sample_rate_hz(&self) -> Option<f64> {
        match self {
            LiveSource::None => None,
            LiveSource::Stored { source, .. } => Some(source.sample_rate_hz()),
            LiveSource::Stream(c) => Some(c.sample_rate_hz()),
        }
    }

    pub fn channel_count(&self) -> Option<usize> {
        match self {
            LiveSource::None => None,
            LiveSource::Stored { source, .. } => Some(source.channel_count()),
            LiveSource::Stream(c) => Some(c.channel_count()),
        }
    }

    pub fn schedule(&self) -> Option<&CueSchedule> {
        match self {
            LiveSource::Stored { schedule, .. } => schedule.as_ref(),
            _ => None,
        }
    }

    pub fn impedances(&self) -> Option<Vec<f64>> {
        match self {
            LiveSource::Stored { source, .. } => source.impedances().map(<[f64]>::to_vec),
            _ => None,
        }
    }

    /// Sample counter of the newest available sample (exclusive).
    pub fn live_edge(&self) -> u64 {
        match self {
            LiveSource::None => 0,
            LiveSource::Stored { .. } => 0,
            LiveSource::Stream(c) => c.latest(),
        }
    }

    /// The `n` samples ending just before sample `end`.
    pub fn window_ending_at(&self, end: u64, n: usize, wait: Duration) -> Result<Fetch, String> {
        match self {
            LiveSource::None => Ok(Fetch::Ended),
            LiveSource::Stored { source, .. } => {
                if end > source.len() {
                    return Ok(Fetch::Ended);
                }
                let start = end.checked_sub(n as u64).ok_or("window starts before the source")?;
                source.window(start, n).map(Fetch::Ready).map_err(|e| e.to_string())
            }
            LiveSource::Stream(c) => match c.wait_window(end, n, wait) {
                WindowFetch::Ready(w) => Ok(Fetch::Ready(w)),
                WindowFetch::NotYet => Ok(Fetch::Pending),
                WindowFetch::Ended => Ok(Fetch::Ended),
                WindowFetch::Unavailable => Err(format!("samples before {end} are no longer buffered")),
            },
        }
    }
}
