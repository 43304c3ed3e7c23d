use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::Gesture;
use crate::pipeline::{Preprocessor, RmsVector};

use super::cues::CueSchedule;
use super::source::SampleSource;

/// A labeled window, referenced by position in its source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledWindow {
    pub start_sample: u64,
    pub len: usize,
    pub gesture: Gesture,
    pub cue_index: usize,
    /// Position of the window within its cue.
    pub window_index: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub recording_id: String,
    pub windows: Vec<LabeledWindow>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn labels(&self) -> Vec<Gesture> {
        self.windows.iter().map(|w| w.gesture).collect()
    }
}

/// Non-overlapping `n`-sample windows tiling the final `c′` seconds of every
/// non-discarded cue's hold, ending exactly at the hold end.
pub fn label_windows(
    source_len: u64,
    sample_rate_hz: f64,
    schedule: &CueSchedule,
    n: usize,
    recording_id: &str,
) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("window length must be positive".into()));
    }
    let per_cue = (schedule.timing.label_s * sample_rate_hz / n as f64 + 1e-9).floor() as usize;
    let mut windows = Vec::with_capacity(per_cue * schedule.len());
    for cue in &schedule.cues {
        let hold_end = (cue.hold_end_s * sample_rate_hz).round() as u64;
        if hold_end > source_len {
            return Err(Error::RecordingTooShort {
                cue: cue.index,
                gesture: cue.gesture,
            });
        }
        if cue.discarded {
            continue;
        }
        let first = hold_end
            .checked_sub((per_cue * n) as u64)
            .ok_or_else(|| Error::InvalidParameter(format!("cue {} starts before the recording", cue.index)))?;
        for w in 0..per_cue {
            windows.push(LabeledWindow {
                start_sample: first + (w * n) as u64,
                len: n,
                gesture: cue.gesture,
                cue_index: cue.index,
                window_index: w,
            });
        }
    }
    Ok(LabeledDataset {
        recording_id: recording_id.to_string(),
        windows,
    })
}

/// RMS vectors of every labeled window through `pre`.
pub fn rms_dataset(
    pre: &Preprocessor,
    source: &dyn SampleSource,
    dataset: &LabeledDataset,
) -> Result<(Vec<RmsVector>, Vec<Gesture>)> {
    let mut rms = Vec::with_capacity(dataset.len());
    for w in &dataset.windows {
        rms.push(pre.rms(&source.window(w.start_sample, w.len)?)?);
    }
    Ok((rms, dataset.labels()))
}
