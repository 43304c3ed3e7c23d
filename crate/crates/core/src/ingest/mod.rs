//! Signal sources and ground truth: cue schedules, recording files, synthetic
//! EMG, labeled windows and the TCP sample stream.

pub mod cues;
pub mod labels;
pub mod recording;
pub mod source;
pub mod stream;
pub mod synth;

pub use cues::{build_cue_schedule, Cue, CuePreset, CueSchedule, CueTiming};
pub use labels::{label_windows, rms_dataset, LabeledDataset, LabeledWindow};
pub use recording::{read_recording, write_recording, Recording};
pub use source::SampleSource;
pub use stream::{
    tick_window_end, Frame, GapEvent, ReplayOptions, ReplayServer, ReplayStats, StreamClient, WindowFetch,
};
pub use synth::{default_templates, gain_drift, Blob, GestureTemplate, SynthConfig, SynthSession};
