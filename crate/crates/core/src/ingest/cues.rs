use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::Gesture;

pub const CUE_FORMAT_VERSION: u32 = 1;

/// Phase durations of one cue, in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CueTiming {
    /// Rest before the transition (a).
    pub rest_s: f64,
    /// Transition into the gesture (b).
    pub transition_s: f64,
    /// Hold (c).
    pub hold_s: f64,
    /// Final part of the hold used for labels (c′).
    pub label_s: f64,
    /// Return to rest (d).
    pub return_s: f64,
}

impl Default for CueTiming {
    fn default() -> Self {
        Self {
            rest_s: 0.5,
            transition_s: 1.0,
            hold_s: 3.0,
            label_s: 2.0,
            return_s: 1.0,
        }
    }
}

impl CueTiming {
    pub fn cue_duration_s(&self) -> f64 {
        self.rest_s + self.transition_s + self.hold_s + self.return_s
    }

    fn validate(&self) -> Result<()> {
        let all = [self.rest_s, self.transition_s, self.hold_s, self.label_s, self.return_s];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) || self.hold_s <= 0.0 || self.label_s > self.hold_s {
            return Err(Error::InvalidParameter(format!("cue timing {self:?}")));
        }
        Ok(())
    }
}

/// One cued gesture with absolute phase boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cue {
    pub index: usize,
    pub series: usize,
    pub gesture_id: usize,
    pub gesture: Gesture,
    pub start_s: f64,
    pub transition_start_s: f64,
    pub hold_start_s: f64,
    pub hold_end_s: f64,
    pub end_s: f64,
    #[serde(default)]
    pub discarded: bool,
}

impl Cue {
    /// Start of the labeled part of the hold.
    pub fn label_start_s(&self, timing: &CueTiming) -> f64 {
        self.hold_end_s - timing.label_s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CuePreset {
    /// Two series of five repetitions: 100 cues, 800 labeled windows.
    Initial,
    /// One series of five repetitions: 50 cues.
    Recalibration,
    /// One series of five repetitions with a 3.5 s hold, so at least 20
    /// decoder ticks at 6 Hz land inside every hold.
    Realtime,
}

impl FromStr for CuePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "initial" => Ok(CuePreset::Initial),
            "recalibration" => Ok(CuePreset::Recalibration),
            "realtime" | "rt" => Ok(CuePreset::Realtime),
            _ => Err(Error::InvalidParameter(format!("unknown cue preset '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CueSchedule {
    pub version: u32,
    pub seed: u64,
    pub timing: CueTiming,
    pub series: usize,
    pub reps_per_series: usize,
    /// Rest inserted between consecutive series.
    pub series_rest_s: f64,
    pub cues: Vec<Cue>,
}

/// Seeded schedule of `series` blocks, each containing every gesture
/// `reps_per_series` times in a random order.
pub fn build_cue_schedule(
    seed: u64,
    reps_per_series: usize,
    series: usize,
    timing: CueTiming,
    series_rest_s: f64,
) -> Result<CueSchedule> {
    if reps_per_series == 0 || series == 0 {
        return Err(Error::InvalidParameter("series and repetitions must be positive".into()));
    }
    timing.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cues = Vec::with_capacity(series * reps_per_series * Gesture::ALL.len());
    let mut t = 0.0;
    for s in 0..series {
        if s > 0 {
            t += series_rest_s;
        }
        let mut block: Vec<Gesture> = (0..reps_per_series).flat_map(|_| Gesture::ALL).collect();
        block.shuffle(&mut rng);
        for g in block {
            let transition_start_s = t + timing.rest_s;
            let hold_start_s = transition_start_s + timing.transition_s;
            let hold_end_s = hold_start_s + timing.hold_s;
            let end_s = hold_end_s + timing.return_s;
            cues.push(Cue {
                index: cues.len(),
                series: s,
                gesture_id: g.id(),
                gesture: g,
                start_s: t,
                transition_start_s,
                hold_start_s,
                hold_end_s,
                end_s,
                discarded: false,
            });
            t = end_s;
        }
    }
    Ok(CueSchedule {
        version: CUE_FORMAT_VERSION,
        seed,
        timing,
        series,
        reps_per_series,
        series_rest_s,
        cues,
    })
}

impl CueSchedule {
    pub fn preset(preset: CuePreset, seed: u64) -> Result<Self> {
        match preset {
            CuePreset::Initial => build_cue_schedule(seed, 5, 2, CueTiming::default(), 60.0),
            CuePreset::Recalibration => build_cue_schedule(seed, 5, 1, CueTiming::default(), 60.0),
            CuePreset::Realtime => build_cue_schedule(
                seed,
                5,
                1,
                CueTiming {
                    hold_s: 3.5,
                    ..CueTiming::default()
                },
                60.0,
            ),
        }
    }

    /// Schedule of explicitly listed gestures in one series.
    pub fn from_gestures(gestures: &[Gesture], timing: CueTiming, seed: u64) -> Result<Self> {
        let mut s = build_cue_schedule(seed, 1, 1, timing, 0.0)?;
        let mut t = 0.0;
        s.cues = gestures
            .iter()
            .enumerate()
            .map(|(index, &g)| {
                let cue = Cue {
                    index,
                    series: 0,
                    gesture_id: g.id(),
                    gesture: g,
                    start_s: t,
                    transition_start_s: t + timing.rest_s,
                    hold_start_s: t + timing.rest_s + timing.transition_s,
                    hold_end_s: t + timing.rest_s + timing.transition_s + timing.hold_s,
                    end_s: t + timing.cue_duration_s(),
                    discarded: false,
                };
                t = cue.end_s;
                cue
            })
            .collect();
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.cues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cues.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.cues.last().map_or(0.0, |c| c.end_s)
    }

    /// Total time spent in hold phases.
    pub fn hold_time_s(&self) -> f64 {
        self.cues.len() as f64 * self.timing.hold_s
    }

    /// The cue whose `[start_s, end_s)` contains `t`.
    pub fn cue_at(&self, t: f64) -> Option<&Cue> {
        let i = self.cues.partition_point(|c| c.start_s <= t);
        i.checked_sub(1).map(|i| &self.cues[i]).filter(|c| t < c.end_s)
    }

    pub fn count(&self, g: Gesture) -> usize {
        self.cues.iter().filter(|c| c.gesture == g).count()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let s: CueSchedule = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if s.version != CUE_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(s.version));
        }
        for c in &s.cues {
            if c.gesture.id() != c.gesture_id {
                return Err(Error::Malformed(format!(
                    "cue {} gesture_id {} does not match {}",
                    c.index, c.gesture_id, c.gesture
                )));
            }
        }
        Ok(s)
    }
}
