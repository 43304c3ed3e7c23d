//! Per-cue accuracy of tick-paced classifier predictions over a session.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::bundle::ModelBundle;
use crate::classifier::argmax;
use crate::decoder::DEFAULT_TICK_RATE_HZ;
use crate::error::{Error, Result};
use crate::gesture::Gesture;
use crate::ingest::{tick_window_end, CueSchedule, SampleSource, StreamClient, WindowFetch};
use crate::pipeline::{SampleWindow, DEFAULT_WINDOW_LEN};

use super::snr::median_sorted;
use super::stats::{linear_trend, LinearFit};

/// Fewest predictions a hold should yield.
pub const MIN_PREDICTIONS_PER_HOLD: usize = 20;

/// Produces the classifier's label for one tick's window.
pub trait TickPredictor {
    fn predict(&mut self, window: &SampleWindow, end_sample: u64) -> Result<Gesture>;
}

impl<F> TickPredictor for F
where
    F: FnMut(&SampleWindow, u64) -> Result<Gesture>,
{
    fn predict(&mut self, window: &SampleWindow, end_sample: u64) -> Result<Gesture> {
        self(window, end_sample)
    }
}

/// Raw (pre-vote) classifier output of a model bundle.
pub struct BundlePredictor<'a>(pub &'a ModelBundle);

impl TickPredictor for BundlePredictor<'_> {
    fn predict(&mut self, window: &SampleWindow, _end_sample: u64) -> Result<Gesture> {
        let p = self.0.predict_proba(window)?;
        Ok(Gesture::from_id(argmax(&p)).expect("10-way output"))
    }
}

/// Windows by the sample counter they end at.
pub trait TickWindows {
    fn sample_rate_hz(&self) -> f64;
    fn fetch(&mut self, end: u64, len: usize) -> Result<WindowFetch>;
}

/// Windows cut directly from an offline source.
pub struct SourceWindows<'a>(pub &'a dyn SampleSource);

impl TickWindows for SourceWindows<'_> {
    fn sample_rate_hz(&self) -> f64 {
        self.0.sample_rate_hz()
    }

    fn fetch(&mut self, end: u64, len: usize) -> Result<WindowFetch> {
        if end > self.0.len() {
            return Ok(WindowFetch::Ended);
        }
        match end.checked_sub(len as u64) {
            Some(start) => Ok(WindowFetch::Ready(self.0.window(start, len)?)),
            None => Ok(WindowFetch::Unavailable),
        }
    }
}

/// Windows from a live or replayed stream, waiting up to `timeout` for each.
pub struct StreamWindows<'a> {
    pub client: &'a StreamClient,
    pub timeout: Duration,
}

impl TickWindows for StreamWindows<'_> {
    fn sample_rate_hz(&self) -> f64 {
        self.client.sample_rate_hz()
    }

    fn fetch(&mut self, end: u64, len: usize) -> Result<WindowFetch> {
        match self.client.wait_window(end, len, self.timeout) {
            WindowFetch::NotYet => Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::TimedOut,
                format!("no samples up to {end} within {:?}", self.timeout),
            ))),
            other => Ok(other),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub tick_rate_hz: f64,
    pub window_len: usize,
    pub min_predictions: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            tick_rate_hz: DEFAULT_TICK_RATE_HZ,
            window_len: DEFAULT_WINDOW_LEN,
            min_predictions: MIN_PREDICTIONS_PER_HOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CueAccuracy {
    pub cue_index: usize,
    pub gesture: Gesture,
    pub predictions: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Fewer predictions than the configured minimum.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealtimeReport {
    pub cues: Vec<CueAccuracy>,
    pub mean_accuracy: f64,
    pub median_accuracy: f64,
    /// Least-squares line of accuracy against the 1-based cue number.
    pub trend: Option<LinearFit>,
    pub ticks: u64,
    /// Ticks whose window straddled a stream gap.
    pub skipped_ticks: u64,
}

/// Runs `predictor` at every tick whose window ends inside a hold and scores
/// the predictions against the cued gesture.
///
/// Tick `k`'s window ends at sample `window_len + round(k · rate / tick_rate)`;
/// a tick belongs to a cue when that end falls in `(hold_start, hold_end]`.
pub fn realtime_accuracy(
    predictor: &mut dyn TickPredictor,
    windows: &mut dyn TickWindows,
    schedule: &CueSchedule,
    config: &HarnessConfig,
) -> Result<RealtimeReport> {
    if !(config.tick_rate_hz > 0.0) || config.window_len == 0 {
        return Err(Error::InvalidParameter("tick rate and window length must be positive".into()));
    }
    let rate = windows.sample_rate_hz();
    let cues: Vec<_> = schedule.cues.iter().filter(|c| !c.discarded).collect();
    let mut tallies: Vec<(usize, usize)> = vec![(0, 0); cues.len()];
    let last_end = cues.iter().map(|c| (c.hold_end_s * rate).round() as u64).max().unwrap_or(0);
    let (mut ticks, mut skipped) = (0u64, 0u64);
    let mut ci = 0;
    for k in 0.. {
        let end = tick_window_end(k, config.window_len, rate, config.tick_rate_hz);
        if end > last_end {
            break;
        }
        let t = end as f64 / rate;
        while ci < cues.len() && cues[ci].hold_end_s < t {
            ci += 1;
        }
        let Some(cue) = cues.get(ci).filter(|c| c.hold_start_s < t) else {
            continue;
        };
        ticks += 1;
        let window = match windows.fetch(end, config.window_len)? {
            WindowFetch::Ready(w) => w,
            WindowFetch::Unavailable => {
                skipped += 1;
                continue;
            }
            WindowFetch::Ended | WindowFetch::NotYet => break,
        };
        let label = predictor.predict(&window, end)?;
        tallies[ci].0 += 1;
        if label == cue.gesture {
            tallies[ci].1 += 1;
        }
    }
    let cues: Vec<CueAccuracy> = cues
        .iter()
        .zip(&tallies)
        .map(|(c, &(n, ok))| CueAccuracy {
            cue_index: c.index,
            gesture: c.gesture,
            predictions: n,
            correct: ok,
            accuracy: if n == 0 { 0.0 } else { ok as f64 / n as f64 },
            flagged: n < config.min_predictions,
        })
        .collect();
    if cues.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sorted: Vec<f64> = cues.iter().map(|c| c.accuracy).collect();
    let mean_accuracy = sorted.iter().sum::<f64>() / sorted.len() as f64;
    sorted.sort_by(f64::total_cmp);
    let points: Vec<(f64, f64)> = cues.iter().enumerate().map(|(i, c)| ((i + 1) as f64, c.accuracy)).collect();
    Ok(RealtimeReport {
        mean_accuracy,
        median_accuracy: median_sorted(&sorted),
        trend: linear_trend(&points).ok(),
        cues,
        ticks,
        skipped_ticks: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{CuePreset, Recording};

    fn setup() -> (CueSchedule, Recording) {
        let schedule = CueSchedule::preset(CuePreset::Realtime, 3).unwrap();
        let len = ((schedule.duration_s() + 1.0) * 400.0) as usize;
        let rec = Recording::new(400.0, 1, vec![0.0; len]).unwrap();
        (schedule, rec)
    }

    fn label_at(schedule: &CueSchedule, end: u64, rate: f64) -> Gesture {
        schedule.cue_at(end as f64 / rate).map(|c| c.gesture).unwrap_or(Gesture::Rest)
    }

    fn config() -> HarnessConfig {
        HarnessConfig {
            window_len: 100,
            ..HarnessConfig::default()
        }
    }

    #[test]
    fn oracle_scores_one() {
        let (schedule, rec) = setup();
        let s = schedule.clone();
        let mut oracle = move |_: &SampleWindow, end: u64| Ok(label_at(&s, end, 400.0));
        let r = realtime_accuracy(&mut oracle, &mut SourceWindows(&rec), &schedule, &config()).unwrap();
        assert_eq!(r.cues.len(), 50);
        assert!(r.cues.iter().all(|c| c.accuracy == 1.0 && !c.flagged));
        assert_eq!(r.median_accuracy, 1.0);
        assert!(r.cues.iter().all(|c| c.predictions >= MIN_PREDICTIONS_PER_HOLD));
    }

    #[test]
    fn anti_oracle_scores_zero() {
        let (schedule, rec) = setup();
        let s = schedule.clone();
        let mut anti = move |_: &SampleWindow, end: u64| {
            let g = label_at(&s, end, 400.0);
            Ok(Gesture::from_id((g.id() + 1) % 10).unwrap())
        };
        let r = realtime_accuracy(&mut anti, &mut SourceWindows(&rec), &schedule, &config()).unwrap();
        assert!(r.cues.iter().all(|c| c.accuracy == 0.0));
        assert_eq!(r.mean_accuracy, 0.0);
    }

    #[test]
    fn short_holds_are_flagged() {
        let (mut schedule, rec) = setup();
        for c in &mut schedule.cues {
            c.hold_start_s = c.hold_end_s - 1.0;
        }
        let mut any = |_: &SampleWindow, _: u64| Ok(Gesture::Rest);
        let r = realtime_accuracy(&mut any, &mut SourceWindows(&rec), &schedule, &config()).unwrap();
        assert!(r.cues.iter().all(|c| c.flagged && c.predictions == 6));
    }
}
