//! Signal-to-noise ratio of holds against rest, and impedance summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::Gesture;
use crate::ingest::{CueSchedule, SampleSource};
use crate::pipeline::{Preprocessor, SampleWindow};

use super::stats::{wilcoxon_signed_rank, Tail, TestResult};

/// `sqrt(Σ m² / Σ r²)` over all channels and samples of both windows.
pub fn snr(mvc: &SampleWindow, rest: &SampleWindow) -> Result<f64> {
    pooled_snr(std::slice::from_ref(mvc), std::slice::from_ref(rest))
}

/// SNR pooled over several windows: the ratio of mean squared amplitudes, so
/// the result does not depend on how many windows each side contributes.
pub fn pooled_snr(mvc: &[SampleWindow], rest: &[SampleWindow]) -> Result<f64> {
    let channels = mvc.first().ok_or(Error::EmptyDataset)?.channels();
    if rest.is_empty() {
        return Err(Error::DegenerateRest);
    }
    if let Some(w) = mvc.iter().chain(rest).find(|w| w.channels() != channels) {
        return Err(Error::DimensionMismatch {
            expected: channels,
            actual: w.channels(),
        });
    }
    let mean_sq = |ws: &[SampleWindow]| -> (f64, usize) {
        let n: usize = ws.iter().map(|w| w.data().len()).sum();
        let s: f64 = ws.iter().flat_map(|w| w.data()).map(|x| x * x).sum();
        (s, n)
    };
    let (m, mn) = mean_sq(mvc);
    let (r, rn) = mean_sq(rest);
    if r <= 0.0 || rn == 0 || !r.is_finite() {
        return Err(Error::DegenerateRest);
    }
    if mn == 0 || !m.is_finite() {
        return Err(Error::NonFinite("mvc window"));
    }
    Ok(((m / mn as f64) / (r / rn as f64)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub gesture: Gesture,
    pub snr: f64,
    pub gesture_cues: usize,
    pub rest_cues: usize,
    pub window_s: f64,
}

/// Filtered windows covering the final `schedule.timing.label_s` seconds of
/// every kept cue of `gesture`.
pub fn hold_tail_windows(
    pre: &Preprocessor,
    source: &dyn SampleSource,
    schedule: &CueSchedule,
    gesture: Gesture,
) -> Result<Vec<SampleWindow>> {
    let rate = source.sample_rate_hz();
    let len = (schedule.timing.label_s * rate).round() as u64;
    let mut out = Vec::new();
    for cue in schedule.cues.iter().filter(|c| c.gesture == gesture && !c.discarded) {
        let end = (cue.hold_end_s * rate).round() as u64;
        let start = end.checked_sub(len).ok_or_else(|| {
            Error::InvalidParameter(format!("cue {} hold ends before the tail window", cue.index))
        })?;
        if end > source.len() {
            return Err(Error::RecordingTooShort {
                cue: cue.index,
                gesture: cue.gesture,
            });
        }
        out.push(pre.filtered(&source.window(start, len as usize)?)?);
    }
    Ok(out)
}

/// SNR of `gesture` against Rest in a recorded session, pooled over every
/// cue of each.
pub fn session_snr(
    pre: &Preprocessor,
    source: &dyn SampleSource,
    schedule: &CueSchedule,
    gesture: Gesture,
) -> Result<SnrReport> {
    let mvc = hold_tail_windows(pre, source, schedule, gesture)?;
    if mvc.is_empty() {
        return Err(Error::GestureAbsent(gesture));
    }
    let rest = hold_tail_windows(pre, source, schedule, Gesture::Rest)?;
    Ok(SnrReport {
        gesture,
        snr: pooled_snr(&mvc, &rest)?,
        gesture_cues: mvc.len(),
        rest_cues: rest.len(),
        window_s: schedule.timing.label_s,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceSummary {
    pub count: usize,
    pub mean_ohms: f64,
    pub median_ohms: f64,
    pub min_ohms: f64,
    pub max_ohms: f64,
    pub above_threshold: usize,
    pub threshold_ohms: f64,
}

pub fn summarize_impedances(impedances: &[f64], threshold_ohms: f64) -> Result<ImpedanceSummary> {
    if impedances.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if impedances.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("impedances"));
    }
    let mut sorted = impedances.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ImpedanceSummary {
        count: sorted.len(),
        mean_ohms: sorted.iter().sum::<f64>() / sorted.len() as f64,
        median_ohms: median_sorted(&sorted),
        min_ohms: sorted[0],
        max_ohms: sorted[sorted.len() - 1],
        above_threshold: sorted.iter().filter(|&&z| z > threshold_ohms).count(),
        threshold_ohms,
    })
}

pub(crate) fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceDrift {
    /// Mean of per-electrode `(after - before) / before`.
    pub mean_relative_change: f64,
    pub test: TestResult,
}

/// One-tailed Wilcoxon test that impedances rose between two measurements of
/// the same electrodes.
pub fn impedance_drift(before: &[f64], after: &[f64]) -> Result<ImpedanceDrift> {
    if before.len() != after.len() {
        return Err(Error::DimensionMismatch {
            expected: before.len(),
            actual: after.len(),
        });
    }
    if before.iter().any(|&z| !(z > 0.0)) {
        return Err(Error::InvalidParameter("impedances must be positive".into()));
    }
    let pairs: Vec<(f64, f64)> = before.iter().copied().zip(after.iter().copied()).collect();
    let test = wilcoxon_signed_rank(&pairs, Tail::Greater)?;
    let mean_relative_change = pairs.iter().map(|(b, a)| (a - b) / b).sum::<f64>() / pairs.len() as f64;
    Ok(ImpedanceDrift {
        mean_relative_change,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(channels: usize, len: usize, v: f64) -> SampleWindow {
        SampleWindow::from_channel_major(channels, len, vec![v; channels * len], 0.0).unwrap()
    }

    #[test]
    fn trivial_ratios() {
        assert_eq!(snr(&constant(4, 10, 2.0), &constant(4, 10, 1.0)).unwrap(), 2.0);
        let w = constant(3, 5, 0.7);
        assert!((snr(&w, &w).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            snr(&w, &constant(3, 5, 0.0)),
            Err(Error::DegenerateRest)
        ));
        assert!(snr(&w, &constant(2, 5, 1.0)).is_err());
    }

    #[test]
    fn invariant_to_permutation_and_joint_scaling() {
        let m: Vec<Vec<f64>> = (0..4).map(|c| (0..50).map(|i| ((i * 7 + c * 3) % 11) as f64 - 5.0).collect()).collect();
        let r: Vec<Vec<f64>> = (0..4).map(|c| (0..50).map(|i| ((i * 5 + c) % 7) as f64 - 3.0).collect()).collect();
        let base = snr(
            &SampleWindow::from_channels(&m, 0.0).unwrap(),
            &SampleWindow::from_channels(&r, 0.0).unwrap(),
        )
        .unwrap();
        let perm = [2, 0, 3, 1];
        let mp: Vec<_> = perm.iter().map(|&i| m[i].clone()).collect();
        let rp: Vec<_> = perm.iter().map(|&i| r[i].clone()).collect();
        let permuted = snr(
            &SampleWindow::from_channels(&mp, 0.0).unwrap().scaled(3.5),
            &SampleWindow::from_channels(&rp, 0.0).unwrap().scaled(3.5),
        )
        .unwrap();
        assert!((base - permuted).abs() < 1e-12);
    }

    #[test]
    fn impedance_statistics() {
        let z = [100e3, 300e3, 600e3, 200e3];
        let s = summarize_impedances(&z, 500e3).unwrap();
        assert_eq!(s.median_ohms, 250e3);
        assert_eq!(s.above_threshold, 1);
        let before: Vec<f64> = (1..=20).map(|i| i as f64 * 10e3).collect();
        let after: Vec<f64> = before.iter().map(|b| b * 1.1).collect();
        let d = impedance_drift(&before, &after).unwrap();
        assert!((d.mean_relative_change - 0.1).abs() < 1e-12);
        assert!(d.test.p_value < 1e-5);
    }
}
