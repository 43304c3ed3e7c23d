//! Synthetic HD-EMG with gesture-specific spatial activation patterns.
//!
//! Each channel carries band-limited Gaussian noise whose amplitude envelope
//! follows the cue schedule: the noise floor at rest, the gesture's spatial
//! template during the hold, and linear cross-fades over the transition and
//! return phases. Powerline (60 Hz and harmonics) and slow motion artifacts
//! are added on top, and optional per-channel gains model electrode drift.
//!
//! Samples are a pure function of (config, schedule, channel, index), so any
//! block can be generated on demand and reads are independent of alignment.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::{Gesture, NUM_GESTURES};
use crate::pipeline::ElectrodeArray;

use super::cues::CueSchedule;
use super::source::{check_range, SampleSource};

const NOISE_BLOCK: u64 = 1024;

/// A Gaussian activation centered at a (row, col) grid position. Columns wrap
/// around the forearm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub row: f64,
    pub col: f64,
    pub sigma: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureTemplate {
    pub gesture: Gesture,
    pub blobs: Vec<Blob>,
    /// Pooled RMS of the hold relative to the noise floor.
    pub amplitude_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub sample_rate_hz: f64,
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// RMS of the resting signal in volts.
    pub noise_floor_v: f64,
    pub carrier_band_hz: (f64, f64),
    pub fir_taps: usize,
    /// Templates for the non-Rest gestures. Rest is the noise floor.
    pub templates: Vec<GestureTemplate>,
    /// Relative standard deviation of per-cue contraction effort.
    pub effort_sd: f64,
    /// Relative standard deviation of per-cue, per-channel pattern variation.
    pub pattern_jitter_sd: f64,
    /// 60 Hz amplitude in volts.
    pub powerline_v: f64,
    /// Amplitudes of the 120 Hz and 180 Hz harmonics relative to 60 Hz.
    pub powerline_harmonics: Vec<f64>,
    /// Amplitude in volts of each sub-20 Hz motion component.
    pub motion_v: f64,
    pub motion_freqs_hz: Vec<f64>,
    /// Per-channel multiplicative gains applied to the EMG (electrode drift).
    pub channel_gains: Option<Vec<f64>>,
    pub impedances_ohms: Option<Vec<f64>>,
    /// Seeds the per-channel artifact coupling, a property of the electrode
    /// placement shared by every session recorded with it.
    pub setup_seed: u64,
    /// Seeds everything that varies between sessions: noise, effort and
    /// pattern jitter, artifact phases.
    pub seed: u64,
}

/// Spread of a motor-point hotspot, in electrode spacings.
const HOTSPOT_SIGMA: f64 = 0.45;
/// Column offset separating two gestures that share a muscle compartment.
const SIBLING_OFFSET: f64 = 0.16;

fn hotspot(row: f64, col: f64) -> Blob {
    Blob {
        row,
        col,
        sigma: HOTSPOT_SIGMA,
        weight: 1.0,
    }
}

/// Default activation patterns. Fingers Closed drives a strong hotspot of its
/// own; the other eight gestures come in pairs sharing a compartment, their
/// hotspots a fraction of an electrode apart. Sibling gestures are easy to
/// tell apart within a session but sensitive to per-electrode gain changes.
pub fn default_templates() -> Vec<GestureTemplate> {
    use Gesture::*;
    let pairs = [
        ((1.5, 1.5), WristDown, WristLeft),
        ((1.5, 5.5), FingersOpen, WristUp),
        ((5.5, 1.5), PalmDown, PinchFingers),
        ((5.5, 5.5), PalmUp, WristRight),
    ];
    let mut out = vec![GestureTemplate {
        gesture: FingersClosed,
        blobs: vec![hotspot(3.5, 3.5)],
        amplitude_ratio: 5.7,
    }];
    for ((row, col), a, b) in pairs {
        for (g, dc) in [(a, -SIBLING_OFFSET), (b, SIBLING_OFFSET)] {
            out.push(GestureTemplate {
                gesture: g,
                blobs: vec![hotspot(row, col + dc)],
                amplitude_ratio: 3.0,
            });
        }
    }
    out
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 4000.0,
            grid_rows: 8,
            grid_cols: 8,
            noise_floor_v: 5e-6,
            carrier_band_hz: (150.0, 450.0),
            fir_taps: 41,
            templates: default_templates(),
            effort_sd: 0.1,
            pattern_jitter_sd: 0.05,
            powerline_v: 20e-6,
            powerline_harmonics: vec![0.02, 0.01],
            motion_v: 30e-6,
            motion_freqs_hz: vec![0.7, 3.1, 8.3, 17.0],
            channel_gains: None,
            impedances_ohms: None,
            setup_seed: 0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn channel_count(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    pub fn electrode_array(&self) -> ElectrodeArray {
        ElectrodeArray::grid(self.grid_rows, self.grid_cols)
    }

    /// Copy of this config with per-channel gains `1 + N(mean, sd)` drawn from
    /// `seed`, floored at 0.1.
    pub fn with_gain_drift(&self, mean: f64, sd: f64, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.channel_gains = Some(gain_drift(self.channel_count(), mean, sd, seed));
        cfg
    }

    /// Spatial amplitude template (volts RMS per channel) for each gesture id.
    pub fn template_matrix(&self) -> Result<Vec<Vec<f64>>> {
        let channels = self.channel_count();
        let floor = self.noise_floor_v;
        let mut out = vec![vec![floor; channels]; NUM_GESTURES];
        for t in &self.templates {
            if t.gesture == Gesture::Rest {
                return Err(Error::InvalidParameter("Rest has no template beyond the noise floor".into()));
            }
            if !(t.amplitude_ratio >= 1.0) || t.blobs.is_empty() {
                return Err(Error::InvalidParameter(format!("template for {}", t.gesture)));
            }
            let shape: Vec<f64> = (0..channels)
                .map(|c| {
                    let (r, col) = ((c / self.grid_cols) as f64, (c % self.grid_cols) as f64);
                    t.blobs
                        .iter()
                        .map(|b| {
                            let dc = (col - b.col).abs();
                            let dc = dc.min(self.grid_cols as f64 - dc);
                            let d2 = (r - b.row).powi(2) + dc * dc;
                            b.weight * (-d2 / (2.0 * b.sigma * b.sigma)).exp()
                        })
                        .sum()
                })
                .collect();
            // Solve mean((1 + a·shape)²) = ratio² for the blob scale a.
            let m1 = shape.iter().sum::<f64>() / channels as f64;
            let m2 = shape.iter().map(|s| s * s).sum::<f64>() / channels as f64;
            let r2 = t.amplitude_ratio * t.amplitude_ratio;
            let a = (-m1 + (m1 * m1 + m2 * (r2 - 1.0)).sqrt()) / m2;
            out[t.gesture.id()] = shape.iter().map(|s| floor * (1.0 + a * s)).collect();
        }
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate_hz / 2.0;
        let (lo, hi) = self.carrier_band_hz;
        if !(self.sample_rate_hz > 0.0) || !(0.0 < lo && lo < hi && hi < nyquist) {
            return Err(Error::InvalidParameter(format!("carrier band {lo}..{hi} Hz")));
        }
        if self.fir_taps < 3 || self.fir_taps % 2 == 0 {
            return Err(Error::InvalidParameter("FIR length must be odd and at least 3".into()));
        }
        if !(self.noise_floor_v > 0.0) {
            return Err(Error::InvalidParameter("noise floor must be positive".into()));
        }
        for v in [&self.channel_gains, &self.impedances_ohms].into_iter().flatten() {
            if v.len() != self.channel_count() {
                return Err(Error::DimensionMismatch {
                    expected: self.channel_count(),
                    actual: v.len(),
                });
            }
        }
        Ok(())
    }
}

/// Per-channel gains `max(0.1, 1 + N(mean, sd))`.
pub fn gain_drift(channels: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(mean, sd.max(0.0)).expect("finite parameters");
    (0..channels).map(|_| (1.0 + normal.sample(&mut rng)).max(0.1)).collect()
}

/// Hamming-windowed sinc band-pass, scaled to unit output variance for
/// unit-variance white input.
pub fn bandpass_fir(taps: usize, lo_hz: f64, hi_hz: f64, sample_rate_hz: f64) -> Vec<f64> {
    let mid = (taps / 2) as f64;
    let (f1, f2) = (lo_hz / sample_rate_hz, hi_hz / sample_rate_hz);
    let sinc = |f: f64, n: f64| if n == 0.0 { 2.0 * f } else { (2.0 * PI * f * n).sin() / (PI * n) };
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let n = i as f64 - mid;
            let w = 0.54 - 0.46 * (2.0 * PI * i as f64 / (taps - 1) as f64).cos();
            (sinc(f2, n) - sinc(f1, n)) * w
        })
        .collect();
    let energy: f64 = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    h.iter_mut().for_each(|x| *x /= energy);
    h
}

/// A lazily generated synthetic session.
#[derive(Clone, Debug)]
pub struct SynthSession {
    config: SynthConfig,
    schedule: CueSchedule,
    len: u64,
    templates: Vec<Vec<f64>>,
    fir: Vec<f64>,
    /// Per-cue effort factor.
    effort: Vec<f64>,
    /// Per-cue, per-channel pattern multipliers.
    jitter: Vec<Vec<f64>>,
    gains: Vec<f64>,
    powerline_mix: Vec<f64>,
    motion_mix: Vec<f64>,
    powerline_phase: Vec<f64>,
    motion_phase: Vec<f64>,
}

impl SynthSession {
    /// Session covering the whole schedule plus one second of trailing rest.
    pub fn new(config: SynthConfig, schedule: CueSchedule) -> Result<Self> {
        let duration = schedule.duration_s() + 1.0;
        let len = (duration * config.sample_rate_hz).ceil() as u64;
        Self::with_len(config, schedule, len)
    }

    pub fn with_len(config: SynthConfig, schedule: CueSchedule, len: u64) -> Result<Self> {
        config.validate()?;
        let templates = config.template_matrix()?;
        let channels = config.channel_count();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7e3a_1c55);
        let effort_dist = Normal::new(1.0, config.effort_sd.max(0.0)).expect("finite parameters");
        let jitter_dist = Normal::new(0.0, config.pattern_jitter_sd.max(0.0)).expect("finite parameters");
        let effort = schedule
            .cues
            .iter()
            .map(|_| effort_dist.sample(&mut rng).clamp(0.5, 1.5))
            .collect();
        let jitter = schedule
            .cues
            .iter()
            .map(|_| (0..channels).map(|_| jitter_dist.sample(&mut rng).exp()).collect())
            .collect();
        let mut setup_rng = ChaCha8Rng::seed_from_u64(config.setup_seed ^ 0x5e70_0000);
        let powerline_mix = (0..channels).map(|_| setup_rng.random_range(0.5..1.5)).collect();
        let motion_mix = (0..channels).map(|_| setup_rng.random_range(0.5..1.5)).collect();
        let powerline_phase = (0..1 + config.powerline_harmonics.len())
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        let motion_phase = config
            .motion_freqs_hz
            .iter()
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        let fir = bandpass_fir(
            config.fir_taps,
            config.carrier_band_hz.0,
            config.carrier_band_hz.1,
            config.sample_rate_hz,
        );
        let gains = config.channel_gains.clone().unwrap_or_else(|| vec![1.0; channels]);
        Ok(Self {
            config,
            schedule,
            len,
            templates,
            fir,
            effort,
            jitter,
            gains,
            powerline_mix,
            motion_mix,
            powerline_phase,
            motion_phase,
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }

    pub fn schedule(&self) -> &CueSchedule {
        &self.schedule
    }

    /// Template amplitudes (volts RMS per channel) indexed by gesture id.
    pub fn templates(&self) -> &[Vec<f64>] {
        &self.templates
    }

    /// Active cue and template weight in [0, 1] at each sample.
    fn envelope(&self, start: u64, len: usize) -> Vec<(Option<usize>, f64)> {
        let rate = self.config.sample_rate_hz;
        let cues = &self.schedule.cues;
        let mut k = cues.partition_point(|c| c.start_s * rate <= start as f64);
        let mut out = Vec::with_capacity(len);
        for i in 0..len {
            let t = (start + i as u64) as f64 / rate;
            while k < cues.len() && cues[k].start_s <= t {
                k += 1;
            }
            let cue = k.checked_sub(1).map(|j| &cues[j]).filter(|c| t < c.end_s);
            out.push(match cue {
                None => (None, 0.0),
                Some(c) => {
                    let w = if t < c.transition_start_s {
                        0.0
                    } else if t < c.hold_start_s {
                        (t - c.transition_start_s) / (c.hold_start_s - c.transition_start_s)
                    } else if t < c.hold_end_s {
                        1.0
                    } else {
                        1.0 - (t - c.hold_end_s) / (c.end_s - c.hold_end_s)
                    };
                    (Some(c.index), w.clamp(0.0, 1.0))
                }
            });
        }
        out
    }

    /// Artifact waveform shared by all channels before per-channel mixing:
    /// (powerline, motion).
    fn artifacts(&self, start: u64, len: usize) -> Vec<(f64, f64)> {
        let rate = self.config.sample_rate_hz;
        (0..len)
            .map(|i| {
                let t = (start + i as u64) as f64 / rate;
                let mut p = (2.0 * PI * 60.0 * t + self.powerline_phase[0]).sin();
                for (h, rel) in self.config.powerline_harmonics.iter().enumerate() {
                    p += rel * (2.0 * PI * 60.0 * (h + 2) as f64 * t + self.powerline_phase[h + 1]).sin();
                }
                let m: f64 = self
                    .config
                    .motion_freqs_hz
                    .iter()
                    .zip(&self.motion_phase)
                    .map(|(f, ph)| (2.0 * PI * f * t + ph).sin())
                    .sum();
                (self.config.powerline_v * p, self.config.motion_v * m)
            })
            .collect()
    }

    /// Unit-variance band-limited noise for samples `start..start + len`.
    fn carrier(&self, channel: usize, start: u64, len: usize) -> Vec<f64> {
        // Output sample s convolves white noise samples s..s + taps.
        let taps = self.fir.len();
        let total = len + taps - 1;
        let mut white = Vec::with_capacity(total);
        let mut idx = start;
        while white.len() < total {
            let block = idx / NOISE_BLOCK;
            let within = (idx % NOISE_BLOCK) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(self.config.seed, channel, block));
            let values: Vec<f64> = (0..NOISE_BLOCK).map(|_| StandardNormal.sample(&mut rng)).collect();
            let take = (NOISE_BLOCK as usize - within).min(total - white.len());
            white.extend_from_slice(&values[within..within + take]);
            idx += take as u64;
        }
        (0..len)
            .map(|i| {
                let seg = &white[i..i + taps];
                seg.iter().zip(self.fir.iter().rev()).map(|(x, h)| x * h).sum()
            })
            .collect()
    }

    fn fill_channel(
        &self,
        channel: usize,
        start: u64,
        env: &[(Option<usize>, f64)],
        artifacts: &[(f64, f64)],
        out: &mut [f32],
    ) {
        let floor = self.config.noise_floor_v;
        let noise = self.carrier(channel, start, out.len());
        let gain = self.gains[channel];
        let (pm, mm) = (self.powerline_mix[channel], self.motion_mix[channel]);
        for (i, o) in out.iter_mut().enumerate() {
            let amplitude = match env[i] {
                (Some(k), w) if w > 0.0 && self.schedule.cues[k].gesture != Gesture::Rest => {
                    let g = self.schedule.cues[k].gesture.id();
                    let target = self.templates[g][channel] * self.jitter[k][channel];
                    floor + w * self.effort[k] * (target - floor)
                }
                _ => floor,
            };
            let (p, m) = artifacts[i];
            *o = (gain * amplitude * noise[i] + pm * p + mm * m) as f32;
        }
    }
}

fn noise_seed(seed: u64, channel: usize, block: u64) -> u64 {
    // SplitMix64 finalizer over the combined key.
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((channel as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(block.wrapping_mul(0x94D0_49BB_1331_11EB));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SampleSource for SynthSession {
    fn sample_rate_hz(&self) -> f64 {
        self.config.sample_rate_hz
    }

    fn channel_count(&self) -> usize {
        self.config.channel_count()
    }

    fn len(&self) -> u64 {
        self.len
    }

    fn read_channel(&self, channel: usize, start: u64, out: &mut [f32]) -> Result<()> {
        check_range(self.len, self.channel_count(), channel, start, out.len())?;
        let env = self.envelope(start, out.len());
        let art = self.artifacts(start, out.len());
        self.fill_channel(channel, start, &env, &art, out);
        Ok(())
    }

    fn read_block(&self, start: u64, len: usize, out: &mut [f32]) -> Result<()> {
        let channels = self.channel_count();
        if out.len() != channels * len {
            return Err(Error::DimensionMismatch {
                expected: channels * len,
                actual: out.len(),
            });
        }
        check_range(self.len, channels, 0, start, len)?;
        if len == 0 {
            return Ok(());
        }
        let env = self.envelope(start, len);
        let art = self.artifacts(start, len);
        for (c, chunk) in out.chunks_exact_mut(len).enumerate() {
            self.fill_channel(c, start, &env, &art, chunk);
        }
        Ok(())
    }

    fn impedances(&self) -> Option<&[f64]> {
        self.config.impedances_ohms.as_deref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::cues::CueTiming;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn templates_hit_their_amplitude_ratios() {
        let cfg = SynthConfig::default();
        let m = cfg.template_matrix().unwrap();
        for t in &cfg.templates {
            let row = &m[t.gesture.id()];
            let rms = (row.iter().map(|x| x * x).sum::<f64>() / row.len() as f64).sqrt();
            assert!((rms / cfg.noise_floor_v - t.amplitude_ratio).abs() < 1e-9);
        }
    }

    #[test]
    fn templates_are_distinct() {
        let m = SynthConfig::default().template_matrix().unwrap();
        for i in 0..NUM_GESTURES {
            for j in i + 1..NUM_GESTURES {
                assert!(cosine(&m[i], &m[j]) < 0.95, "{i} vs {j}: {}", cosine(&m[i], &m[j]));
            }
        }
    }

    #[test]
    fn fir_has_unit_noise_gain() {
        let h = bandpass_fir(41, 150.0, 450.0, 4000.0);
        assert!((h.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reads_are_alignment_independent() {
        let schedule = CueSchedule::from_gestures(&[Gesture::WristUp, Gesture::PalmDown], CueTiming::default(), 0).unwrap();
        let s = SynthSession::new(SynthConfig::default(), schedule).unwrap();
        let mut whole = vec![0.0f32; 5000];
        s.read_channel(7, 1000, &mut whole).unwrap();
        let mut pieces = vec![0.0f32; 5000];
        for (k, chunk) in pieces.chunks_mut(777).enumerate() {
            s.read_channel(7, 1000 + (k * 777) as u64, chunk).unwrap();
        }
        assert_eq!(whole, pieces);
        let mut block = vec![0.0f32; 64 * 300];
        s.read_block(2500, 300, &mut block).unwrap();
        assert_eq!(&block[7 * 300..8 * 300], &whole[1500..1800]);
    }

    #[test]
    fn same_seed_same_samples() {
        let schedule = CueSchedule::from_gestures(&[Gesture::FingersOpen], CueTiming::default(), 0).unwrap();
        let a = SynthSession::new(SynthConfig::default(), schedule.clone()).unwrap();
        let b = SynthSession::new(SynthConfig::default(), schedule.clone()).unwrap();
        let c = SynthSession::new(
            SynthConfig {
                seed: 1,
                ..SynthConfig::default()
            },
            schedule,
        )
        .unwrap();
        let (mut x, mut y, mut z) = (vec![0.0f32; 4000], vec![0.0f32; 4000], vec![0.0f32; 4000]);
        a.read_channel(3, 8000, &mut x).unwrap();
        b.read_channel(3, 8000, &mut y).unwrap();
        c.read_channel(3, 8000, &mut z).unwrap();
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn drift_gains_have_requested_moments() {
        let g = gain_drift(20_000, 0.052, 0.245, 3);
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        let sd = (g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / g.len() as f64).sqrt();
        assert!((mean - 1.052).abs() < 0.01);
        assert!((sd - 0.245).abs() < 0.01);
    }
}
