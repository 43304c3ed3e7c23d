//! Butterworth high-pass design and streaming second-order-section filtering.
//!
//! The analog Butterworth prototype is mapped to the digital domain with the
//! bilinear transform, prewarped so the -3 dB point lands exactly on the
//! requested cutoff. The result is a cascade of biquads (plus one first-order
//! section for odd orders) run in transposed direct form II.

use std::f64::consts::PI;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One biquad section, `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Both poles strictly inside the unit circle (stability triangle).
    pub fn is_stable(&self) -> bool {
        let [a1, a2] = self.a;
        a2.abs() < 1.0 && a1.abs() < 1.0 + a2
    }

    fn response(&self, z_inv: Complex<f64>) -> Complex<f64> {
        let z2 = z_inv * z_inv;
        let num = Complex::new(self.b[0], 0.0) + z_inv * self.b[1] + z2 * self.b[2];
        let den = Complex::new(1.0, 0.0) + z_inv * self.a[0] + z2 * self.a[1];
        num / den
    }
}

/// A designed high-pass filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
    pub sections: Vec<Biquad>,
}

/// Analog Butterworth high-pass magnitude `w^n / sqrt(1 + w^2n)` at
/// cutoff-normalized frequency `omega`.
pub fn butterworth_highpass_gain(omega: f64, order: usize) -> f64 {
    let wn = omega.powi(order as i32);
    wn / (1.0 + wn * wn).sqrt()
}

/// Designs an `order`-th order Butterworth high-pass filter.
pub fn design_highpass(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Result<FilterSpec> {
    if order == 0 {
        return Err(Error::InvalidParameter("filter order must be >= 1".into()));
    }
    if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
            sample_rate_hz / 2.0
        )));
    }

    // Prewarped analog cutoff in units where the bilinear constant is 1.
    let k = (PI * cutoff_hz / sample_rate_hz).tan();
    let mut sections = Vec::with_capacity(order.div_ceil(2));

    for i in 0..order / 2 {
        // Pole pair damping of the unit-cutoff prototype.
        let zeta = (PI * (2 * i + 1) as f64 / (2 * order) as f64).sin();
        let norm = 1.0 / (1.0 + 2.0 * zeta * k + k * k);
        sections.push(Biquad {
            b: [norm, -2.0 * norm, norm],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - 2.0 * zeta * k + k * k) * norm],
        });
    }
    if order % 2 == 1 {
        let norm = 1.0 / (1.0 + k);
        sections.push(Biquad {
            b: [norm, -norm, 0.0],
            a: [(k - 1.0) * norm, 0.0],
        });
    }

    let spec = FilterSpec {
        order,
        cutoff_hz,
        sample_rate_hz,
        sections,
    };
    debug_assert!(spec.is_stable());
    Ok(spec)
}

impl FilterSpec {
    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }

    /// Exact magnitude of the digital transfer function at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate_hz;
        let z_inv = Complex::new(w.cos(), -w.sin());
        self.sections
            .iter()
            .fold(Complex::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
            .norm()
    }

    /// Filters one channel's samples starting from a zeroed state.
    pub fn filter_signal(&self, input: &[f64]) -> Vec<f64> {
        let mut out = input.to_vec();
        self.filter_in_place(&mut out);
        out
    }

    /// In-place filtering of one channel from a zeroed state.
    pub fn filter_in_place(&self, samples: &mut [f64]) {
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for x in samples.iter_mut() {
                let y = s.b[0] * *x + z1;
                z1 = s.b[1] * *x - s.a[0] * y + z2;
                z2 = s.b[2] * *x - s.a[1] * y;
                *x = y;
            }
        }
    }
}

/// Per-channel, per-section delay registers of a running filter.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    channels: usize,
    sections: usize,
    registers: Vec<[f64; 2]>,
}

impl FilterState {
    pub fn new(spec: &FilterSpec, channels: usize) -> Self {
        Self {
            channels,
            sections: spec.sections.len(),
            registers: vec![[0.0; 2]; channels * spec.sections.len()],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn register_count(&self) -> usize {
        self.registers.len() * 2
    }

    pub fn reset(&mut self) {
        self.registers.iter_mut().for_each(|r| *r = [0.0; 2]);
    }

    pub fn is_reset(&self) -> bool {
        self.registers.iter().all(|r| *r == [0.0; 2])
    }
}

/// Advances the filter by one multi-channel frame.
///
/// On non-finite input the state is left untouched.
pub fn filter_step(spec: &FilterSpec, state: &mut FilterState, frame: &[f64]) -> Result<Vec<f64>> {
    if frame.len() != state.channels || state.sections != spec.sections.len() {
        return Err(Error::DimensionMismatch {
            expected: state.channels,
            actual: frame.len(),
        });
    }
    if frame.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("filter input frame"));
    }
    let mut out = frame.to_vec();
    for (ch, x) in out.iter_mut().enumerate() {
        let regs = &mut state.registers[ch * state.sections..(ch + 1) * state.sections];
        for (s, r) in spec.sections.iter().zip(regs.iter_mut()) {
            let y = s.b[0] * *x + r[0];
            r[0] = s.b[1] * *x - s.a[0] * y + r[1];
            r[1] = s.b[2] * *x - s.a[1] * y;
            *x = y;
        }
    }
    Ok(out)
}

/// Steady-state gain of the filter for a unit sinusoid at `freq_hz`, measured
/// by running the filter and projecting the settled output onto sin/cos.
pub fn measure_sinusoid_gain(spec: &FilterSpec, freq_hz: f64) -> f64 {
    let fs = spec.sample_rate_hz;
    let settle = (fs * 1.0) as usize;
    // Whole number of periods for the projection, at least 0.5 s.
    let period = fs / freq_hz;
    let cycles = ((0.5 * fs) / period).ceil().max(1.0);
    let measure = (cycles * period).round() as usize;
    let total = settle + measure;
    let w = 2.0 * PI * freq_hz / fs;
    let input: Vec<f64> = (0..total).map(|i| (w * i as f64).sin()).collect();
    let out = spec.filter_signal(&input);
    let (mut s, mut c) = (0.0, 0.0);
    for (i, y) in out.iter().enumerate().skip(settle) {
        s += y * (w * i as f64).sin();
        c += y * (w * i as f64).cos();
    }
    2.0 * (s * s + c * c).sqrt() / measure as f64
}
