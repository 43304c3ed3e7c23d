//! Classifier probabilities to stable gesture decisions: exponential
//! confidence filtering, thresholding, majority voting and the Pinch hold
//! mode switch.

pub mod confidence;
pub mod mode;

use serde::{Deserialize, Serialize};

pub use confidence::{check_probability, majority, one_hot, ConfidenceState};
pub use mode::{Mode, ModeSwitch};

use crate::bundle::ModelBundle;
use crate::error::Result;
use crate::gesture::{Gesture, NUM_GESTURES};
use crate::pipeline::SampleWindow;

/// Decoder tick rate, matched to the robot command rate.
pub const DEFAULT_TICK_RATE_HZ: f64 = 6.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    pub alpha: f64,
    pub threshold: f64,
    pub vote_len: usize,
    pub tick_rate_hz: f64,
    pub mode_hold_s: f64,
    pub mode_cooldown_s: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            threshold: 0.5,
            vote_len: 3,
            tick_rate_hz: DEFAULT_TICK_RATE_HZ,
            mode_hold_s: 3.0,
            mode_cooldown_s: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedGesture {
    pub label: Gesture,
    pub tick_index: u64,
    /// Consecutive ticks this label has been output, including this one.
    pub consecutive_count: u32,
}

/// Everything one decoder tick produces. Serialized as one JSONL line by
/// `emgctl decode`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderOutput {
    pub tick: u64,
    pub gesture: Gesture,
    pub consecutive_count: u32,
    /// Argmax of this tick's classifier probabilities.
    pub raw: Gesture,
    pub probabilities: Vec<f64>,
    /// Filtered confidence after this tick's update.
    pub confidence: Vec<f64>,
    pub mode: Mode,
    pub mode_changed: bool,
    /// The probabilities were injected instead of classified.
    pub injected: bool,
}

impl DecoderOutput {
    pub fn decoded(&self) -> DecodedGesture {
        DecodedGesture {
            label: self.gesture,
            tick_index: self.tick,
            consecutive_count: self.consecutive_count,
        }
    }
}

/// Deterministic per-session decoder state machine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealtimeDecoder {
    config: DecoderConfig,
    confidence: ConfidenceState,
    mode_switch: ModeSwitch,
    tick: u64,
    last: Option<Gesture>,
    consecutive: u32,
}

impl RealtimeDecoder {
    pub fn new(config: DecoderConfig) -> Result<Self> {
        Ok(Self {
            confidence: ConfidenceState::new(config.alpha, config.threshold, config.vote_len)?,
            mode_switch: ModeSwitch::new(config.mode_hold_s, config.mode_cooldown_s, config.tick_rate_hz)?,
            config,
            tick: 0,
            last: None,
            consecutive: 0,
        })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode_switch.mode()
    }

    pub fn confidence(&self) -> &ConfidenceState {
        &self.confidence
    }

    pub fn mode_switch(&self) -> &ModeSwitch {
        &self.mode_switch
    }

    /// Ticks processed so far.
    pub fn ticks(&self) -> u64 {
        self.tick
    }

    /// Classifies `window` with `bundle` and advances one tick. On error the
    /// decoder state is unchanged.
    pub fn decode_step(&mut self, bundle: &ModelBundle, window: &SampleWindow) -> Result<DecoderOutput> {
        let p = bundle.predict_proba(window)?;
        self.step_probabilities(&p, false)
    }

    /// Advances one tick from a probability vector.
    pub fn step_probabilities(&mut self, p: &[f64], injected: bool) -> Result<DecoderOutput> {
        check_probability(p)?;
        let gesture = self.confidence.step(p)?;
        self.consecutive = match self.last {
            Some(prev) if prev == gesture => self.consecutive.saturating_add(1),
            _ => 1,
        };
        self.last = Some(gesture);
        let mode_changed = self.mode_switch.update(gesture).is_some();
        let out = DecoderOutput {
            tick: self.tick,
            gesture,
            consecutive_count: self.consecutive,
            raw: Gesture::from_id(crate::classifier::argmax(p)).expect("class in range"),
            probabilities: p.to_vec(),
            confidence: self.confidence.p_prime().to_vec(),
            mode: self.mode_switch.mode(),
            mode_changed,
            injected,
        };
        self.tick += 1;
        Ok(out)
    }

    /// Advances one tick with a one-hot vector for `g`, bypassing the classifier.
    pub fn inject(&mut self, g: Gesture) -> Result<DecoderOutput> {
        self.step_probabilities(&one_hot(g), true)
    }

    /// Advances one tick with no classifier input (uniform probabilities).
    pub fn idle_tick(&mut self) -> Result<DecoderOutput> {
        self.step_probabilities(&[1.0 / NUM_GESTURES as f64; NUM_GESTURES], false)
    }
}

impl Default for RealtimeDecoder {
    fn default() -> Self {
        Self::new(DecoderConfig::default()).expect("default parameters are valid")
    }
}
