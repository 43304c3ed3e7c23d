//! Parsing of source specifications and optional JSON config files.

use std::path::Path;

use anyhow::{bail, Context, Result};
use emg_core::ingest::{CuePreset, CueSchedule, Recording, SampleSource, StreamClient, SynthConfig, SynthSession};
use emg_gateway::SourceDescriptor;
use serde::de::DeserializeOwned;

/// Samples kept by a streaming client: 30 s at 4 kHz.
const STREAM_CAPACITY: usize = 120_000;

/// Reads `path` as JSON, or returns the default when no path is given.
pub fn load_json_or_default<T: Default + DeserializeOwned>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

enum Spec<'a> {
    None,
    Synth(u64),
    Tcp(&'a str),
    Path(&'a str),
}

fn parse_spec(spec: &str) -> Result<Spec<'_>> {
    if spec == "none" {
        return Ok(Spec::None);
    }
    if let Some(addr) = spec.strip_prefix("tcp:") {
        return Ok(Spec::Tcp(addr));
    }
    if spec == "synth" {
        return Ok(Spec::Synth(0));
    }
    if let Some(seed) = spec.strip_prefix("synth:") {
        return Ok(Spec::Synth(seed.parse().with_context(|| format!("bad synth seed '{seed}'"))?));
    }
    Ok(Spec::Path(spec))
}

/// Gateway source for `spec`; `cues` applies to recordings only.
pub fn source_descriptor(spec: &str, cues: Option<String>) -> Result<SourceDescriptor> {
    let desc = match parse_spec(spec)? {
        Spec::None => SourceDescriptor::None,
        Spec::Synth(seed) => SourceDescriptor::Synth {
            seed,
            setup_seed: 0,
            preset: CuePreset::Realtime,
            cue_seed: seed,
        },
        Spec::Tcp(addr) => SourceDescriptor::Tcp { addr: addr.to_string() },
        Spec::Path(path) => {
            return Ok(SourceDescriptor::Recording {
                path: path.to_string(),
                cues,
            })
        }
    };
    if cues.is_some() {
        bail!("--cues only applies to a recording source");
    }
    Ok(desc)
}

pub enum DecodeSource {
    Stored(Box<dyn SampleSource>),
    Stream(StreamClient),
}

impl DecodeSource {
    pub fn open(spec: &str, preset: CuePreset) -> Result<Self> {
        Ok(match parse_spec(spec)? {
            Spec::None => bail!("decoding needs a source"),
            Spec::Synth(seed) => {
                let config = SynthConfig {
                    seed,
                    ..SynthConfig::default()
                };
                DecodeSource::Stored(Box::new(SynthSession::new(config, CueSchedule::preset(preset, seed)?)?))
            }
            Spec::Tcp(addr) => DecodeSource::Stream(
                StreamClient::connect(addr, STREAM_CAPACITY).with_context(|| format!("connecting to {addr}"))?,
            ),
            Spec::Path(path) => {
                DecodeSource::Stored(Box::new(Recording::read(path).with_context(|| format!("reading {path}"))?))
            }
        })
    }
}
