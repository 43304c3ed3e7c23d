use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::source::{check_range, SampleSource};

pub const RECORDING_MAGIC: &[u8; 4] = b"EMGR";
pub const RECORDING_VERSION: u16 = 1;
const IMPEDANCE_TAG: &[u8; 4] = b"IMPD";
const EPOCH_TAG: &[u8; 4] = b"EPCH";
/// magic + version + rate + channels + sample count.
const HEADER_LEN: u64 = 4 + 2 + 8 + 2 + 8;
const CHUNK: usize = 1 << 16;

/// An in-memory multi-channel recording, samples stored channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub sample_rate_hz: f64,
    pub channel_count: usize,
    samples_per_channel: u64,
    samples: Vec<f32>,
    pub impedances: Option<Vec<f64>>,
    /// Recording start as seconds since the Unix epoch.
    pub start_epoch: Option<f64>,
}

impl Recording {
    pub fn new(sample_rate_hz: f64, channel_count: usize, samples: Vec<f32>) -> Result<Self> {
        if !(sample_rate_hz > 0.0) || channel_count == 0 || channel_count > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "recording rate {sample_rate_hz} Hz with {channel_count} channels"
            )));
        }
        if samples.len() % channel_count != 0 {
            return Err(Error::Malformed(format!(
                "{} samples do not divide into {channel_count} channels",
                samples.len()
            )));
        }
        Ok(Self {
            sample_rate_hz,
            channel_count,
            samples_per_channel: (samples.len() / channel_count) as u64,
            samples,
            impedances: None,
            start_epoch: None,
        })
    }

    /// Copies every sample of `source` into memory.
    pub fn from_source(source: &dyn SampleSource) -> Result<Self> {
        let n = source.len() as usize;
        let mut samples = vec![0.0f32; n * source.channel_count()];
        for (c, chunk) in samples.chunks_exact_mut(n.max(1)).enumerate() {
            if n > 0 {
                source.read_channel(c, 0, chunk)?;
            }
        }
        let mut rec = Recording::new(source.sample_rate_hz(), source.channel_count(), samples)?;
        rec.impedances = source.impedances().map(<[f64]>::to_vec);
        Ok(rec)
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.samples_per_channel as usize;
        &self.samples[c * n..(c + 1) * n]
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_recording(self, self.impedances.as_deref(), self.start_epoch, path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        read_recording(BufReader::new(File::open(path)?))
    }
}

impl SampleSource for Recording {
    fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    fn channel_count(&self) -> usize {
        self.channel_count
    }

    fn len(&self) -> u64 {
        self.samples_per_channel
    }

    fn read_channel(&self, channel: usize, start: u64, out: &mut [f32]) -> Result<()> {
        check_range(self.samples_per_channel, self.channel_count, channel, start, out.len())?;
        let s = start as usize;
        out.copy_from_slice(&self.channel(channel)[s..s + out.len()]);
        Ok(())
    }

    fn impedances(&self) -> Option<&[f64]> {
        self.impedances.as_deref()
    }
}

/// Streams any source into the recording file format, one channel at a time.
pub fn write_recording(
    source: &dyn SampleSource,
    impedances: Option<&[f64]>,
    start_epoch: Option<f64>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let channels = source.channel_count();
    let n = source.len();
    w.write_all(RECORDING_MAGIC)?;
    w.write_all(&RECORDING_VERSION.to_le_bytes())?;
    w.write_all(&source.sample_rate_hz().to_le_bytes())?;
    w.write_all(&(channels as u16).to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    let mut buf = vec![0.0f32; CHUNK];
    let mut bytes = Vec::with_capacity(CHUNK * 4);
    for c in 0..channels {
        let mut t = 0u64;
        while t < n {
            let len = CHUNK.min((n - t) as usize);
            source.read_channel(c, t, &mut buf[..len])?;
            bytes.clear();
            for x in &buf[..len] {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&bytes)?;
            t += len as u64;
        }
    }
    if let Some(imp) = impedances {
        if imp.len() != channels {
            return Err(Error::DimensionMismatch {
                expected: channels,
                actual: imp.len(),
            });
        }
        w.write_all(IMPEDANCE_TAG)?;
        for z in imp {
            w.write_all(&z.to_le_bytes())?;
        }
    }
    if let Some(epoch) = start_epoch {
        w.write_all(EPOCH_TAG)?;
        w.write_all(&epoch.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

struct Counting<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Counting<R> {
    /// Fills `buf`, or reports how far the data got.
    fn fill(&mut self, buf: &mut [u8]) -> Result<bool> {
        let mut got = 0;
        while got < buf.len() {
            match self.inner.read(&mut buf[got..]) {
                Ok(0) => break,
                Ok(k) => got += k,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += got as u64;
        Ok(got == buf.len())
    }

    fn exact(&mut self, buf: &mut [u8]) -> Result<()> {
        if self.fill(buf)? {
            Ok(())
        } else {
            Err(Error::Truncated { offset: self.offset })
        }
    }
}

pub fn read_recording<R: Read>(reader: R) -> Result<Recording> {
    let mut r = Counting { inner: reader, offset: 0 };
    let mut magic = [0u8; 4];
    if !r.fill(&mut magic)? || &magic != RECORDING_MAGIC {
        return Err(Error::BadMagic { expected: "EMGR" });
    }
    let mut b2 = [0u8; 2];
    let mut b8 = [0u8; 8];
    r.exact(&mut b2)?;
    let version = u16::from_le_bytes(b2);
    if version != RECORDING_VERSION {
        return Err(Error::UnsupportedVersion(version as u32));
    }
    r.exact(&mut b8)?;
    let rate = f64::from_le_bytes(b8);
    r.exact(&mut b2)?;
    let channels = u16::from_le_bytes(b2) as usize;
    r.exact(&mut b8)?;
    let n = u64::from_le_bytes(b8);
    debug_assert_eq!(r.offset, HEADER_LEN);
    if channels == 0 {
        return Err(Error::Malformed("zero channels".into()));
    }
    let total = n
        .checked_mul(channels as u64)
        .filter(|t| *t <= usize::MAX as u64 / 4)
        .ok_or_else(|| Error::Malformed(format!("sample count {n} × {channels} channels")))?
        as usize;

    let mut samples = Vec::with_capacity(total.min(1 << 28));
    let mut bytes = vec![0u8; CHUNK * 4];
    while samples.len() < total {
        let len = CHUNK.min(total - samples.len());
        let chunk = &mut bytes[..len * 4];
        r.exact(chunk)?;
        samples.extend(chunk.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])));
    }
    let mut rec = Recording::new(rate, channels, samples)?;
    let mut tag = [0u8; 4];
    loop {
        let start = r.offset;
        if !r.fill(&mut tag)? {
            if r.offset == start {
                break;
            }
            return Err(Error::Truncated { offset: r.offset });
        }
        match &tag {
            IMPEDANCE_TAG => {
                let mut imp = Vec::with_capacity(channels);
                for _ in 0..channels {
                    r.exact(&mut b8)?;
                    imp.push(f64::from_le_bytes(b8));
                }
                rec.impedances = Some(imp);
            }
            EPOCH_TAG => {
                r.exact(&mut b8)?;
                rec.start_epoch = Some(f64::from_le_bytes(b8));
            }
            other => {
                return Err(Error::Malformed(format!(
                    "unknown block tag {:?} at offset {start}",
                    String::from_utf8_lossy(other)
                )))
            }
        }
    }
    Ok(rec)
}
