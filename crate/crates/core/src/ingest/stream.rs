//! Length-prefixed TCP sample stream, a replay server and a ring-buffered
//! client.
//!
//! Every frame is a little-endian `u32` payload length followed by the
//! payload, whose first byte is the frame kind:
//!
//! | kind | payload after the kind byte |
//! |------|-----------------------------|
//! | 1 hello   | `"EMGS"`, version `u16`, sample rate `f64`, channels `u16` |
//! | 2 samples | first sample counter `u64`, count `u32`, channel-major `f32` samples |
//! | 3 end     | nothing |

use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::SampleWindow;

use super::source::SampleSource;

pub const STREAM_MAGIC: &[u8; 4] = b"EMGS";
pub const STREAM_VERSION: u16 = 1;
const KIND_HELLO: u8 = 1;
const KIND_SAMPLES: u8 = 2;
const KIND_END: u8 = 3;
const MAX_FRAME: u32 = 64 << 20;

#[derive(Clone, Debug, PartialEq)]
pub enum Frame {
    Hello { sample_rate_hz: f64, channels: u16 },
    Samples { counter: u64, count: u32, data: Vec<f32> },
    End,
}

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        match self {
            Frame::Hello {
                sample_rate_hz,
                channels,
            } => {
                payload.push(KIND_HELLO);
                payload.extend_from_slice(STREAM_MAGIC);
                payload.extend_from_slice(&STREAM_VERSION.to_le_bytes());
                payload.extend_from_slice(&sample_rate_hz.to_le_bytes());
                payload.extend_from_slice(&channels.to_le_bytes());
            }
            Frame::Samples { counter, count, data } => {
                payload.reserve(13 + data.len() * 4);
                payload.push(KIND_SAMPLES);
                payload.extend_from_slice(&counter.to_le_bytes());
                payload.extend_from_slice(&count.to_le_bytes());
                for x in data {
                    payload.extend_from_slice(&x.to_le_bytes());
                }
            }
            Frame::End => payload.push(KIND_END),
        }
        let mut out = (payload.len() as u32).to_le_bytes().to_vec();
        out.extend_from_slice(&payload);
        out
    }

    /// Reads one frame; `Ok(None)` on a clean end of stream.
    pub fn read<R: Read>(r: &mut R) -> Result<Option<Frame>> {
        let mut len = [0u8; 4];
        match r.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        let len = u32::from_le_bytes(len);
        if len == 0 || len > MAX_FRAME {
            return Err(Error::Malformed(format!("frame length {len}")));
        }
        let mut payload = vec![0u8; len as usize];
        r.read_exact(&mut payload)?;
        Frame::decode(&payload).map(Some)
    }

    fn decode(p: &[u8]) -> Result<Frame> {
        let short = || Error::Malformed(format!("short frame of {} bytes", p.len()));
        match p[0] {
            KIND_HELLO => {
                if p.len() != 17 {
                    return Err(short());
                }
                if &p[1..5] != STREAM_MAGIC {
                    return Err(Error::BadMagic { expected: "EMGS" });
                }
                let version = u16::from_le_bytes([p[5], p[6]]);
                if version != STREAM_VERSION {
                    return Err(Error::UnsupportedVersion(version as u32));
                }
                Ok(Frame::Hello {
                    sample_rate_hz: f64::from_le_bytes(p[7..15].try_into().expect("8 bytes")),
                    channels: u16::from_le_bytes([p[15], p[16]]),
                })
            }
            KIND_SAMPLES => {
                if p.len() < 13 || (p.len() - 13) % 4 != 0 {
                    return Err(short());
                }
                let counter = u64::from_le_bytes(p[1..9].try_into().expect("8 bytes"));
                let count = u32::from_le_bytes(p[9..13].try_into().expect("4 bytes"));
                let data = p[13..]
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                    .collect();
                Ok(Frame::Samples { counter, count, data })
            }
            KIND_END => Ok(Frame::End),
            k => Err(Error::Malformed(format!("unknown frame kind {k}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayOptions {
    /// Playback speed relative to real time; 0 sends as fast as possible.
    pub speed: f64,
    /// Samples per channel in each frame.
    pub block: usize,
    pub start_sample: u64,
    pub end_sample: Option<u64>,
    /// Samples `[start, start + len)` are skipped, producing a counter gap.
    pub gap: Option<(u64, u64)>,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self {
            speed: 1.0,
            block: 200,
            start_sample: 0,
            end_sample: None,
            gap: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayStats {
    pub frames: u64,
    pub samples: u64,
    /// The client closed the connection before the end.
    pub disconnected: bool,
}

/// Serves a [`SampleSource`] to TCP clients over the frame protocol.
pub struct ReplayServer {
    listener: TcpListener,
}

impl ReplayServer {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts one client and streams the source to it.
    pub fn serve_one(&self, source: &dyn SampleSource, options: &ReplayOptions) -> Result<ReplayStats> {
        let (stream, _) = self.listener.accept()?;
        stream.set_nodelay(true)?;
        replay(stream, source, options)
    }

    /// Serves clients one after another until the process exits.
    pub fn serve_forever(&self, source: &dyn SampleSource, options: &ReplayOptions) -> Result<()> {
        loop {
            self.serve_one(source, options)?;
        }
    }

    /// Serves a single client on a background thread.
    pub fn spawn_one(
        self,
        source: Arc<dyn SampleSource>,
        options: ReplayOptions,
    ) -> JoinHandle<Result<ReplayStats>> {
        std::thread::spawn(move || self.serve_one(source.as_ref(), &options))
    }
}

/// Streams `source` to `stream`, paced at `options.speed`.
pub fn replay(stream: TcpStream, source: &dyn SampleSource, options: &ReplayOptions) -> Result<ReplayStats> {
    if options.block == 0 {
        return Err(Error::InvalidParameter("replay block must be positive".into()));
    }
    let mut w = BufWriter::new(stream);
    let channels = source.channel_count();
    let rate = source.sample_rate_hz();
    let mut stats = ReplayStats::default();
    let send = |w: &mut BufWriter<TcpStream>, f: &Frame, stats: &mut ReplayStats| -> Result<bool> {
        match w.write_all(&f.encode()).and_then(|_| w.flush()) {
            Ok(()) => {
                stats.frames += 1;
                Ok(true)
            }
            Err(e) if is_disconnect(&e) => {
                stats.disconnected = true;
                Ok(false)
            }
            Err(e) => Err(e.into()),
        }
    };
    let hello = Frame::Hello {
        sample_rate_hz: rate,
        channels: channels as u16,
    };
    if !send(&mut w, &hello, &mut stats)? {
        return Ok(stats);
    }
    let end = options.end_sample.unwrap_or(source.len()).min(source.len());
    let began = Instant::now();
    let mut t = options.start_sample;
    let mut buf = Vec::new();
    while t < end {
        let mut len = options.block.min((end - t) as usize) as u64;
        if let Some((gs, gl)) = options.gap {
            if t >= gs && t < gs + gl {
                t = gs + gl;
                continue;
            }
            if t < gs && t + len > gs {
                len = gs - t;
            }
        }
        if options.speed > 0.0 {
            let due = Duration::from_secs_f64((t + len - options.start_sample) as f64 / rate / options.speed);
            if let Some(wait) = due.checked_sub(began.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        buf.resize(channels * len as usize, 0.0);
        source.read_block(t, len as usize, &mut buf)?;
        let frame = Frame::Samples {
            counter: t,
            count: len as u32,
            data: std::mem::take(&mut buf),
        };
        if !send(&mut w, &frame, &mut stats)? {
            return Ok(stats);
        }
        if let Frame::Samples { data, .. } = frame {
            buf = data;
        }
        stats.samples += len;
        t += len;
    }
    send(&mut w, &Frame::End, &mut stats)?;
    Ok(stats)
}

fn is_disconnect(e: &std::io::Error) -> bool {
    matches!(
        e.kind(),
        ErrorKind::BrokenPipe | ErrorKind::ConnectionReset | ErrorKind::ConnectionAborted
    )
}

/// A discontinuity in the received sample counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapEvent {
    pub expected: u64,
    pub received: u64,
}

#[derive(Debug)]
pub enum WindowFetch {
    Ready(SampleWindow),
    /// The window's last sample has not arrived yet.
    NotYet,
    /// The window spans a gap or has been overwritten in the ring.
    Unavailable,
    /// The stream ended before the window completed.
    Ended,
}

struct Ring {
    channels: usize,
    capacity: usize,
    data: Vec<f32>,
    next: u64,
    valid_from: u64,
    started: bool,
    gaps: Vec<GapEvent>,
    ended: bool,
    error: Option<String>,
}

impl Ring {
    fn push(&mut self, counter: u64, count: usize, data: &[f32]) {
        if !self.started {
            self.started = true;
            self.next = counter;
            self.valid_from = counter;
        } else if counter != self.next {
            self.gaps.push(GapEvent {
                expected: self.next,
                received: counter,
            });
            self.valid_from = counter;
        }
        for c in 0..self.channels {
            let src = &data[c * count..(c + 1) * count];
            let dst = &mut self.data[c * self.capacity..(c + 1) * self.capacity];
            for (i, x) in src.iter().enumerate() {
                dst[((counter + i as u64) % self.capacity as u64) as usize] = *x;
            }
        }
        self.next = counter + count as u64;
    }

    fn fetch(&self, end: u64, n: usize, rate: f64) -> WindowFetch {
        if end > self.next || !self.started {
            return if self.ended { WindowFetch::Ended } else { WindowFetch::NotYet };
        }
        let Some(start) = end.checked_sub(n as u64) else {
            return WindowFetch::Unavailable;
        };
        if start < self.valid_from || self.next - start > self.capacity as u64 {
            return WindowFetch::Unavailable;
        }
        let mut out = vec![0.0f32; self.channels * n];
        for c in 0..self.channels {
            let ring = &self.data[c * self.capacity..(c + 1) * self.capacity];
            for i in 0..n {
                out[c * n + i] = ring[((start + i as u64) % self.capacity as u64) as usize];
            }
        }
        match SampleWindow::from_f32(self.channels, n, &out, start as f64 / rate) {
            Ok(w) => WindowFetch::Ready(w),
            Err(_) => WindowFetch::Unavailable,
        }
    }
}

/// TCP stream consumer keeping the most recent samples in a ring buffer.
pub struct StreamClient {
    shared: Arc<(Mutex<Ring>, Condvar)>,
    sample_rate_hz: f64,
    channels: usize,
    reader: Option<JoinHandle<()>>,
    socket: TcpStream,
}

impl StreamClient {
    /// Connects, reads the hello frame and starts a reader thread keeping the
    /// last `capacity` samples per channel.
    pub fn connect(addr: impl ToSocketAddrs, capacity: usize) -> Result<Self> {
        let socket = TcpStream::connect(addr)?;
        socket.set_nodelay(true)?;
        let mut reader = BufReader::new(socket.try_clone()?);
        let (sample_rate_hz, channels) = match Frame::read(&mut reader)? {
            Some(Frame::Hello {
                sample_rate_hz,
                channels,
            }) => (sample_rate_hz, channels as usize),
            other => return Err(Error::Malformed(format!("expected hello frame, got {other:?}"))),
        };
        let shared = Arc::new((
            Mutex::new(Ring {
                channels,
                capacity,
                data: vec![0.0; channels * capacity],
                next: 0,
                valid_from: 0,
                started: false,
                gaps: Vec::new(),
                ended: false,
                error: None,
            }),
            Condvar::new(),
        ));
        let thread_shared = Arc::clone(&shared);
        let handle = std::thread::spawn(move || {
            let (lock, cv) = &*thread_shared;
            loop {
                let frame = Frame::read(&mut reader);
                let mut ring = lock.lock().expect("ring lock");
                match frame {
                    Ok(Some(Frame::Samples { counter, count, data })) if data.len() == count as usize * channels => {
                        ring.push(counter, count as usize, &data);
                    }
                    Ok(Some(Frame::Samples { .. })) => {
                        ring.error = Some("sample frame size does not match channel count".into());
                        ring.ended = true;
                    }
                    Ok(Some(Frame::Hello { .. })) => {}
                    Ok(Some(Frame::End)) | Ok(None) => ring.ended = true,
                    Err(e) => {
                        ring.error = Some(e.to_string());
                        ring.ended = true;
                    }
                }
                let ended = ring.ended;
                drop(ring);
                cv.notify_all();
                if ended {
                    break;
                }
            }
        });
        Ok(Self {
            shared,
            sample_rate_hz,
            channels,
            reader: Some(handle),
            socket,
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_count(&self) -> usize {
        self.channels
    }

    /// One past the newest received sample counter.
    pub fn latest(&self) -> u64 {
        self.shared.0.lock().expect("ring lock").next
    }

    pub fn is_ended(&self) -> bool {
        self.shared.0.lock().expect("ring lock").ended
    }

    pub fn error(&self) -> Option<String> {
        self.shared.0.lock().expect("ring lock").error.clone()
    }

    pub fn gaps(&self) -> Vec<GapEvent> {
        self.shared.0.lock().expect("ring lock").gaps.clone()
    }

    /// The `n`-sample window ending just before sample `end`, if available now.
    pub fn window_ending_at(&self, end: u64, n: usize) -> WindowFetch {
        self.shared.0.lock().expect("ring lock").fetch(end, n, self.sample_rate_hz)
    }

    /// Blocks until the window ending at `end` is complete, the stream ends,
    /// or `timeout` passes (then `NotYet`).
    pub fn wait_window(&self, end: u64, n: usize, timeout: Duration) -> WindowFetch {
        let deadline = Instant::now() + timeout;
        let (lock, cv) = &*self.shared;
        let mut ring = lock.lock().expect("ring lock");
        loop {
            match ring.fetch(end, n, self.sample_rate_hz) {
                WindowFetch::NotYet => {}
                other => return other,
            }
            let now = Instant::now();
            if now >= deadline {
                return WindowFetch::NotYet;
            }
            ring = cv.wait_timeout(ring, deadline - now).expect("ring lock").0;
        }
    }

    /// The newest complete `n`-sample window, with the counter it ends at.
    pub fn latest_window(&self, n: usize) -> Option<(u64, SampleWindow)> {
        let ring = self.shared.0.lock().expect("ring lock");
        match ring.fetch(ring.next, n, self.sample_rate_hz) {
            WindowFetch::Ready(w) => Some((ring.next, w)),
            _ => None,
        }
    }
}

impl Drop for StreamClient {
    fn drop(&mut self) {
        let _ = self.socket.shutdown(std::net::Shutdown::Both);
        if let Some(h) = self.reader.take() {
            let _ = h.join();
        }
    }
}

/// Sample counter one past the last sample of decode tick `k`'s window when
/// ticks are paced by stream time.
pub fn tick_window_end(k: u64, n: usize, sample_rate_hz: f64, tick_rate_hz: f64) -> u64 {
    n as u64 + (k as f64 * sample_rate_hz / tick_rate_hz).round() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Recording;

    fn ramp_recording(channels: usize, n: usize) -> Recording {
        let samples = (0..channels * n).map(|i| i as f32 * 1e-3).collect();
        Recording::new(4000.0, channels, samples).unwrap()
    }

    #[test]
    fn frames_round_trip() {
        for f in [
            Frame::Hello {
                sample_rate_hz: 4000.0,
                channels: 64,
            },
            Frame::Samples {
                counter: 12345,
                count: 2,
                data: vec![1.0, -2.5, 3.25, 0.0],
            },
            Frame::End,
        ] {
            let bytes = f.encode();
            assert_eq!(Frame::read(&mut &bytes[..]).unwrap(), Some(f));
        }
        assert!(Frame::read(&mut &[0u8; 0][..]).unwrap().is_none());
        assert!(Frame::read(&mut &[1, 0, 0, 0, 9][..]).is_err());
    }

    #[test]
    fn streamed_samples_equal_source() {
        let rec = Arc::new(ramp_recording(3, 5000));
        let server = ReplayServer::bind("127.0.0.1:0").unwrap();
        let addr = server.local_addr().unwrap();
        let handle = server.spawn_one(
            rec.clone(),
            ReplayOptions {
                speed: 0.0,
                block: 333,
                ..ReplayOptions::default()
            },
        );
        let client = StreamClient::connect(addr, 10_000).unwrap();
        assert_eq!(client.channel_count(), 3);
        match client.wait_window(5000, 5000, Duration::from_secs(10)) {
            WindowFetch::Ready(w) => {
                for c in 0..3 {
                    let expected: Vec<f64> = rec.channel(c).iter().map(|&x| x as f64).collect();
                    assert_eq!(w.channel(c), &expected[..]);
                }
            }
            other => panic!("unexpected {other:?}"),
        }
        let stats = handle.join().unwrap().unwrap();
        assert_eq!(stats.samples, 5000);
        assert!(client.gaps().is_empty());
    }

    #[test]
    fn windows_never_span_a_gap() {
        let rec = Arc::new(ramp_recording(2, 6000));
        let server = ReplayServer::bind("127.0.0.1:0").unwrap();
        let addr = server.local_addr().unwrap();
        let handle = server.spawn_one(
            rec,
            ReplayOptions {
                speed: 0.0,
                block: 250,
                gap: Some((3000, 500)),
                ..ReplayOptions::default()
            },
        );
        let client = StreamClient::connect(addr, 10_000).unwrap();
        handle.join().unwrap().unwrap();
        while !client.is_ended() {
            std::thread::sleep(Duration::from_millis(5));
        }
        assert_eq!(
            client.gaps(),
            vec![GapEvent {
                expected: 3000,
                received: 3500
            }]
        );
        assert!(matches!(client.window_ending_at(3000, 1000), WindowFetch::Unavailable));
        assert!(matches!(client.window_ending_at(4000, 1000), WindowFetch::Unavailable));
        assert!(matches!(client.window_ending_at(4500, 1000), WindowFetch::Ready(_)));
        assert!(matches!(client.window_ending_at(7000, 1000), WindowFetch::Ended));
    }

    #[test]
    fn tick_schedule() {
        assert_eq!(tick_window_end(0, 1000, 4000.0, 6.0), 1000);
        assert_eq!(tick_window_end(1, 1000, 4000.0, 6.0), 1667);
        assert_eq!(tick_window_end(6, 1000, 4000.0, 6.0), 5000);
    }
}
