//! UDP transport for command datagrams.

use std::collections::HashMap;
use std::io::ErrorKind;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::time::Duration;

use crate::error::{Result, RobotError};
use crate::joint::JointCommand;
use crate::sim::RobotState;
use crate::wire::{encode_command, parse_command, SeqFilter};

pub struct CommandSender {
    socket: UdpSocket,
    target: SocketAddr,
    next_seq: u32,
}

impl CommandSender {
    pub fn connect(target: impl ToSocketAddrs) -> Result<Self> {
        let target = target
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| std::io::Error::new(ErrorKind::InvalidInput, "no address"))?;
        let bind: SocketAddr = if target.is_ipv4() {
            "0.0.0.0:0".parse().unwrap()
        } else {
            "[::]:0".parse().unwrap()
        };
        Ok(Self {
            socket: UdpSocket::bind(bind)?,
            target,
            next_seq: 0,
        })
    }

    pub fn target(&self) -> SocketAddr {
        self.target
    }

    /// Sends one datagram and returns the sequence number used.
    pub fn send(&mut self, cmd: &JointCommand) -> Result<u32> {
        let seq = self.next_seq;
        let mut line = encode_command(cmd, seq);
        line.push(b'\n');
        self.socket.send_to(&line, self.target)?;
        self.next_seq = self.next_seq.wrapping_add(1);
        Ok(seq)
    }

    /// Most recent state snapshot the simulator sent back, if any arrived
    /// since the last call. Unparseable replies are ignored.
    pub fn poll_state(&mut self) -> Result<Option<RobotState>> {
        self.socket.set_nonblocking(true)?;
        let mut buf = vec![0u8; 65_536];
        let mut latest = None;
        loop {
            match self.socket.recv_from(&mut buf) {
                Ok((n, _)) => {
                    if let Ok(state) = serde_json::from_slice::<RobotState>(&buf[..n]) {
                        latest = Some(state);
                    }
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => break,
                // Reported by some platforms when the simulator is not listening.
                Err(e) if e.kind() == ErrorKind::ConnectionRefused => break,
                Err(e) => return Err(RobotError::Io(e)),
            }
        }
        Ok(latest)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReceiverStats {
    pub accepted: u64,
    pub stale: u64,
    pub malformed: u64,
}

/// Receives, parses and sequence-filters command datagrams. Sequence numbers
/// are tracked per sender address, so a restarted sender starting again at 0
/// is accepted. Malformed and stale datagrams are counted and skipped.
pub struct CommandReceiver {
    socket: UdpSocket,
    filters: HashMap<SocketAddr, SeqFilter>,
    stats: ReceiverStats,
    last_error: Option<String>,
    last_peer: Option<SocketAddr>,
    buf: Vec<u8>,
}

impl CommandReceiver {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<Self> {
        Ok(Self {
            socket: UdpSocket::bind(addr)?,
            filters: HashMap::new(),
            stats: ReceiverStats::default(),
            last_error: None,
            last_peer: None,
            buf: vec![0; 65_536],
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.socket.local_addr()?)
    }

    pub fn stats(&self) -> ReceiverStats {
        self.stats
    }

    pub fn last_error(&self) -> Option<&str> {
        self.last_error.as_deref()
    }

    /// Waits up to `timeout` for the next valid command.
    pub fn recv_timeout(&mut self, timeout: Duration) -> Result<Option<(u32, JointCommand)>> {
        let deadline = std::time::Instant::now() + timeout;
        self.socket.set_nonblocking(false)?;
        loop {
            let left = deadline.saturating_duration_since(std::time::Instant::now());
            if left.is_zero() {
                return Ok(None);
            }
            self.socket.set_read_timeout(Some(left))?;
            match self.socket.recv_from(&mut self.buf) {
                Ok((n, peer)) => {
                    if let Some(c) = self.handle(n, peer) {
                        return Ok(Some(c));
                    }
                }
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => return Ok(None),
                Err(e) => return Err(RobotError::Io(e)),
            }
        }
    }

    /// Returns every valid command already queued, without blocking.
    pub fn drain(&mut self) -> Result<Vec<(u32, JointCommand)>> {
        self.socket.set_nonblocking(true)?;
        let mut out = Vec::new();
        loop {
            match self.socket.recv_from(&mut self.buf) {
                Ok((n, peer)) => out.extend(self.handle(n, peer)),
                Err(e) if e.kind() == ErrorKind::WouldBlock => break,
                Err(e) => return Err(RobotError::Io(e)),
            }
        }
        Ok(out)
    }

    /// Sends a state snapshot to the sender of the last valid command.
    /// Returns false when no command has arrived yet.
    pub fn send_state(&self, state: &RobotState) -> Result<bool> {
        let Some(peer) = self.last_peer else {
            return Ok(false);
        };
        let bytes = serde_json::to_vec(state)?;
        match self.socket.send_to(&bytes, peer) {
            Ok(_) => Ok(true),
            Err(e) if e.kind() == ErrorKind::ConnectionRefused => Ok(false),
            Err(e) => Err(RobotError::Io(e)),
        }
    }

    fn handle(&mut self, n: usize, peer: SocketAddr) -> Option<(u32, JointCommand)> {
        match parse_command(&self.buf[..n]) {
            Ok((seq, cmd)) => {
                self.last_peer = Some(peer);
                if self.filters.entry(peer).or_default().accept(seq) {
                    self.stats.accepted += 1;
                    Some((seq, cmd))
                } else {
                    self.stats.stale += 1;
                    None
                }
            }
            Err(e) => {
                self.stats.malformed += 1;
                self.last_error = Some(e.to_string());
                None
            }
        }
    }
}

/// Runs `sim` against datagrams arriving at `rx` until `stop` is set. Each
/// tick applies every queued command in order, advances one command period
/// and sends the new state back to the commanding peer.
pub fn serve_simulator(
    rx: &mut CommandReceiver,
    sim: &mut crate::sim::Simulator,
    interval: Duration,
    stop: &std::sync::atomic::AtomicBool,
    mut on_tick: impl FnMut(&RobotState),
) -> Result<()> {
    use std::sync::atomic::Ordering;
    let dt = sim.config().tick_dt();
    let mut next = std::time::Instant::now() + interval;
    while !stop.load(Ordering::Relaxed) {
        std::thread::sleep(next.saturating_duration_since(std::time::Instant::now()));
        next += interval;
        for (_, cmd) in rx.drain()? {
            sim.apply(&cmd);
        }
        let state = sim.advance(dt).clone();
        rx.send_state(&state)?;
        on_tick(&state);
    }
    Ok(())
}
