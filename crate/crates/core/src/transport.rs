//! Channels between the two parties and the binary frame codec.
//!
//! A channel has two ordered lanes: the quantum lane carries qubits, the
//! classical lane carries everything else. The in-process channel keeps
//! qubits opaque to the receiver. The TCP channel serializes the full state
//! description, so it is only suitable for honest demonstration runs.
//!
//! Frame layout (big-endian):
//!
//! ```text
//! version:u8 = 0x01 | type:u8 | round:u32 | length:u16 | payload[length]
//! ```

use std::cell::RefCell;
use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::rc::Rc;
use std::time::Duration;

use thiserror::Error;

use crate::hashperm::BitString;
use crate::protocol::{Message, Verdict};
use crate::quantum::{Qubit, QubitState};

pub const FRAME_VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 8;
pub const DEFAULT_PORT: u16 = 7408;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

pub const TYPE_QUBIT: u8 = 0x01;
pub const TYPE_ANNOUNCE_RECEIVER: u8 = 0x02;
pub const TYPE_ANNOUNCE_SENDER: u8 = 0x03;
pub const TYPE_ABORT: u8 = 0x04;
pub const TYPE_HASH_PARAMS_DIGEST: u8 = 0x05;
pub const TYPE_RESULT: u8 = 0x06;
pub const TYPE_RERUN_MASK: u8 = 0x07;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("unsupported frame version {0:#04x}")]
    BadVersion(u8),
    #[error("unknown frame type {0:#04x}")]
    BadType(u8),
    #[error("payload length mismatch for type {frame_type:#04x}: expected {expected}, got {actual}")]
    LengthMismatch {
        frame_type: u8,
        expected: usize,
        actual: usize,
    },
    #[error("malformed payload: {0}")]
    BadPayload(String),
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("channel closed")]
    Closed,
    #[error("no message pending on the {0:?} lane")]
    Pending(Lane),
    #[error("expected a message on the {expected:?} lane, got {got:?}")]
    WrongLane { expected: Lane, got: Lane },
    #[error("timed out waiting for peer")]
    Timeout,
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("payload of {0} bytes does not fit in a frame")]
    Oversized(usize),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    Quantum,
    Classical,
}

impl Lane {
    fn index(self) -> usize {
        match self {
            Lane::Quantum => 0,
            Lane::Classical => 1,
        }
    }
}

/// One side of a channel, with a strictly sequential send/receive contract.
pub trait Endpoint {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError>;

    /// Next message on `lane`. Non-blocking endpoints return
    /// [`TransportError::Pending`] when nothing is queued.
    fn recv(&mut self, lane: Lane) -> Result<Message, TransportError>;

    fn close(&mut self);
}

#[derive(Debug, Default)]
struct Queues {
    // [destination side][lane]
    lanes: [[VecDeque<Message>; 2]; 2],
    closed: bool,
}

/// In-process endpoint. Both endpoints of a pair share the queues; neither
/// is `Send`, so a pair lives on one thread.
#[derive(Debug)]
pub struct InProcessEndpoint {
    side: usize,
    queues: Rc<RefCell<Queues>>,
}

impl Endpoint for InProcessEndpoint {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        let mut q = self.queues.borrow_mut();
        if q.closed {
            return Err(TransportError::Closed);
        }
        q.lanes[1 - self.side][msg.lane().index()].push_back(msg.clone());
        Ok(())
    }

    fn recv(&mut self, lane: Lane) -> Result<Message, TransportError> {
        let mut q = self.queues.borrow_mut();
        match q.lanes[self.side][lane.index()].pop_front() {
            Some(m) => Ok(m),
            None if q.closed => Err(TransportError::Closed),
            None => Err(TransportError::Pending(lane)),
        }
    }

    fn close(&mut self) {
        self.queues.borrow_mut().closed = true;
    }
}

/// A connected pair of in-process endpoints, Alice's first.
pub fn channel_pair_inprocess() -> (InProcessEndpoint, InProcessEndpoint) {
    let queues = Rc::new(RefCell::new(Queues::default()));
    (
        InProcessEndpoint {
            side: 0,
            queues: Rc::clone(&queues),
        },
        InProcessEndpoint { side: 1, queues },
    )
}

/// Both ends of an in-process channel, as used by the session driver.
#[derive(Debug)]
pub struct InProcessChannel {
    pub alice: InProcessEndpoint,
    pub bob: InProcessEndpoint,
}

impl InProcessChannel {
    pub fn new() -> Self {
        let (alice, bob) = channel_pair_inprocess();
        Self { alice, bob }
    }
}

impl Default for InProcessChannel {
    fn default() -> Self {
        Self::new()
    }
}

fn put_header(out: &mut Vec<u8>, frame_type: u8, round: u32, payload_len: usize) {
    out.push(FRAME_VERSION);
    out.push(frame_type);
    out.extend_from_slice(&round.to_be_bytes());
    out.extend_from_slice(&(payload_len as u16).to_be_bytes());
}

fn frame_parts(msg: &Message) -> (u8, u32, Vec<u8>) {
    match msg {
        Message::Qubit { round, qubit } => {
            let s = qubit.state();
            let mut p = Vec::with_capacity(16);
            p.extend_from_slice(&s.amp0().to_be_bytes());
            p.extend_from_slice(&s.amp1().to_be_bytes());
            (TYPE_QUBIT, *round, p)
        }
        Message::AnnounceReceiver { round, gamma } => (TYPE_ANNOUNCE_RECEIVER, *round, vec![*gamma]),
        Message::AnnounceSender { round, gamma } => (TYPE_ANNOUNCE_SENDER, *round, vec![*gamma]),
        Message::Abort { round } => (TYPE_ABORT, *round, Vec::new()),
        Message::HashParamsDigest { length, digest } => {
            (TYPE_HASH_PARAMS_DIGEST, *length, digest.to_vec())
        }
        Message::Result { round, verdict } => (
            TYPE_RESULT,
            *round,
            vec![match verdict {
                Verdict::Equal => 0,
                Verdict::NotEqual => 1,
            }],
        ),
        Message::RerunMask { run, mask } => (
            TYPE_RERUN_MASK,
            *run,
            mask.bits().iter().map(|&b| b as u8).collect(),
        ),
    }
}

/// Serialize one message as a frame.
///
/// # Errors
///
/// [`TransportError::Oversized`] if the payload exceeds 65535 bytes (only
/// possible for rerun masks).
pub fn encode_frame(msg: &Message) -> Result<Vec<u8>, TransportError> {
    let (frame_type, round, payload) = frame_parts(msg);
    if payload.len() > u16::MAX as usize {
        return Err(TransportError::Oversized(payload.len()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    put_header(&mut out, frame_type, round, payload.len());
    out.extend_from_slice(&payload);
    Ok(out)
}

struct Header {
    frame_type: u8,
    round: u32,
    length: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, FrameError> {
    if bytes.len() < HEADER_LEN {
        return Err(FrameError::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    if bytes[0] != FRAME_VERSION {
        return Err(FrameError::BadVersion(bytes[0]));
    }
    let frame_type = bytes[1];
    if !(TYPE_QUBIT..=TYPE_RERUN_MASK).contains(&frame_type) {
        return Err(FrameError::BadType(frame_type));
    }
    Ok(Header {
        frame_type,
        round: u32::from_be_bytes(bytes[2..6].try_into().unwrap()),
        length: u16::from_be_bytes(bytes[6..8].try_into().unwrap()) as usize,
    })
}

fn expect_len(frame_type: u8, payload: &[u8], expected: usize) -> Result<(), FrameError> {
    if payload.len() != expected {
        return Err(FrameError::LengthMismatch {
            frame_type,
            expected,
            actual: payload.len(),
        });
    }
    Ok(())
}

fn bit_payload(frame_type: u8, payload: &[u8]) -> Result<u8, FrameError> {
    expect_len(frame_type, payload, 1)?;
    match payload[0] {
        b @ (0 | 1) => Ok(b),
        other => Err(FrameError::BadPayload(format!("bit value {other}"))),
    }
}

fn decode_body(header: &Header, payload: &[u8]) -> Result<Message, FrameError> {
    let t = header.frame_type;
    let round = header.round;
    Ok(match t {
        TYPE_QUBIT => {
            expect_len(t, payload, 16)?;
            let amp0 = f64::from_be_bytes(payload[..8].try_into().unwrap());
            let amp1 = f64::from_be_bytes(payload[8..].try_into().unwrap());
            let state =
                QubitState::new(amp0, amp1).map_err(|e| FrameError::BadPayload(e.to_string()))?;
            Message::Qubit {
                round,
                qubit: Qubit::from(state),
            }
        }
        TYPE_ANNOUNCE_RECEIVER => Message::AnnounceReceiver {
            round,
            gamma: bit_payload(t, payload)?,
        },
        TYPE_ANNOUNCE_SENDER => Message::AnnounceSender {
            round,
            gamma: bit_payload(t, payload)?,
        },
        TYPE_ABORT => {
            expect_len(t, payload, 0)?;
            Message::Abort { round }
        }
        TYPE_HASH_PARAMS_DIGEST => {
            expect_len(t, payload, 8)?;
            Message::HashParamsDigest {
                length: round,
                digest: payload.try_into().unwrap(),
            }
        }
        TYPE_RESULT => Message::Result {
            round,
            verdict: match bit_payload(t, payload)? {
                0 => Verdict::Equal,
                _ => Verdict::NotEqual,
            },
        },
        TYPE_RERUN_MASK => {
            let bits = payload
                .iter()
                .map(|&b| match b {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(FrameError::BadPayload(format!("mask bit {other}"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Message::RerunMask {
                run: round,
                mask: BitString::from_bits(bits)
                    .map_err(|e| FrameError::BadPayload(e.to_string()))?,
            }
        }
        other => return Err(FrameError::BadType(other)),
    })
}

/// Parse exactly one frame.
pub fn decode_frame(bytes: &[u8]) -> Result<Message, FrameError> {
    let header = parse_header(bytes)?;
    let body = &bytes[HEADER_LEN..];
    if body.len() < header.length {
        return Err(FrameError::Truncated {
            needed: HEADER_LEN + header.length,
            available: bytes.len(),
        });
    }
    if body.len() > header.length {
        return Err(FrameError::LengthMismatch {
            frame_type: header.frame_type,
            expected: header.length,
            actual: body.len(),
        });
    }
    decode_body(&header, body)
}

/// Read one frame from a byte stream.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Message, TransportError> {
    let mut head = [0u8; HEADER_LEN];
    read_exact(reader, &mut head)?;
    let header = parse_header(&head)?;
    let mut payload = vec![0u8; header.length];
    read_exact(reader, &mut payload)?;
    Ok(decode_body(&header, &payload)?)
}

fn read_exact<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<(), TransportError> {
    reader.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof
        | io::ErrorKind::ConnectionReset
        | io::ErrorKind::ConnectionAborted
        | io::ErrorKind::BrokenPipe => TransportError::Closed,
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => TransportError::Timeout,
        _ => TransportError::Io(e),
    })
}

/// Endpoint over a single TCP connection; both lanes share the stream.
#[derive(Debug)]
pub struct TcpEndpoint {
    stream: TcpStream,
    closed: bool,
}

impl TcpEndpoint {
    pub fn from_stream(stream: TcpStream, timeout: Duration) -> Result<Self, TransportError> {
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;
        Ok(Self {
            stream,
            closed: false,
        })
    }

    pub fn accept(listener: &TcpListener, timeout: Duration) -> Result<Self, TransportError> {
        let (stream, _) = listener.accept()?;
        Self::from_stream(stream, timeout)
    }

    pub fn connect<A: ToSocketAddrs>(addr: A, timeout: Duration) -> Result<Self, TransportError> {
        Self::from_stream(TcpStream::connect(addr)?, timeout)
    }
}

/// How to obtain a TCP endpoint.
#[derive(Debug, Clone)]
pub enum TcpMode {
    Listen(String),
    Connect(String),
}

/// Open a TCP endpoint, either by accepting one connection on a listen
/// address or by connecting out.
pub fn channel_pair_tcp(mode: &TcpMode, timeout: Duration) -> Result<TcpEndpoint, TransportError> {
    match mode {
        TcpMode::Listen(addr) => TcpEndpoint::accept(&TcpListener::bind(addr)?, timeout),
        TcpMode::Connect(addr) => TcpEndpoint::connect(addr.as_str(), timeout),
    }
}

impl Endpoint for TcpEndpoint {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        let frame = encode_frame(msg)?;
        self.stream.write_all(&frame).map_err(|e| match e.kind() {
            io::ErrorKind::BrokenPipe | io::ErrorKind::ConnectionReset => TransportError::Closed,
            _ => TransportError::Io(e),
        })?;
        Ok(())
    }

    fn recv(&mut self, lane: Lane) -> Result<Message, TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        let msg = read_frame(&mut self.stream)?;
        if msg.lane() != lane {
            return Err(TransportError::WrongLane {
                expected: lane,
                got: msg.lane(),
            });
        }
        Ok(msg)
    }

    fn close(&mut self) {
        if !self.closed {
            self.closed = true;
            let _ = self.stream.shutdown(std::net::Shutdown::Both);
        }
    }
}
