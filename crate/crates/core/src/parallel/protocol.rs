//! Length-prefixed binary messages between the coordinator and workers.
//!
//! Frame: 4-byte big-endian length of the rest, one type byte, payload.
//! All integers are big-endian.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::frontend::StmtId;
use crate::interpreter::Mode;

pub const VERSION: u8 = 0x01;
pub const TYPE_REQUEST: u8 = 0x10;
pub const TYPE_RESPONSE: u8 = 0x20;
pub const TYPE_ERROR: u8 = 0x30;
pub const TYPE_HANDSHAKE: u8 = 0x40;

/// Refuse frames above this size.
pub const MAX_FRAME: usize = 1 << 30;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("malformed message: {0}")]
    Malformed(String),
}

/// Analysis settings a worker must share with the coordinator.
#[derive(Debug, Clone, PartialEq)]
pub struct WireConfig {
    pub ladder: Vec<f64>,
    pub widening_delay: u32,
    pub narrowing_passes: u32,
    pub iteration_bound: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Handshake {
    pub program_digest: [u8; 32],
    pub self_test: [u64; 8],
    pub version: u8,
    pub config: WireConfig,
    /// Program text; empty in the worker's reply.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub task: u64,
    pub mode: Mode,
    pub stmt: StmtId,
    pub branches: Vec<u16>,
    pub base_digest: [u8; 32],
    /// Canonical bytes of the base, omitted when the worker has it cached.
    pub env: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchRecord {
    pub index: u16,
    pub micros: u64,
    /// Encoded delta from the base to the branch result.
    pub patch: Vec<u8>,
    /// Canonical bytes of the branch's warnings.
    pub warnings: Vec<u8>,
    /// Loop invariants found in the branch, as canonical environments.
    pub invariants: Vec<(StmtId, Vec<u8>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub task: u64,
    pub records: Vec<BranchRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Handshake(Handshake),
    Request(Request),
    Response(Response),
    Error { task: u64, message: String },
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_be_bytes());
    out.extend_from_slice(b);
}

impl Message {
    pub fn type_byte(&self) -> u8 {
        match self {
            Message::Handshake(_) => TYPE_HANDSHAKE,
            Message::Request(_) => TYPE_REQUEST,
            Message::Response(_) => TYPE_RESPONSE,
            Message::Error { .. } => TYPE_ERROR,
        }
    }

    /// Payload bytes, without framing.
    pub fn payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Message::Handshake(h) => {
                out.extend_from_slice(&h.program_digest);
                for v in h.self_test {
                    out.extend_from_slice(&v.to_be_bytes());
                }
                out.push(h.version);
                out.extend_from_slice(&(h.config.ladder.len() as u32).to_be_bytes());
                for v in &h.config.ladder {
                    out.extend_from_slice(&v.to_bits().to_be_bytes());
                }
                out.extend_from_slice(&h.config.widening_delay.to_be_bytes());
                out.extend_from_slice(&h.config.narrowing_passes.to_be_bytes());
                out.extend_from_slice(&h.config.iteration_bound.to_be_bytes());
                put_bytes(&mut out, h.source.as_bytes());
            }
            Message::Request(r) => {
                out.extend_from_slice(&r.task.to_be_bytes());
                out.push(r.mode.code());
                out.extend_from_slice(&r.stmt.to_be_bytes());
                out.extend_from_slice(&(r.branches.len() as u16).to_be_bytes());
                for b in &r.branches {
                    out.extend_from_slice(&b.to_be_bytes());
                }
                out.extend_from_slice(&r.base_digest);
                match &r.env {
                    Some(e) => {
                        out.push(1);
                        out.extend_from_slice(e);
                    }
                    None => out.push(0),
                }
            }
            Message::Response(r) => {
                out.extend_from_slice(&r.task.to_be_bytes());
                out.extend_from_slice(&(r.records.len() as u16).to_be_bytes());
                for rec in &r.records {
                    out.extend_from_slice(&rec.index.to_be_bytes());
                    out.extend_from_slice(&rec.micros.to_be_bytes());
                    put_bytes(&mut out, &rec.patch);
                    put_bytes(&mut out, &rec.warnings);
                    out.extend_from_slice(&(rec.invariants.len() as u32).to_be_bytes());
                    for (id, env) in &rec.invariants {
                        out.extend_from_slice(&id.to_be_bytes());
                        put_bytes(&mut out, env);
                    }
                }
            }
            Message::Error { task, message } => {
                out.extend_from_slice(&task.to_be_bytes());
                put_bytes(&mut out, message.as_bytes());
            }
        }
        out
    }

    /// Full frame: length, type byte, payload.
    pub fn encode(&self) -> Vec<u8> {
        let payload = self.payload();
        let mut out = Vec::with_capacity(payload.len() + 5);
        out.extend_from_slice(&(payload.len() as u32 + 1).to_be_bytes());
        out.push(self.type_byte());
        out.extend_from_slice(&payload);
        out
    }

    /// Decode a frame body (type byte and payload).
    pub fn decode(body: &[u8]) -> Result<Message, ProtocolError> {
        let (&ty, payload) = body.split_first().ok_or_else(|| malformed("empty frame"))?;
        let mut c = Cursor { b: payload, pos: 0 };
        let msg = match ty {
            TYPE_HANDSHAKE => {
                let program_digest = c.array32()?;
                let mut self_test = [0u64; 8];
                for v in &mut self_test {
                    *v = c.u64()?;
                }
                let version = c.u8()?;
                let n = c.u32()? as usize;
                let mut ladder = Vec::with_capacity(n.min(1024));
                for _ in 0..n {
                    ladder.push(f64::from_bits(c.u64()?));
                }
                let config = WireConfig {
                    ladder,
                    widening_delay: c.u32()?,
                    narrowing_passes: c.u32()?,
                    iteration_bound: c.u32()?,
                };
                let source = String::from_utf8(c.bytes()?.to_vec()).map_err(|_| malformed("source is not UTF-8"))?;
                Message::Handshake(Handshake { program_digest, self_test, version, config, source })
            }
            TYPE_REQUEST => {
                let task = c.u64()?;
                let mode = Mode::from_code(c.u8()?).ok_or_else(|| malformed("bad mode"))?;
                let stmt = c.u32()?;
                let n = c.u16()? as usize;
                let mut branches = Vec::with_capacity(n);
                for _ in 0..n {
                    branches.push(c.u16()?);
                }
                let base_digest = c.array32()?;
                let env = match c.u8()? {
                    0 => None,
                    1 => Some(c.rest().to_vec()),
                    _ => return Err(malformed("bad env flag")),
                };
                Message::Request(Request { task, mode, stmt, branches, base_digest, env })
            }
            TYPE_RESPONSE => {
                let task = c.u64()?;
                let n = c.u16()? as usize;
                let mut records = Vec::with_capacity(n);
                for _ in 0..n {
                    let index = c.u16()?;
                    let micros = c.u64()?;
                    let patch = c.bytes()?.to_vec();
                    let warnings = c.bytes()?.to_vec();
                    let m = c.u32()? as usize;
                    let mut invariants = Vec::with_capacity(m.min(1024));
                    for _ in 0..m {
                        let id = c.u32()?;
                        invariants.push((id, c.bytes()?.to_vec()));
                    }
                    records.push(BranchRecord { index, micros, patch, warnings, invariants });
                }
                Message::Response(Response { task, records })
            }
            TYPE_ERROR => {
                let task = c.u64()?;
                let message = String::from_utf8_lossy(c.bytes()?).into_owned();
                Message::Error { task, message }
            }
            t => return Err(malformed(&format!("unknown message type {t:#04x}"))),
        };
        if c.pos != payload.len() {
            return Err(malformed("trailing bytes"));
        }
        Ok(msg)
    }
}

fn malformed(m: &str) -> ProtocolError {
    ProtocolError::Malformed(m.to_string())
}

struct Cursor<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        let s = self.b.get(self.pos..self.pos + n).ok_or_else(|| malformed("truncated payload"))?;
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ProtocolError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ProtocolError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ProtocolError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn array32(&mut self) -> Result<[u8; 32], ProtocolError> {
        Ok(self.take(32)?.try_into().unwrap())
    }

    fn bytes(&mut self) -> Result<&'a [u8], ProtocolError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.b[self.pos..];
        self.pos = self.b.len();
        s
    }
}

/// Write one framed message.
pub fn write_message(w: &mut impl Write, m: &Message) -> Result<(), ProtocolError> {
    w.write_all(&m.encode())?;
    w.flush()?;
    Ok(())
}

/// Read one framed message. A clean end of stream before the first byte
/// yields `None`.
pub fn read_message(r: &mut impl Read) -> Result<Option<Message>, ProtocolError> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(malformed("truncated frame header")),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let n = u32::from_be_bytes(len) as usize;
    if n == 0 || n > MAX_FRAME {
        return Err(malformed("bad frame length"));
    }
    let mut body = vec![0u8; n];
    r.read_exact(&mut body)?;
    Message::decode(&body).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(m: Message) {
        let bytes = m.encode();
        let back = read_message(&mut bytes.as_slice()).unwrap().unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn messages_round_trip() {
        round_trip(Message::Handshake(Handshake {
            program_digest: [7; 32],
            self_test: [1, 2, 3, 4, 5, 6, 7, u64::MAX],
            version: VERSION,
            config: WireConfig { ladder: vec![1.0, -10.0], widening_delay: 2, narrowing_passes: 2, iteration_bound: 1000 },
            source: "void main() { }".into(),
        }));
        round_trip(Message::Request(Request {
            task: 9,
            mode: Mode::Report,
            stmt: 17,
            branches: vec![0, 3],
            base_digest: [1; 32],
            env: Some(vec![1, 0]),
        }));
        round_trip(Message::Request(Request {
            task: 10,
            mode: Mode::Iterate,
            stmt: 1,
            branches: vec![],
            base_digest: [1; 32],
            env: None,
        }));
        round_trip(Message::Response(Response {
            task: 9,
            records: vec![BranchRecord {
                index: 3,
                micros: 1234,
                patch: vec![1, 2, 3],
                warnings: vec![0, 0, 0, 0],
                invariants: vec![(5, vec![1, 0])],
            }],
        }));
        round_trip(Message::Error { task: 2, message: "base not cached".into() });
    }

    #[test]
    fn framing_layout() {
        let m = Message::Error { task: 1, message: "x".into() };
        let b = m.encode();
        assert_eq!(&b[..4], &(b.len() as u32 - 4).to_be_bytes());
        assert_eq!(b[4], TYPE_ERROR);
        let mut r: &[u8] = &[];
        assert!(read_message(&mut r).unwrap().is_none());
        assert!(Message::decode(&[0x77]).is_err());
        assert!(read_message(&mut &b[..b.len() - 1]).is_err());
    }
}
