//! Worker side of the protocol: analyze requested branches from a (cached)
//! base state and answer with deltas.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::TcpListener;

use crate::absdomain::{rounding, AbstractEnv, Ladder};
use crate::frontend::{compile, ValidProgram};
use crate::interpreter::{AnalysisConfig, Analyzer};

use super::executor::wire_patch;
use super::protocol::{read_message, write_message, BranchRecord, Handshake, Message, ProtocolError, Request, Response, WireConfig, VERSION};

/// Bit patterns of the rounding self-test on this machine.
pub fn self_test_bits() -> [u64; 8] {
    rounding::self_test_vector().map(f64::to_bits)
}

impl WireConfig {
    pub fn from_config(c: &AnalysisConfig) -> WireConfig {
        WireConfig {
            ladder: c.ladder.values().to_vec(),
            widening_delay: c.widening_delay,
            narrowing_passes: c.narrowing_passes,
            iteration_bound: c.iteration_bound,
        }
    }

    pub fn to_config(&self) -> AnalysisConfig {
        AnalysisConfig {
            ladder: Ladder::new(self.ladder.iter().copied()),
            widening_delay: self.widening_delay,
            narrowing_passes: self.narrowing_passes,
            iteration_bound: self.iteration_bound,
            observe: false,
        }
    }
}

/// Per-connection worker state.
#[derive(Default)]
pub struct WorkerSession {
    program: Option<ValidProgram>,
    config: AnalysisConfig,
    cache: Option<([u8; 32], AbstractEnv)>,
}

/// What to do after handling a message.
pub enum Reply {
    Send(Message),
    /// Send the message, then close the connection.
    Close(Message),
}

impl WorkerSession {
    pub fn new() -> WorkerSession {
        WorkerSession::default()
    }

    pub fn handle(&mut self, m: Message) -> Reply {
        match m {
            Message::Handshake(h) => self.handshake(h),
            Message::Request(r) => match &self.program {
                None => Reply::Close(Message::Error { task: r.task, message: "request before handshake".into() }),
                Some(_) => match self.request(&r) {
                    Ok(resp) => Reply::Send(Message::Response(resp)),
                    Err(message) => Reply::Send(Message::Error { task: r.task, message }),
                },
            },
            other => Reply::Close(Message::Error { task: 0, message: format!("unexpected message type {:#04x}", other.type_byte()) }),
        }
    }

    fn handshake(&mut self, h: Handshake) -> Reply {
        let fail = |message: String| Reply::Close(Message::Error { task: 0, message });
        if h.version != VERSION {
            return fail(format!("unsupported protocol version {}", h.version));
        }
        let mine = self_test_bits();
        if !rounding::self_test() || h.self_test != mine {
            return fail("floating-point self-test differs from the coordinator".into());
        }
        let program = match compile(&h.source) {
            Ok(p) => p,
            Err(e) => return fail(format!("program rejected: {e}")),
        };
        if program.digest() != h.program_digest {
            return fail("program digest mismatch".into());
        }
        self.config = h.config.to_config();
        self.cache = None;
        let reply = Handshake {
            program_digest: program.digest(),
            self_test: mine,
            version: VERSION,
            config: h.config,
            source: String::new(),
        };
        self.program = Some(program);
        Reply::Send(Message::Handshake(reply))
    }

    fn request(&mut self, r: &Request) -> Result<Response, String> {
        let program = self.program.as_ref().expect("handshake done");
        let base = match &r.env {
            Some(bytes) => {
                let env = AbstractEnv::from_canonical(bytes).map_err(|e| format!("bad base: {e}"))?;
                if env.digest() != r.base_digest {
                    return Err("base digest mismatch".into());
                }
                self.cache = Some((r.base_digest, env.clone()));
                env
            }
            None => match &self.cache {
                Some((d, env)) if *d == r.base_digest => env.clone(),
                _ => return Err("base not cached".into()),
            },
        };
        let mut records = Vec::with_capacity(r.branches.len());
        for &k in &r.branches {
            let out = Analyzer::new(program, self.config.clone())
                .analyze_branch(r.stmt, k as usize, &base, r.mode)
                .map_err(|e| e.to_string())?;
            records.push(BranchRecord {
                index: k,
                micros: out.micros,
                patch: wire_patch(&base, r.base_digest, &out.env),
                warnings: out.warnings.canonical_bytes(),
                invariants: out.invariants.iter().map(|(id, e)| (*id, e.canonical_bytes())).collect(),
            });
        }
        Ok(Response { task: r.task, records })
    }
}

/// Serve one connection until the peer closes it.
pub fn serve(reader: impl Read, writer: impl Write) -> Result<(), ProtocolError> {
    let mut reader = BufReader::new(reader);
    let mut writer = BufWriter::new(writer);
    let mut session = WorkerSession::new();
    loop {
        let Some(m) = read_message(&mut reader)? else { return Ok(()) };
        match session.handle(m) {
            Reply::Send(m) => write_message(&mut writer, &m)?,
            Reply::Close(m) => {
                write_message(&mut writer, &m)?;
                return Ok(());
            }
        }
    }
}

/// Listen on `addr`, print the bound address on standard output, and serve
/// connections one after another.
pub fn listen(addr: &str) -> io::Result<()> {
    let listener = TcpListener::bind(addr)?;
    let mut out = io::stdout();
    writeln!(out, "listening {}", listener.local_addr()?)?;
    out.flush()?;
    for conn in listener.incoming() {
        let conn = conn?;
        conn.set_nodelay(true)?;
        let w = conn.try_clone()?;
        if let Err(e) = serve(conn, w) {
            eprintln!("worker: {e}");
        }
    }
    Ok(())
}
