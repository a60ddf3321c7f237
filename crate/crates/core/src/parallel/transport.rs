//! Connections to workers. Every transport carries the same framed bytes;
//! the in-process one moves them through channels to a worker thread.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread;

use super::protocol::{read_message, write_message, Message, ProtocolError};
use super::worker;

/// Variable that switches the binary into worker mode; its value is the
/// address to listen on.
pub const WORKER_ENV: &str = "ASTRAL_WORKER";

pub trait Link: Send {
    fn send(&mut self, m: &Message) -> Result<(), ProtocolError>;
    fn recv(&mut self) -> Result<Message, ProtocolError>;
    /// Terminate the worker abruptly.
    fn kill(&mut self);
}

fn closed() -> ProtocolError {
    ProtocolError::Io(io::Error::new(io::ErrorKind::BrokenPipe, "worker connection closed"))
}

/// Reads the byte chunks arriving on a channel as one stream.
pub struct ChannelReader {
    rx: Receiver<Vec<u8>>,
    buf: Vec<u8>,
    pos: usize,
}

impl Read for ChannelReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        while self.pos == self.buf.len() {
            match self.rx.recv() {
                Ok(chunk) => {
                    self.buf = chunk;
                    self.pos = 0;
                }
                Err(_) => return Ok(0),
            }
        }
        let n = out.len().min(self.buf.len() - self.pos);
        out[..n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

/// Buffers writes and sends them as one chunk on flush.
pub struct ChannelWriter {
    tx: Sender<Vec<u8>>,
    buf: Vec<u8>,
}

impl Write for ChannelWriter {
    fn write(&mut self, b: &[u8]) -> io::Result<usize> {
        self.buf.extend_from_slice(b);
        Ok(b.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        if !self.buf.is_empty() {
            let chunk = std::mem::take(&mut self.buf);
            self.tx.send(chunk).map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "peer gone"))?;
        }
        Ok(())
    }
}

fn pipe() -> (ChannelWriter, ChannelReader) {
    let (tx, rx) = channel();
    (ChannelWriter { tx, buf: Vec::new() }, ChannelReader { rx, buf: Vec::new(), pos: 0 })
}

/// A worker thread in this process.
pub struct InprocLink {
    io: Option<(ChannelWriter, ChannelReader)>,
}

impl InprocLink {
    pub fn spawn() -> InprocLink {
        let (to_worker, worker_in) = pipe();
        let (worker_out, from_worker) = pipe();
        thread::spawn(move || {
            let _ = worker::serve(worker_in, worker_out);
        });
        InprocLink { io: Some((to_worker, from_worker)) }
    }
}

impl Link for InprocLink {
    fn send(&mut self, m: &Message) -> Result<(), ProtocolError> {
        let (w, _) = self.io.as_mut().ok_or_else(closed)?;
        write_message(w, m)
    }

    fn recv(&mut self) -> Result<Message, ProtocolError> {
        let (_, r) = self.io.as_mut().ok_or_else(closed)?;
        read_message(r)?.ok_or_else(closed)
    }

    fn kill(&mut self) {
        self.io = None;
    }
}

/// A worker reached over TCP, optionally a child process we own.
pub struct StreamLink {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    child: Option<Child>,
}

impl StreamLink {
    pub fn connect(addr: &str) -> io::Result<StreamLink> {
        let s = TcpStream::connect(addr)?;
        s.set_nodelay(true)?;
        Ok(StreamLink { reader: BufReader::new(s.try_clone()?), writer: s, child: None })
    }

    /// Start `exe` in worker mode on an ephemeral loopback port and connect.
    pub fn spawn(exe: &Path) -> io::Result<StreamLink> {
        let mut child = Command::new(exe)
            .env(WORKER_ENV, "127.0.0.1:0")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let mut line = String::new();
        BufReader::new(child.stdout.take().expect("piped stdout")).read_line(&mut line)?;
        let addr = match line.trim().strip_prefix("listening ") {
            Some(a) => a.to_string(),
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(io::Error::other(format!("worker did not start: {line:?}")));
            }
        };
        let mut link = StreamLink::connect(&addr)?;
        link.child = Some(child);
        Ok(link)
    }
}

impl Link for StreamLink {
    fn send(&mut self, m: &Message) -> Result<(), ProtocolError> {
        write_message(&mut self.writer, m)
    }

    fn recv(&mut self) -> Result<Message, ProtocolError> {
        read_message(&mut self.reader)?.ok_or_else(closed)
    }

    fn kill(&mut self) {
        if let Some(c) = &mut self.child {
            let _ = c.kill();
            let _ = c.wait();
        }
        let _ = self.writer.shutdown(std::net::Shutdown::Both);
    }
}

impl Drop for StreamLink {
    fn drop(&mut self) {
        if let Some(c) = &mut self.child {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}
