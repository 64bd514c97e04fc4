//! Ordered reliable byte streams between cluster participants: an
//! in-process pipe and loopback TCP. Both carry the same framed bytes, so
//! protocol logs agree across transports.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{channel, Receiver, Sender};

use crate::SimError;

pub trait Stream: Read + Write + Send {}
impl<T: Read + Write + Send> Stream for T {}

pub type Link = Box<dyn Stream>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    InMemory,
    LocalSockets,
}

impl std::str::FromStr for TransportKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in_memory" | "in-memory" | "memory" => Ok(TransportKind::InMemory),
            "local_sockets" | "local-sockets" | "tcp" => Ok(TransportKind::LocalSockets),
            other => Err(format!("unknown transport '{other}'")),
        }
    }
}

/// One end of an in-process duplex byte pipe.
pub struct PipeEnd {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    buf: VecDeque<u8>,
}

pub fn pipe_pair() -> (PipeEnd, PipeEnd) {
    let (tx_a, rx_b) = channel();
    let (tx_b, rx_a) = channel();
    (
        PipeEnd {
            tx: tx_a,
            rx: rx_a,
            buf: VecDeque::new(),
        },
        PipeEnd {
            tx: tx_b,
            rx: rx_b,
            buf: VecDeque::new(),
        },
    )
}

impl Read for PipeEnd {
    fn read(&mut self, out: &mut [u8]) -> std::io::Result<usize> {
        if self.buf.is_empty() {
            match self.rx.recv() {
                Ok(chunk) => self.buf.extend(chunk),
                Err(_) => return Ok(0), // peer hung up
            }
        }
        let n = out.len().min(self.buf.len());
        for slot in out.iter_mut().take(n) {
            *slot = self.buf.pop_front().expect("buffer nonempty");
        }
        Ok(n)
    }
}

impl Write for PipeEnd {
    fn write(&mut self, data: &[u8]) -> std::io::Result<usize> {
        self.tx.send(data.to_vec()).map_err(|_| {
            std::io::Error::new(std::io::ErrorKind::BrokenPipe, "peer hung up")
        })?;
        Ok(data.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

/// Connected loopback-TCP pair, optionally on a fixed port.
pub fn tcp_pair(port: Option<u16>) -> Result<(TcpStream, TcpStream), SimError> {
    let listener = TcpListener::bind(("127.0.0.1", port.unwrap_or(0)))
        .map_err(|e| SimError::TransportUnavailable(e.to_string()))?;
    let addr = listener
        .local_addr()
        .map_err(|e| SimError::TransportUnavailable(e.to_string()))?;
    let a = TcpStream::connect(addr).map_err(|e| SimError::TransportUnavailable(e.to_string()))?;
    let (b, _) = listener
        .accept()
        .map_err(|e| SimError::TransportUnavailable(e.to_string()))?;
    a.set_nodelay(true).ok();
    b.set_nodelay(true).ok();
    Ok((a, b))
}

/// Duplex link pair on the requested transport.
pub fn link_pair(kind: TransportKind, port: Option<u16>) -> Result<(Link, Link), SimError> {
    match kind {
        TransportKind::InMemory => {
            let (a, b) = pipe_pair();
            Ok((Box::new(a), Box::new(b)))
        }
        TransportKind::LocalSockets => {
            let (a, b) = tcp_pair(port)?;
            Ok((Box::new(a), Box::new(b)))
        }
    }
}
