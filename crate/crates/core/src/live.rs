//! Live operation: frame sources, the reader thread, the UI snapshot channel
//! and the engine loop.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::panic::{self, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crossbeam_queue::ArrayQueue;

use crate::calibration::CalibrationModel;
use crate::codec::decode_frame;
use crate::config::Profile;
use crate::engine::{Engine, LogRecord};
use crate::sink::{Sink, SinkError};

/// Where frame lines come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Stdin,
    /// Listen on this address and take the first connection.
    Tcp(String),
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "stdin" || s == "-" {
            return Ok(Source::Stdin);
        }
        match s.strip_prefix("tcp:") {
            Some(addr) if addr.contains(':') => Ok(Source::Tcp(addr.to_string())),
            _ => Err(format!("expected `stdin` or `tcp:HOST:PORT`, got {s:?}")),
        }
    }
}

impl Source {
    /// Opens the source, blocking until a TCP peer connects.
    pub fn open(&self) -> io::Result<Box<dyn BufRead + Send>> {
        match self {
            Source::Stdin => Ok(Box::new(BufReader::new(io::stdin()))),
            Source::Tcp(addr) => {
                let listener = TcpListener::bind(addr)?;
                log::info!("waiting for frames on {}", listener.local_addr()?);
                let (stream, peer) = listener.accept()?;
                log::info!("frame source connected from {peer}");
                Ok(Box::new(BufReader::new(stream)))
            }
        }
    }
}

/// One raw line and its 1-based position in the stream.
pub type NumberedLine = (usize, String);

/// Lines handed from the reader thread to the engine loop. When full, the
/// oldest line is dropped.
pub struct LineFeed {
    queue: Arc<ArrayQueue<NumberedLine>>,
    dropped: Arc<AtomicU64>,
    done: Arc<AtomicBool>,
    reader: Option<JoinHandle<io::Result<()>>>,
}

impl LineFeed {
    pub fn spawn<R: BufRead + Send + 'static>(reader: R, capacity: usize) -> LineFeed {
        let queue = Arc::new(ArrayQueue::new(capacity.max(1)));
        let dropped = Arc::new(AtomicU64::new(0));
        let done = Arc::new(AtomicBool::new(false));
        let (q, d, fin) = (queue.clone(), dropped.clone(), done.clone());
        let handle = thread::spawn(move || {
            let result = (|| {
                for (i, line) in reader.lines().enumerate() {
                    if q.force_push((i + 1, line?)).is_some() {
                        d.fetch_add(1, Ordering::Relaxed);
                    }
                }
                Ok(())
            })();
            fin.store(true, Ordering::Release);
            result
        });
        LineFeed {
            queue,
            dropped,
            done,
            reader: Some(handle),
        }
    }

    /// Blocks until a line is available or the source has ended.
    pub fn next_line(&self) -> Option<NumberedLine> {
        loop {
            if let Some(item) = self.queue.pop() {
                return Some(item);
            }
            if self.done.load(Ordering::Acquire) {
                return self.queue.pop();
            }
            thread::sleep(Duration::from_millis(1));
        }
    }

    /// Lines dropped since the last call.
    pub fn take_dropped(&self) -> u64 {
        self.dropped.swap(0, Ordering::Relaxed)
    }

    /// Waits for the reader thread and returns its result.
    pub fn join(mut self) -> io::Result<()> {
        match self.reader.take().map(|h| h.join()) {
            Some(Ok(r)) => r,
            Some(Err(_)) => Err(io::Error::other("reader thread panicked")),
            None => Ok(()),
        }
    }
}

/// Broadcasts snapshot lines to every connected overlay.
pub struct SnapshotPublisher {
    listener: TcpListener,
    clients: Vec<TcpStream>,
}

impl SnapshotPublisher {
    pub fn bind(addr: &str) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(SnapshotPublisher {
            listener,
            clients: Vec::new(),
        })
    }

    pub fn local_addr(&self) -> io::Result<std::net::SocketAddr> {
        self.listener.local_addr()
    }

    pub fn publish(&mut self, line: &str) {
        while let Ok((stream, _)) = self.listener.accept() {
            let _ = stream.set_nodelay(true);
            self.clients.push(stream);
        }
        self.clients
            .retain_mut(|c| c.write_all(line.as_bytes()).and_then(|_| c.write_all(b"\n")).is_ok());
    }

    pub fn subscribers(&self) -> usize {
        self.clients.len()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Sink(#[from] SinkError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Optional outputs of a live session.
#[derive(Default)]
pub struct RunOutputs<'a> {
    pub log: Option<&'a mut dyn Write>,
    pub ui: Option<&'a mut SnapshotPublisher>,
}

/// Drives the engine from a line feed until the source ends. Held keys are
/// released on the way out, including when a step panics.
pub fn run_engine(
    feed: &LineFeed,
    profile: &Profile,
    model: Option<CalibrationModel>,
    sink: &mut dyn Sink,
    mut outputs: RunOutputs<'_>,
) -> Result<u64, RunError> {
    let mut engine = Engine::new(profile.clone(), model);
    let result = panic::catch_unwind(AssertUnwindSafe(|| -> Result<(), RunError> {
        while let Some((line_no, line)) = feed.next_line() {
            let dropped = feed.take_dropped();
            if dropped > 0 {
                engine.record_drops(dropped);
            }
            if line.trim().is_empty() {
                continue;
            }
            match decode_frame(&line) {
                Ok(frame) => {
                    for ev in engine.step(&frame) {
                        sink.send(&ev)?;
                    }
                }
                Err(e) => engine.reject_line(line_no, &e),
            }
            flush_log(&mut engine, &mut outputs)?;
            if let Some(ui) = outputs.ui.as_deref_mut() {
                ui.publish(&engine.snapshot().to_json_line());
            }
        }
        Ok(())
    }));
    let released = engine.finish_now();
    for ev in &released {
        sink.send(ev)?;
    }
    sink.flush()?;
    flush_log(&mut engine, &mut outputs)?;
    match result {
        Ok(r) => r.map(|_| engine.frames()),
        Err(p) => panic::resume_unwind(p),
    }
}

fn flush_log(engine: &mut Engine, outputs: &mut RunOutputs<'_>) -> Result<(), RunError> {
    let records = engine.take_log();
    if let Some(w) = outputs.log.as_deref_mut() {
        for r in records.records() {
            if let LogRecord::Diag { .. } = r {
                log::warn!("{r}");
            }
            writeln!(w, "{r}")?;
        }
    }
    Ok(())
}
