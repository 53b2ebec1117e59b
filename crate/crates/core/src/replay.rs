//! Trace replay, recording and golden comparison.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::thread;
use std::time::Duration;

use crate::calibration::CalibrationModel;
use crate::codec::decode_frame;
use crate::config::Profile;
use crate::engine::{Engine, EventLog};
use crate::sink::{Sink, SinkError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Speed {
    /// Back to back.
    #[default]
    Max,
    /// Paced by frame timestamp deltas.
    Realtime,
}

/// Replays trace text through a fresh engine. Undecodable lines become
/// diagnostics; the stream is finished at the end so no key stays held.
pub fn replay_text(
    text: &str,
    profile: &Profile,
    model: Option<&CalibrationModel>,
    speed: Speed,
    mut sink: Option<&mut dyn Sink>,
) -> Result<EventLog, SinkError> {
    let mut engine = Engine::new(profile.clone(), model.cloned());
    let mut last_t: Option<u64> = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let frame = match decode_frame(line) {
            Ok(f) => f,
            Err(e) => {
                engine.reject_line(i + 1, &e);
                continue;
            }
        };
        if speed == Speed::Realtime {
            if let Some(prev) = last_t {
                thread::sleep(Duration::from_millis(frame.t_ms.saturating_sub(prev)));
            }
            last_t = Some(frame.t_ms);
        }
        let events = engine.step(&frame);
        if let Some(s) = sink.as_deref_mut() {
            for ev in &events {
                s.send(ev)?;
            }
        }
    }
    let events = engine.finish_now();
    if let Some(s) = sink {
        for ev in &events {
            s.send(ev)?;
        }
        s.flush()?;
    }
    Ok(engine.take_log())
}

pub fn run_replay(
    trace: &Path,
    profile: &Profile,
    model: Option<&CalibrationModel>,
    speed: Speed,
) -> io::Result<EventLog> {
    let text = fs::read_to_string(trace)?;
    replay_text(&text, profile, model, speed, None).map_err(io::Error::other)
}

/// First differing line between a log and its golden copy.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("golden mismatch at line {line}: expected {expected:?}, got {actual:?}")]
pub struct GoldenMismatch {
    pub line: usize,
    pub expected: Option<String>,
    pub actual: Option<String>,
}

pub fn compare_golden(actual: &str, golden: &str) -> Result<(), GoldenMismatch> {
    let mut a = actual.lines();
    let mut g = golden.lines();
    let mut line = 0;
    loop {
        line += 1;
        match (a.next(), g.next()) {
            (None, None) => return Ok(()),
            (x, y) if x == y => continue,
            (x, y) => {
                return Err(GoldenMismatch {
                    line,
                    expected: y.map(String::from),
                    actual: x.map(String::from),
                })
            }
        }
    }
}

/// Copies every decodable frame line from `source` to `out` verbatim.
/// Returns the number of frames written.
pub fn record<R: BufRead, W: Write>(source: R, mut out: W) -> io::Result<u64> {
    let mut count = 0;
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match decode_frame(&line) {
            Ok(_) => {
                writeln!(out, "{line}")?;
                count += 1;
            }
            Err(e) => log::warn!("line {}: {e}; not recorded", i + 1),
        }
    }
    out.flush()?;
    Ok(count)
}
