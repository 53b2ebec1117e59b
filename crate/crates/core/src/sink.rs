//! Destinations for synthesized input.

use std::io::Write;

use crate::model::InputEvent;

#[derive(Debug, thiserror::Error)]
pub enum SinkError {
    #[error("sink unavailable: {0}")]
    Unavailable(String),
    #[error("sink i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub trait Sink {
    fn send(&mut self, event: &InputEvent) -> Result<(), SinkError>;

    fn flush(&mut self) -> Result<(), SinkError> {
        Ok(())
    }
}

/// Keeps events in memory.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct VirtualSink {
    pub events: Vec<InputEvent>,
}

impl Sink for VirtualSink {
    fn send(&mut self, event: &InputEvent) -> Result<(), SinkError> {
        self.events.push(event.clone());
        Ok(())
    }
}

/// Writes each event as a log line instead of injecting it.
pub struct DryRunSink<W: Write> {
    out: W,
}

impl<W: Write> DryRunSink<W> {
    pub fn new(out: W) -> Self {
        DryRunSink { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> Sink for DryRunSink<W> {
    fn send(&mut self, event: &InputEvent) -> Result<(), SinkError> {
        writeln!(self.out, "{event}")?;
        Ok(())
    }

    fn flush(&mut self) -> Result<(), SinkError> {
        self.out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SinkKind {
    Virtual,
    DryRun,
    Os,
}

/// Builds a sink. OS injection is not part of this build.
pub fn make_sink(kind: SinkKind) -> Result<Box<dyn Sink>, SinkError> {
    match kind {
        SinkKind::Virtual => Ok(Box::new(VirtualSink::default())),
        SinkKind::DryRun => Ok(Box::new(DryRunSink::new(std::io::stdout()))),
        SinkKind::Os => Err(SinkError::Unavailable(
            "OS input injection is not compiled into this build; use --sink virtual or dry-run".into(),
        )),
    }
}
