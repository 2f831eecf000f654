//! Seed randomness plumbing.
//!
//! Sector seeds come from a [`SeedSource`] so that the production path (the
//! operating system CSPRNG) can be swapped for instrumented doubles: a
//! recorder that logs every byte handed out, or a transcript that replays a
//! recorded run byte for byte. Campaign reports are reproducible given the
//! transcript of the run that produced them.

use std::sync::{Arc, Mutex};

use rand::rngs::OsRng;
use rand::RngCore;

use crate::error::{Error, Result};

/// A source of seed bytes for sector writes.
pub trait SeedSource: Send {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()>;
}

/// The operating-system CSPRNG; the production source.
#[derive(Debug, Default, Clone, Copy)]
pub struct OsSeedSource;

impl SeedSource for OsSeedSource {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        OsRng
            .try_fill_bytes(buf)
            .map_err(|e| Error::Randomness(e.to_string()))
    }
}

/// Adapter exposing any `rand` generator as a seed source; handy for
/// deterministic tests seeded from a fixed value.
pub struct RngSeedSource<R>(pub R);

impl<R: RngCore + Send> SeedSource for RngSeedSource<R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.0
            .try_fill_bytes(buf)
            .map_err(|e| Error::Randomness(e.to_string()))
    }
}

/// Wraps another source and appends every byte it emits to a shared log.
pub struct RecordingSource<S> {
    inner: S,
    log: Arc<Mutex<Vec<u8>>>,
}

impl<S: SeedSource> RecordingSource<S> {
    pub fn new(inner: S) -> (Self, Arc<Mutex<Vec<u8>>>) {
        let log = Arc::new(Mutex::new(Vec::new()));
        (
            RecordingSource {
                inner,
                log: Arc::clone(&log),
            },
            log,
        )
    }
}

impl<S: SeedSource> SeedSource for RecordingSource<S> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.fill(buf)?;
        self.log.lock().expect("seed log poisoned").extend_from_slice(buf);
        Ok(())
    }
}

/// Replays a recorded byte transcript; errors once the transcript runs dry.
pub struct TranscriptSource {
    bytes: Vec<u8>,
    pos: usize,
}

impl TranscriptSource {
    pub fn new(bytes: Vec<u8>) -> Self {
        TranscriptSource { bytes, pos: 0 }
    }

    /// Bytes not yet consumed.
    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

impl SeedSource for TranscriptSource {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        let end = self.pos + buf.len();
        if end > self.bytes.len() {
            return Err(Error::Randomness(format!(
                "transcript exhausted: {} bytes requested, {} left",
                buf.len(),
                self.remaining()
            )));
        }
        buf.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(())
    }
}
