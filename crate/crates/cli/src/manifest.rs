//! Run manifests: every invocation records enough metadata to replay it —
//! the digest of the effective configuration, the seed, the random-stream
//! algorithm identifier, worker count, and wall-clock timings per operation.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OpTiming {
    pub operation: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    /// Version of the output schema; bump on any breaking layout change.
    pub artifact_version: String,
    pub subcommand: String,
    /// SHA-256 of the canonical serialization of the effective configuration.
    /// Stable under emit → parse → re-digest.
    pub config_digest: String,
    pub seed: u64,
    /// Identifies the RNG construction so results can be replayed elsewhere.
    pub stream_algorithm: String,
    pub workers: usize,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub timings: Vec<OpTiming>,
}

/// Collects timings while a run executes, then freezes into a [`RunManifest`].
pub struct ManifestBuilder {
    subcommand: String,
    config_digest: String,
    seed: u64,
    workers: usize,
    started_unix_seconds: u64,
    started: Instant,
    timings: Vec<OpTiming>,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, config_digest: &str, seed: u64, workers: usize) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config_digest: config_digest.to_string(),
            seed,
            workers,
            started_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            started: Instant::now(),
            timings: Vec::new(),
        }
    }

    /// Times one operation and records it under `name`.
    pub fn time<T>(&mut self, name: &str, op: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = op();
        self.record(name, start.elapsed().as_secs_f64());
        out
    }

    /// Records an operation timed by the caller (e.g. work done before the
    /// builder existed, like configuration parsing).
    pub fn record(&mut self, name: &str, seconds: f64) {
        self.timings.push(OpTiming {
            operation: name.to_string(),
            seconds,
        });
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            artifact_version: ARTIFACT_VERSION.to_string(),
            subcommand: self.subcommand,
            config_digest: self.config_digest,
            seed: self.seed,
            stream_algorithm: nnlab_core::montecarlo::stream::STREAM_ALGORITHM.to_string(),
            workers: self.workers,
            started_unix_seconds: self.started_unix_seconds,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            timings: self.timings,
        }
    }
}
