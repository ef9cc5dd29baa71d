//! Seed bookkeeping for a run.
//!
//! Every random draw in the harness goes through a [`SeedLedger`], which
//! derives a dedicated stream from the master seed, a purpose tag, and
//! integer coordinates such as the window volume and replicate index. The
//! ledger records each stream for the run manifest and panics if the same
//! (tag, parts) pair is ever requested twice: two consumers sharing a stream
//! is a bug, never a recoverable condition.

use coxlab_core::streams::{stream_bytes, stream_rng};
use rand_chacha::ChaCha12Rng;
use std::collections::HashSet;
use std::sync::Mutex;

/// One derived stream, as recorded in manifests.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
pub struct StreamRecord {
    pub tag: String,
    pub parts: Vec<u64>,
    /// First eight bytes of the derived seed material, hex-encoded.
    pub stream_id: String,
}

#[derive(Debug)]
pub struct SeedLedger {
    root: u64,
    inner: Mutex<Inner>,
}

#[derive(Debug, Default)]
struct Inner {
    seen: HashSet<(String, Vec<u64>)>,
    records: Vec<StreamRecord>,
}

impl SeedLedger {
    pub fn new(root: u64) -> Self {
        SeedLedger {
            root,
            inner: Mutex::new(Inner::default()),
        }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    fn register(&self, tag: &str, parts: &[u64]) {
        let mut inner = self.inner.lock().expect("seed ledger lock");
        let key = (tag.to_string(), parts.to_vec());
        assert!(
            inner.seen.insert(key),
            "seed stream ({tag}, {parts:?}) requested twice; streams must be unique per run"
        );
        let bytes = stream_bytes(self.root, tag, parts);
        let stream_id = bytes[..8].iter().map(|b| format!("{b:02x}")).collect();
        inner.records.push(StreamRecord {
            tag: tag.to_string(),
            parts: parts.to_vec(),
            stream_id,
        });
        log::debug!(
            "stream {tag} {parts:?} -> {}",
            inner.records.last().unwrap().stream_id
        );
    }

    /// Derive the RNG for one purpose. Each (tag, parts) pair is usable once.
    pub fn rng(&self, tag: &str, parts: &[u64]) -> ChaCha12Rng {
        self.register(tag, parts);
        stream_rng(self.root, tag, parts)
    }

    /// Like [`SeedLedger::rng`] but hands out a compact seed for consumers
    /// that derive their own internal streams.
    pub fn seed(&self, tag: &str, parts: &[u64]) -> u64 {
        self.register(tag, parts);
        coxlab_core::streams::stream_seed(self.root, tag, parts)
    }

    /// Streams issued so far, sorted for deterministic manifests.
    pub fn records(&self) -> Vec<StreamRecord> {
        let inner = self.inner.lock().expect("seed ledger lock");
        let mut records = inner.records.clone();
        records.sort();
        records
    }
}
