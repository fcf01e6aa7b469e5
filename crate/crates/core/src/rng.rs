//! Named, seed-derived random streams.
//!
//! Every stochastic component of a replicate draws from its own ChaCha8
//! stream. A stream's seed is a SHA-256 digest of
//! `(base_seed, replicate, name)`, so adding or removing a component never
//! shifts the draws of another.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

pub const SPACE: &str = "space";
pub const LINKS: &str = "links";
pub const DEMOGRAPHY: &str = "demography";
pub const EPIDEMIC: &str = "epidemic";
pub const INTERVENTION: &str = "intervention";
pub const INIT: &str = "init";

pub fn design_stream(name: &str) -> String {
    format!("design.{name}")
}

pub fn derive_seed(base_seed: u64, replicate: u64, name: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"dynsamp-stream-v1");
    hasher.update(base_seed.to_le_bytes());
    hasher.update(replicate.to_le_bytes());
    hasher.update((name.len() as u64).to_le_bytes());
    hasher.update(name.as_bytes());
    hasher.finalize().into()
}

pub fn stream(base_seed: u64, replicate: u64, name: &str) -> SimRng {
    SimRng::from_seed(derive_seed(base_seed, replicate, name))
}

/// The set of streams owned by one replicate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Streams {
    base_seed: u64,
    replicate: u64,
    streams: BTreeMap<String, SimRng>,
}

impl Streams {
    pub fn new(base_seed: u64, replicate: u64) -> Self {
        Streams {
            base_seed,
            replicate,
            streams: BTreeMap::new(),
        }
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    /// Returns the named stream, creating it from the derived seed on first use.
    pub fn get(&mut self, name: &str) -> &mut SimRng {
        let (seed, rep) = (self.base_seed, self.replicate);
        self.streams
            .entry(name.to_string())
            .or_insert_with(|| stream(seed, rep, name))
    }

    /// Drops every stream and re-derives from a new `(base_seed, replicate)`.
    pub fn reseed(&mut self, base_seed: u64, replicate: u64) {
        self.base_seed = base_seed;
        self.replicate = replicate;
        self.streams.clear();
    }
}
