//! Snapshot files: one header line carrying the format version and a
//! SHA-256 of the body, then the simulation state as compact JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::Simulation;
use crate::error::{Error, Result};

pub const SNAPSHOT_VERSION: u32 = 1;
const MAGIC: &str = "dynsamp-snapshot";

#[derive(Serialize, Deserialize)]
struct Body {
    version: u32,
    created_at_step: u64,
    simulation: Simulation,
}

pub fn to_bytes(sim: &Simulation) -> Result<Vec<u8>> {
    let body = serde_json::to_vec(&Body {
        version: SNAPSHOT_VERSION,
        created_at_step: sim.world.step,
        simulation: sim.clone(),
    })?;
    let digest = hex::encode(Sha256::digest(&body));
    let mut out = format!("{MAGIC} v{SNAPSHOT_VERSION} sha256={digest}\n").into_bytes();
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Simulation> {
    let nl = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| Error::Snapshot("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Snapshot("header is not UTF-8".into()))?;
    let mut parts = header.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(Error::Snapshot("not a snapshot file".into()));
    }
    let version = parts
        .next()
        .and_then(|v| v.strip_prefix('v'))
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| Error::Snapshot("malformed version".into()))?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!(
            "snapshot version {version} is not supported (expected {SNAPSHOT_VERSION})"
        )));
    }
    let expected = parts
        .next()
        .and_then(|v| v.strip_prefix("sha256="))
        .ok_or_else(|| Error::Snapshot("missing checksum".into()))?;
    let body = &bytes[nl + 1..];
    if hex::encode(Sha256::digest(body)) != expected {
        return Err(Error::Snapshot("checksum mismatch".into()));
    }
    let body: Body = serde_json::from_slice(body).map_err(|e| Error::Snapshot(e.to_string()))?;
    if body.version != version || body.created_at_step != body.simulation.world.step {
        return Err(Error::Snapshot("header and body disagree".into()));
    }
    body.simulation.world.check_invariants().map_err(Error::Snapshot)?;
    Ok(body.simulation)
}

pub fn save(sim: &Simulation, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(sim)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Simulation> {
    from_bytes(&std::fs::read(path)?)
}
