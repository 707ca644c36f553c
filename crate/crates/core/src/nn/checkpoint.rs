//! Binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes  "DBCK"
//! version    u32      1
//! spec_hash  u64      first 8 bytes of SHA-256 over ModelSpec::descriptor()
//! count      u32      number of tensors
//! per tensor:
//!   name_len u32, name (UTF-8)
//!   ndim     u32, dims (u64 each)
//!   data     f64 * product(dims)
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ModelSpec, Network};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DBCK";
pub const VERSION: u32 = 1;

pub fn spec_hash(spec: &ModelSpec) -> u64 {
    let digest = Sha256::digest(spec.descriptor().as_bytes());
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

pub fn encode(net: &Network) -> Vec<u8> {
    let tensors = net.tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&spec_hash(&net.spec).to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Decodes into a freshly shaped network for `spec`, checking hash, names and shapes.
pub fn decode(bytes: &[u8], spec: &ModelSpec) -> std::result::Result<Network, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let hash = r.u64()?;
    if hash != spec_hash(spec) {
        return Err(format!(
            "checkpoint was written for a different model (hash {hash:016x}, expected {:016x} for {})",
            spec_hash(spec),
            spec.descriptor()
        ));
    }
    let mut net = Network::init(spec.clone(), 0).map_err(|e| e.to_string())?;
    let count = r.u32()? as usize;
    let mut slots = net.tensors_mut();
    if count != slots.len() {
        return Err(format!("{count} tensors stored, model has {}", slots.len()));
    }
    for (want_name, slot) in slots.iter_mut() {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?).map_err(|e| e.to_string())?;
        if name != want_name {
            return Err(format!("expected tensor `{want_name}`, found `{name}`"));
        }
        let ndim = r.u32()? as usize;
        let dims: Vec<usize> = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<std::result::Result<_, _>>()?;
        if dims != slot.shape() {
            return Err(format!("tensor `{name}` has shape {dims:?}, model expects {:?}", slot.shape()));
        }
        for v in slot.iter_mut() {
            *v = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        }
    }
    drop(slots);
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(net)
}

pub fn save(path: &Path, net: &Network) -> Result<()> {
    fs::write(path, encode(net)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path, spec: &ModelSpec) -> Result<Network> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, spec).map_err(|m| Error::format(path, m))
}
