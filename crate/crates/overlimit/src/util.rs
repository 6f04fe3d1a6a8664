//! Small shared helpers: deterministic seed derivation and atomic file
//! writes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Seed-stream tags. Every pipeline stage that needs randomness derives
/// its own stream from the one user-supplied seed, so stages stay
/// decorrelated and adding draws to one stage never shifts another.
pub mod seed_tag {
    pub const INIT: u64 = 0x494e4954; // weight initialization
    pub const SPLIT: u64 = 0x53504c54; // train/test split shuffle
    pub const SHUFFLE: u64 = 0x5348464c; // per-epoch batch shuffle
    pub const FOLDS: u64 = 0x464f4c44; // cross-validation fold shuffle
    pub const COMBO: u64 = 0x434f4d42; // grid-search combination
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a sub-seed from a master seed and a list of tags. Pure and
/// platform-independent, so the same inputs always name the same stream.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &t in tags {
        h = splitmix64(h ^ t);
    }
    h
}

/// Write `bytes` to `path` atomically: write a sibling temp file, then
/// rename over the target. Readers never observe a half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::file(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))?;
    Ok(())
}

/// Read a whole file, tagging I/O errors with the path.
pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::file(path, e))
}

/// Read a whole file as bytes, tagging I/O errors with the path.
pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::file(path, e))
}
