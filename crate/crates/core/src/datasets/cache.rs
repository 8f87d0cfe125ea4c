//! Binary caches, little-endian throughout.
//!
//! Item metric (`PMDC`): magic, `u32` version, `u8` mode, `u8` flags (bit 0 =
//! metric), `u32` item count, `u64` fingerprint of the source vectors, `f64`
//! d_max, then the strict lower triangle as `f32`, row-major.
//!
//! Pair scores (`PMDS`): magic, `u32` version, `u64` key, `u64` count, then
//! `(u32 u, u32 v, f64 score)` records. `NaN` marks an uncomputable score.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::metric::{DenseItemMetric, DistanceMode};
use crate::model::UserId;

pub const METRIC_CACHE_MAGIC: [u8; 4] = *b"PMDC";
pub const METRIC_CACHE_VERSION: u32 = 1;
pub const SCORE_CACHE_MAGIC: [u8; 4] = *b"PMDS";
pub const SCORE_CACHE_VERSION: u32 = 1;

/// How a cached artifact was obtained.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Disabled,
    Loaded,
    Written,
    /// The cache existed but was rejected for the given reason.
    Rebuilt(String),
}

fn invalid(path: &Path, reason: impl Into<String>) -> Error {
    Error::CacheInvalid {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Writes next to `path` and renames, so readers never see a partial file.
fn write_atomically(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("partial");
    let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(&tmp, e))?;
    drop(out);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_header(input: &mut impl Read, path: &Path, magic: [u8; 4], version: u32) -> Result<()> {
    let mut got = [0u8; 4];
    input
        .read_exact(&mut got)
        .map_err(|_| invalid(path, "truncated header"))?;
    if got != magic {
        return Err(invalid(path, format!("bad magic {got:?}")));
    }
    let v = input
        .read_u32::<LittleEndian>()
        .map_err(|_| invalid(path, "truncated header"))?;
    if v != version {
        return Err(invalid(path, format!("format version {v}, expected {version}")));
    }
    Ok(())
}

pub fn write_metric_cache(path: &Path, metric: &DenseItemMetric, fingerprint: u64) -> Result<()> {
    use crate::metric::ItemMetric;
    write_atomically(path, |out| {
        out.write_all(&METRIC_CACHE_MAGIC)?;
        out.write_u32::<LittleEndian>(METRIC_CACHE_VERSION)?;
        out.write_u8(metric.mode().code())?;
        out.write_u8(metric.is_metric() as u8)?;
        out.write_u32::<LittleEndian>(metric.num_items() as u32)?;
        out.write_u64::<LittleEndian>(fingerprint)?;
        out.write_f64::<LittleEndian>(metric.d_max())?;
        for &d in metric.lower() {
            out.write_f32::<LittleEndian>(d as f32)?;
        }
        Ok(())
    })
}

/// Reads an item metric cache and the fingerprint it was written with.
pub fn read_metric_cache(path: &Path) -> Result<(DenseItemMetric, u64)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::new(file);
    read_header(&mut input, path, METRIC_CACHE_MAGIC, METRIC_CACHE_VERSION)?;
    let truncated = |_| invalid(path, "truncated header");
    let mode_code = input.read_u8().map_err(truncated)?;
    let mode = DistanceMode::from_code(mode_code)
        .ok_or_else(|| invalid(path, format!("unknown mode byte {mode_code}")))?;
    let flags = input.read_u8().map_err(truncated)?;
    let n = input.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let fingerprint = input.read_u64::<LittleEndian>().map_err(truncated)?;
    let d_max = input.read_f64::<LittleEndian>().map_err(truncated)?;
    if !(d_max.is_finite() && d_max > 0.0) {
        return Err(invalid(path, format!("bad d_max {d_max}")));
    }
    let count = n * n.saturating_sub(1) / 2;
    let expected_len = 30 + 4 * count as u64;
    let actual_len = std::fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
    if actual_len != expected_len {
        return Err(invalid(
            path,
            format!("{actual_len} bytes, expected {expected_len} for {n} items"),
        ));
    }
    let mut raw = vec![0f32; count];
    input
        .read_f32_into::<LittleEndian>(&mut raw)
        .map_err(|_| invalid(path, "truncated body"))?;
    let mut lower = Vec::with_capacity(count);
    for d in raw {
        let d = d as f64;
        if !d.is_finite() || d < 0.0 {
            return Err(invalid(path, format!("bad distance {d}")));
        }
        // f32 rounding may step just past the bound.
        lower.push(d.min(d_max));
    }
    let metric = DenseItemMetric::from_parts(n, mode, d_max, flags & 1 == 1, lower);
    Ok((metric, fingerprint))
}

pub fn write_score_cache(path: &Path, key: u64, scores: &[(UserId, UserId, f64)]) -> Result<()> {
    write_atomically(path, |out| {
        out.write_all(&SCORE_CACHE_MAGIC)?;
        out.write_u32::<LittleEndian>(SCORE_CACHE_VERSION)?;
        out.write_u64::<LittleEndian>(key)?;
        out.write_u64::<LittleEndian>(scores.len() as u64)?;
        for &(u, v, s) in scores {
            out.write_u32::<LittleEndian>(u)?;
            out.write_u32::<LittleEndian>(v)?;
            out.write_f64::<LittleEndian>(s)?;
        }
        Ok(())
    })
}

/// Reads pair scores, rejecting a cache written under a different key.
pub fn read_score_cache(path: &Path, key: u64) -> Result<Vec<(UserId, UserId, f64)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::new(file);
    read_header(&mut input, path, SCORE_CACHE_MAGIC, SCORE_CACHE_VERSION)?;
    let truncated = |_| invalid(path, "truncated header");
    let got = input.read_u64::<LittleEndian>().map_err(truncated)?;
    if got != key {
        return Err(invalid(path, format!("key {got:#x}, expected {key:#x}")));
    }
    let count = input.read_u64::<LittleEndian>().map_err(truncated)?;
    let actual_len = std::fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
    if actual_len != 24 + 16 * count {
        return Err(invalid(path, "length does not match record count"));
    }
    let mut scores = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let body = |_| invalid(path, "truncated body");
        let u = input.read_u32::<LittleEndian>().map_err(body)?;
        let v = input.read_u32::<LittleEndian>().map_err(body)?;
        let s = input.read_f64::<LittleEndian>().map_err(body)?;
        scores.push((u, v, s));
    }
    Ok(scores)
}

/// FNV-1a, stable across platforms and releases.
pub(crate) struct Fingerprint(u64);

impl Fingerprint {
    pub(crate) fn new() -> Self {
        Fingerprint(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn u64(&mut self, x: u64) {
        self.bytes(&x.to_le_bytes());
    }

    pub(crate) fn f64(&mut self, x: f64) {
        self.u64(x.to_bits());
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}
