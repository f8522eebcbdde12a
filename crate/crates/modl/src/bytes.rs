//! Binary framing shared by checkpoints, soft-label files, and neighbor pools:
//! an 8-byte magic, a version word, a little-endian payload, and a trailing
//! FNV-1a checksum over everything before it. Writes go through a temp file
//! and a rename so readers never observe partial artifacts.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Stable 64-bit FNV-1a hash. Used for file checksums and cache keys; must
/// not change across releases, so this is hand-rolled rather than delegated
/// to `std::hash` (whose output is explicitly unstable).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Streaming variant of [`fnv1a64`] for hashing heterogeneous fields.
#[derive(Debug, Clone)]
pub struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn update_u64(&mut self, v: u64) {
        self.update(&v.to_le_bytes());
    }

    pub fn update_f64(&mut self, v: f64) {
        self.update(&v.to_le_bytes());
    }

    pub fn update_str(&mut self, s: &str) {
        self.update_u64(s.len() as u64);
        self.update(s.as_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

/// Little-endian payload writer.
#[derive(Debug, Default)]
pub struct Payload {
    buf: Vec<u8>,
}

impl Payload {
    pub fn new() -> Self {
        Payload { buf: Vec::new() }
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64_slice(&mut self, vs: &[f64]) {
        for &v in vs {
            self.put_f64(v);
        }
    }

    pub fn put_str(&mut self, s: &str) {
        self.put_u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

/// Little-endian payload reader with bounds-checked accessors.
pub struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Cursor {
            path,
            bytes,
            pos: 0,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::corrupt(self.path, "truncated payload"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn get_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn get_u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.get_f64()?);
        }
        Ok(out)
    }

    pub fn get_str(&mut self) -> Result<String> {
        let n = self.get_u64()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::corrupt(self.path, "invalid UTF-8 string"))
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::corrupt(self.path, "trailing bytes after payload"));
        }
        Ok(())
    }
}

/// Write `magic + version + payload + checksum` atomically.
pub fn write_framed(path: &Path, magic: &[u8; 8], payload: &[u8]) -> Result<()> {
    let mut bytes = Vec::with_capacity(magic.len() + 12 + payload.len() + 8);
    bytes.extend_from_slice(magic);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(payload);
    let checksum = fnv1a64(&bytes);
    bytes.extend_from_slice(&checksum.to_le_bytes());
    write_atomic(path, &bytes)
}

/// Read a framed file, validating magic, version, and checksum. Returns the
/// payload bytes; nothing is returned for corrupt or truncated files.
pub fn read_framed(path: &Path, magic: &[u8; 8]) -> Result<Vec<u8>> {
    let bytes = fs::read(path)?;
    let header = magic.len() + 4;
    if bytes.len() < header + 8 {
        return Err(Error::corrupt(path, "file shorter than header"));
    }
    if &bytes[..8] != magic {
        return Err(Error::corrupt(path, "bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::corrupt(path, format!("unsupported version {version}")));
    }
    let body_end = bytes.len() - 8;
    let stored = u64::from_le_bytes(bytes[body_end..].try_into().unwrap());
    let actual = fnv1a64(&bytes[..body_end]);
    if stored != actual {
        return Err(Error::corrupt(path, "checksum mismatch"));
    }
    Ok(bytes[header..body_end].to_vec())
}

/// Write via temp-then-rename in the destination directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Mix a base seed with a stream tag so derived RNG streams do not overlap.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut h = Fnv1a::new();
    h.update_u64(base);
    h.update_u64(tag);
    h.finish()
}
