//! Little-endian binary reader/writer with positioned errors and atomic
//! write-temp-rename persistence.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub struct BinReader {
    path: PathBuf,
    buf: Vec<u8>,
    pos: usize,
}

impl BinReader {
    pub fn open(path: &Path) -> Result<Self> {
        let buf = fs::read(path)?;
        Ok(BinReader { path: path.to_path_buf(), buf, pos: 0 })
    }

    pub fn from_bytes(path: &Path, buf: Vec<u8>) -> Self {
        BinReader { path: path.to_path_buf(), buf, pos: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::ParseBinary { path: self.path.clone(), offset: self.offset(), message: message.into() }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::ParseBinary {
                path: self.path.clone(),
                offset: self.offset(),
                message: format!(
                    "truncated payload: expected {n} byte(s) for {what}, only {} remain of {} total",
                    self.buf.len() - self.pos,
                    self.buf.len()
                ),
            });
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub fn magic(&mut self, expected: &[u8; 8]) -> Result<()> {
        let offset = self.offset();
        let got = self.take(8, "magic tag")?.to_vec();
        if got != expected {
            return Err(Error::ParseBinary {
                path: self.path.clone(),
                offset,
                message: format!(
                    "bad magic: expected {:?}, found {:?}",
                    String::from_utf8_lossy(expected),
                    String::from_utf8_lossy(&got)
                ),
            });
        }
        Ok(())
    }

    pub fn version(&mut self, supported: u32) -> Result<()> {
        let found = self.u32("format version")?;
        if found != supported {
            return Err(Error::Version { path: self.path.clone(), found, supported });
        }
        Ok(())
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    pub fn f64_vec(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64(what)?);
        }
        Ok(out)
    }

    /// Fails when unread bytes remain.
    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::ParseBinary {
                path: self.path,
                offset: self.pos as u64,
                message: format!("{} trailing byte(s) after the payload", self.buf.len() - self.pos),
            });
        }
        Ok(())
    }
}

#[derive(Default)]
pub struct BinWriter {
    buf: Vec<u8>,
}

impl BinWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn magic(&mut self, tag: &[u8; 8]) {
        self.buf.extend_from_slice(tag);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64_slice(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }

    pub fn write_atomic(self, path: &Path) -> Result<()> {
        write_atomic(path, &self.buf)
    }
}

/// Write-temp-rename so re-exports overwrite atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
