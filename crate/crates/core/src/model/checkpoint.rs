//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! magic      8 bytes  "COVCAST1"
//! cfg_len    u32      length of the config text
//! cfg        bytes    UTF-8 `model.* = value` lines
//! n_tensors  u32
//! per tensor:
//!   name_len u32, name (UTF-8), rows u32, cols u32,
//!   rows * cols little-endian f32 values, row-major
//! ```

use std::fs;
use std::path::Path;

use super::params::ParamStore;
use super::tensor::Mat;
use super::{param_shapes, Forecaster};
use crate::config::parse_config;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"COVCAST1";

pub fn to_bytes(model: &Forecaster) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let cfg = model.config.to_text();
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(cfg.as_bytes());
    out.extend_from_slice(&(model.params.len() as u32).to_le_bytes());
    for (name, t) in model.params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rows as u32).to_le_bytes());
        out.extend_from_slice(&(t.cols as u32).to_le_bytes());
        for v in &t.data {
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
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn text(&mut self, n: usize) -> Result<&'a str> {
        std::str::from_utf8(self.take(n)?).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Forecaster> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let n = r.u32()?;
    let config = parse_config(r.text(n)?)?.model;
    config.validate()?;
    let expected = param_shapes(&config);
    let count = r.u32()?;
    if count != expected.len() {
        return Err(Error::Checkpoint(format!(
            "{count} tensors, configuration needs {}",
            expected.len()
        )));
    }
    let mut params = ParamStore::new();
    for (want_name, want_rows, want_cols) in expected {
        let n = r.u32()?;
        let name = r.text(n)?.to_string();
        let rows = r.u32()?;
        let cols = r.u32()?;
        if name != want_name || rows != want_rows || cols != want_cols {
            return Err(Error::Checkpoint(format!(
                "tensor '{name}' {rows}x{cols}, expected '{want_name}' {want_rows}x{want_cols}"
            )));
        }
        let raw = r.take(rows * cols * 4)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let t = Mat::from_vec(rows, cols, data);
        if !t.is_finite() {
            return Err(Error::Checkpoint(format!("tensor '{name}' has non-finite values")));
        }
        params.insert(&name, t);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(Forecaster { config, params })
}

pub fn save(model: &Forecaster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Forecaster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gradcheck::tiny_config;

    #[test]
    fn round_trip_is_exact() {
        let m = Forecaster::new(tiny_config(), 11).unwrap();
        let back = from_bytes(&to_bytes(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = Forecaster::new(tiny_config(), 12).unwrap();
        save(&m, &path).unwrap();
        assert_eq!(load(&path).unwrap(), m);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let m = Forecaster::new(tiny_config(), 13).unwrap();
        let bytes = to_bytes(&m);
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(from_bytes(&extra).is_err());
    }
}
