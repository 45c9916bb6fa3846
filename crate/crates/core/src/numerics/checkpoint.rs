//! Binary tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "HRNK" | u32 version | u32 tensor count
//! per tensor: u32 name length | name (UTF-8) | u32 rank | rank × u64 dims
//! per tensor, same order: row-major f32 payload
//! ```
//!
//! A JSON sidecar (`<file>.json`) lists names, shapes, the SHA-256 of the
//! binary file, and free-form metadata such as the model kind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::util::sha256_hex;

pub const MAGIC: &[u8; 4] = b"HRNK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub tensors: Vec<TensorEntry>,
    pub checksum: String,
    #[serde(default)]
    pub meta: serde_json::Value,
}

pub fn encode(params: &ParamSet<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + params.num_params() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
    for (_, t) in params.iter() {
        for &x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
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
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ParamSet<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Corrupt("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Corrupt(format!("unsupported format version {version}")));
    }
    let count = r.u32()? as usize;
    let mut header = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Corrupt("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(Error::Corrupt(format!("implausible rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        header.push((name, shape));
    }
    let mut params = ParamSet::new();
    for (name, shape) in header {
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Corrupt("shape overflow".into()))?;
        let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::Corrupt("shape overflow".into()))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params
            .insert(name, Tensor::from_vec(&shape, data)?)
            .map_err(|e| Error::Corrupt(e.to_string()))?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(params)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save(path: &Path, params: &ParamSet<f32>, meta: serde_json::Value) -> Result<Sidecar> {
    let bytes = encode(params);
    let sidecar = Sidecar {
        format_version: FORMAT_VERSION,
        tensors: params
            .iter()
            .map(|(n, t)| TensorEntry { name: n.to_string(), shape: t.shape().to_vec() })
            .collect(),
        checksum: sha256_hex(&bytes),
        meta,
    };
    write_atomic(path, &bytes)?;
    write_atomic(&sidecar_path(path), &serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(sidecar)
}

pub fn load(path: &Path) -> Result<(ParamSet<f32>, Sidecar)> {
    let bytes = fs::read(path)?;
    let sidecar_bytes = fs::read(sidecar_path(path))
        .map_err(|e| Error::Corrupt(format!("sidecar for {}: {e}", path.display())))?;
    let sidecar: Sidecar = serde_json::from_slice(&sidecar_bytes)
        .map_err(|e| Error::Corrupt(format!("sidecar: {e}")))?;
    if sha256_hex(&bytes) != sidecar.checksum {
        return Err(Error::Corrupt(format!("checksum mismatch for {}", path.display())));
    }
    let params = decode(&bytes)?;
    let layout: Vec<TensorEntry> = params
        .iter()
        .map(|(n, t)| TensorEntry { name: n.to_string(), shape: t.shape().to_vec() })
        .collect();
    if layout != sidecar.tensors {
        return Err(Error::Corrupt("sidecar tensor table disagrees with container".into()));
    }
    Ok((params, sidecar))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn sample() -> ParamSet<f32> {
        let mut p = ParamSet::new();
        p.insert("w", Tensor::matrix(2, 3, vec![1.0, -2.5, 3.25, f32::MIN_POSITIVE, 0.0, -0.0]).unwrap())
            .unwrap();
        p.insert("b", Tensor::vector(vec![0.125, 7.0])).unwrap();
        p
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&sample());
        assert_eq!(&bytes[..4], b"HRNK");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
    }

    #[test]
    fn truncated_and_garbage() {
        let bytes = encode(&sample());
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut]), Err(Error::Corrupt(_))), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Corrupt(_))));
    }

    #[test]
    fn file_round_trip_and_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save(&path, &sample(), serde_json::json!({"kind": "test"})).unwrap();
        let (back, side) = load(&path).unwrap();
        assert_eq!(back, sample());
        assert_eq!(side.meta["kind"], "test");

        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load(&path), Err(Error::Corrupt(_))));
    }

    proptest! {
        #[test]
        fn encode_decode_bit_exact(
            rows in 1usize..5,
            cols in 1usize..5,
            seed in proptest::collection::vec(any::<u32>(), 25),
        ) {
            let data: Vec<f32> = seed.iter().take(rows * cols).map(|&b| f32::from_bits(b)).collect();
            let mut p = ParamSet::new();
            p.insert("t", Tensor::matrix(rows, cols, data.clone()).unwrap()).unwrap();
            let back = decode(&encode(&p)).unwrap();
            let bits: Vec<u32> = back.at(0).data().iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(bits, data.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        }
    }
}
