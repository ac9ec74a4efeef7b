//! `LPWT` named-tensor container.
//!
//! ```text
//! magic    "LPWT"
//! version  u32 LE (1)
//! count    u32 LE
//! count × entry:
//!     name_len u16 LE, name (UTF-8)
//!     rank     u8, dims (u32 LE × rank)
//!     values   f32 LE × product(dims)
//! crc32    u32 LE over every preceding byte
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LPWT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

impl TensorEntry {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, values: Vec<f32>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), values.len());
        Self { name: name.into(), dims, values }
    }

    pub fn scalar(name: impl Into<String>, value: f32) -> Self {
        Self::new(name, vec![1], vec![value])
    }

    pub fn vector(name: impl Into<String>, values: Vec<f32>) -> Self {
        let n = values.len();
        Self::new(name, vec![n], values)
    }
}

/// Ordered list of uniquely named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Archive {
    entries: Vec<TensorEntry>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: TensorEntry) -> Result<()> {
        if self.get(&entry.name).is_some() {
            return Err(Error::Format(format!("duplicate entry '{}'", entry.name)));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[TensorEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<TensorEntry> {
        self.entries
    }

    pub fn get(&self, name: &str) -> Option<&TensorEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Looks up an entry and checks its shape.
    pub fn require(&self, name: &str, dims: &[usize]) -> Result<&TensorEntry> {
        let entry = self.get(name).ok_or_else(|| Error::Incomplete {
            missing: vec![name.to_string()],
            extra: vec![],
        })?;
        if entry.dims != dims {
            return Err(Error::Shape(format!(
                "entry '{name}' has dims {:?}, expected {dims:?}",
                entry.dims
            )));
        }
        Ok(entry)
    }

    pub fn scalar(&self, name: &str) -> Result<f32> {
        Ok(self.require(name, &[1])?.values[0])
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&u32_len(self.entries.len(), "entry count")?.to_le_bytes());
        for e in &self.entries {
            let name = e.name.as_bytes();
            let name_len = u16::try_from(name.len())
                .map_err(|_| Error::Format(format!("entry name '{}' too long", e.name)))?;
            let rank = u8::try_from(e.dims.len())
                .map_err(|_| Error::Format(format!("entry '{}' rank too large", e.name)))?;
            if e.dims.iter().product::<usize>() != e.values.len() {
                return Err(Error::Shape(format!(
                    "entry '{}' dims {:?} disagree with {} values",
                    e.name,
                    e.dims,
                    e.values.len()
                )));
            }
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name);
            out.push(rank);
            for &d in &e.dims {
                out.extend_from_slice(&u32_len(d, "dimension")?.to_le_bytes());
            }
            out.reserve(4 * e.values.len());
            for v in &e.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Format("file too short for an LPWT header".into()));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format(format!("bad magic {:?}, expected \"LPWT\"", &bytes[..4])));
        }
        let (payload, tail) = bytes.split_at(bytes.len() - 4);
        let version = u32::from_le_bytes(payload[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported LPWT version {version}")));
        }
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut r = Reader { buf: payload, pos: 8, entry: None };
        let count = r.u32()? as usize;
        let mut archive = Archive::new();
        let mut seen = HashSet::new();
        for index in 0..count {
            r.entry = Some(format!("#{index}"));
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format(format!("entry #{index} name is not UTF-8")))?
                .to_string();
            r.entry = Some(name.clone());
            let rank = r.u8()? as usize;
            let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let count = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Format(format!("entry '{name}' dims overflow")))?;
            let raw = r.take(count.checked_mul(4).ok_or_else(|| {
                Error::Format(format!("entry '{name}' dims overflow"))
            })?)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if !seen.insert(name.clone()) {
                return Err(Error::Format(format!("duplicate entry '{name}'")));
            }
            archive.entries.push(TensorEntry { name, dims, values });
        }
        r.entry = None;
        if r.pos != payload.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after last entry",
                payload.len() - r.pos
            )));
        }
        Ok(archive)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }
}

fn u32_len(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("{what} {n} exceeds u32")))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    entry: Option<String>,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(match &self.entry {
                Some(name) => format!("file truncated inside entry '{name}'"),
                None => "file truncated in header".into(),
            }));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Archive {
        let mut a = Archive::new();
        a.push(TensorEntry::new("w", vec![2, 3], (0..6).map(|i| i as f32).collect())).unwrap();
        a.push(TensorEntry::scalar("eps", 1e-5)).unwrap();
        a
    }

    #[test]
    fn layout_is_fixed() {
        let bytes = sample().to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"LPWT");
        assert_eq!(&bytes[4..12], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[12..15], &[1, 0, b'w']);
        assert_eq!(bytes[15], 2);
        let crc = crc32fast::hash(&bytes[..bytes.len() - 4]);
        assert_eq!(&bytes[bytes.len() - 4..], &crc.to_le_bytes());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = sample().to_bytes().unwrap();
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(Archive::from_bytes(&bad_magic), Err(Error::Format(_))));

        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert!(matches!(Archive::from_bytes(&bad_version), Err(Error::Format(_))));

        let mut flipped = bytes.clone();
        flipped[20] ^= 0xff;
        assert!(matches!(Archive::from_bytes(&flipped), Err(Error::Checksum { .. })));

        // cut inside the values of "w", then re-seal the checksum
        let mut cut = bytes[..30].to_vec();
        let crc = crc32fast::hash(&cut);
        cut.extend_from_slice(&crc.to_le_bytes());
        match Archive::from_bytes(&cut) {
            Err(Error::Format(msg)) => assert!(msg.contains("'w'"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn round_trip(
            entries in prop::collection::vec(
                (prop::collection::vec(1usize..4, 0..4), any::<u32>()), 0..6)
        ) {
            let mut a = Archive::new();
            for (i, (dims, seed)) in entries.into_iter().enumerate() {
                let n: usize = dims.iter().product();
                let values = (0..n).map(|k| f32::from_bits(seed.wrapping_add((k as u32).wrapping_mul(2_654_435_761)) & 0x7f7f_ffff)).collect();
                a.push(TensorEntry::new(format!("t{i}"), dims, values)).unwrap();
            }
            let bytes = a.to_bytes().unwrap();
            let back = Archive::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }
}
