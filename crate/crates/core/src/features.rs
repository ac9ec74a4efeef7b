//! Per-tap feature matrices and min-max scaling.
//!
//! `LPFM` file layout:
//!
//! ```text
//! magic "LPFM", version u32 LE (1), n u32 LE, d u32 LE, tap u16 LE,
//! name_len u16 LE, layer name (UTF-8), labels u32 LE × n,
//! data f32 LE × n·d (row-major), crc32 u32 LE over every preceding byte
//! ```

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TapIndex;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"LPFM";
pub const VERSION: u32 = 1;

/// `n × d` row-major samples with class labels, tied to one tap.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    data: Vec<f32>,
    labels: Vec<u32>,
    pub tap: TapIndex,
    pub layer_name: String,
}

impl FeatureMatrix {
    pub fn new(
        n: usize,
        d: usize,
        data: Vec<f32>,
        labels: Vec<u32>,
        tap: TapIndex,
        layer_name: impl Into<String>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::Shape("feature matrix needs d >= 1".into()));
        }
        if data.len() != n * d {
            return Err(Error::Shape(format!(
                "{n}x{d} feature matrix cannot hold {} values",
                data.len()
            )));
        }
        if labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} rows", labels.len())));
        }
        Ok(Self { n, d, data, labels, tap, layer_name: layer_name.into() })
    }

    /// Stacks equally long rows.
    pub fn from_rows(
        rows: Vec<Vec<f32>>,
        labels: Vec<u32>,
        tap: TapIndex,
        layer_name: impl Into<String>,
    ) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Shape(format!("row of length {} among rows of length {d}", bad.len())));
        }
        let n = rows.len();
        Self::new(n, d, rows.concat(), labels, tap, layer_name)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.d)
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n: indices.len(),
            d: self.d,
            data,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            tap: self.tap,
            layer_name: self.layer_name.clone(),
        }
    }

    /// Same rows, labels and tap metadata with new feature columns.
    pub fn with_data(&self, d: usize, data: Vec<f32>) -> Result<Self> {
        Self::new(self.n, d, data, self.labels.clone(), self.tap, self.layer_name.clone())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let name = self.layer_name.as_bytes();
        let too_big = |what: &str| Error::Format(format!("{what} does not fit the LPFM header"));
        let n = u32::try_from(self.n).map_err(|_| too_big("n"))?;
        let d = u32::try_from(self.d).map_err(|_| too_big("d"))?;
        let tap = u16::try_from(self.tap.get()).map_err(|_| too_big("tap index"))?;
        let name_len = u16::try_from(name.len()).map_err(|_| too_big("layer name"))?;

        let mut out = Vec::with_capacity(24 + name.len() + 4 * (self.n + self.data.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&n.to_le_bytes());
        out.extend_from_slice(&d.to_le_bytes());
        out.extend_from_slice(&tap.to_le_bytes());
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name);
        self.labels.iter().for_each(|l| out.extend_from_slice(&l.to_le_bytes()));
        self.data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let short = || Error::Format("LPFM file truncated".into());
        if bytes.len() < 24 {
            return Err(short());
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format(format!("bad magic {:?}, expected \"LPFM\"", &bytes[..4])));
        }
        let (payload, tail) = bytes.split_at(bytes.len() - 4);
        let u32_at = |at: usize| u32::from_le_bytes(payload[at..at + 4].try_into().unwrap());
        let u16_at = |at: usize| u16::from_le_bytes(payload[at..at + 2].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported LPFM version {version}")));
        }
        let (n, d) = (u32_at(8) as usize, u32_at(12) as usize);
        let tap = TapIndex::from_raw(u16_at(16) as usize);
        let name_len = u16_at(18) as usize;
        let labels_at = 20 + name_len;
        let data_at = labels_at + 4 * n;
        let expected = n
            .checked_mul(d)
            .and_then(|nd| nd.checked_mul(4))
            .and_then(|b| b.checked_add(data_at))
            .ok_or_else(short)?;
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "LPFM payload is {} bytes, header implies {expected}",
                payload.len()
            )));
        }
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let layer_name = std::str::from_utf8(&payload[20..labels_at])
            .map_err(|_| Error::Format("layer name is not UTF-8".into()))?
            .to_string();
        let labels = payload[labels_at..data_at]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let data = payload[data_at..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(n, d, data, labels, tap, layer_name)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }
}

/// Flattens a tap in storage order (channel, row, column).
pub fn flatten(tap: &Tensor) -> Vec<f32> {
    tap.data().to_vec()
}

pub fn unflatten(values: Vec<f32>, dims: [usize; 3]) -> Result<Tensor> {
    Tensor::new(dims, values)
}

/// Column ranges fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f32>,
    pub maxs: Vec<f32>,
}

impl MinMaxScaler {
    pub fn fit(train: &FeatureMatrix) -> Result<Self> {
        if train.n() == 0 {
            return Err(Error::InsufficientData("min-max fit needs at least one row".into()));
        }
        let d = train.d();
        let mut mins = train.row(0).to_vec();
        let mut maxs = mins.clone();
        for row in train.rows().skip(1) {
            for ((lo, hi), &v) in mins.iter_mut().zip(maxs.iter_mut()).zip(row) {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
        }
        debug_assert_eq!(mins.len(), d);
        Ok(Self { mins, maxs })
    }

    pub fn d(&self) -> usize {
        self.mins.len()
    }

    /// `(x − min) / (max − min)` per column; constant columns map to 0. No clipping.
    pub fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.d() != self.d() {
            return Err(Error::Shape(format!(
                "scaler fitted on {} features, matrix has {}",
                self.d(),
                m.d()
            )));
        }
        let params: Vec<(f64, f64)> = self
            .mins
            .iter()
            .zip(&self.maxs)
            .map(|(&lo, &hi)| {
                let range = f64::from(hi) - f64::from(lo);
                (f64::from(lo), if range > 0.0 { 1.0 / range } else { 0.0 })
            })
            .collect();
        let mut data = vec![0.0f32; m.data().len()];
        data.par_chunks_mut(m.d()).zip(m.data().par_chunks(m.d())).for_each(|(dst, src)| {
            for ((o, &x), &(lo, inv)) in dst.iter_mut().zip(src).zip(&params) {
                *o = if inv == 0.0 { 0.0 } else { ((f64::from(x) - lo) * inv) as f32 };
            }
        });
        m.with_data(m.d(), data)
    }
}
