//! Dataset manifests and 8-bit grayscale image files.
//!
//! A manifest is a CSV file with header
//! `filename,class_id,pupil_cx,pupil_cy,pupil_r,iris_cx,iris_cy,iris_r`;
//! `filename` is resolved relative to the manifest's directory. Images are
//! 8-bit grayscale PNG, or raw `.gray` files: width and height as `u32`
//! little-endian followed by `width·height` bytes.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalize::{rubber_sheet, CircleAnnotation, EyeImage, NormalizedIris, ANGULAR, RADIAL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub filename: String,
    pub class_id: u32,
    pub pupil_cx: f64,
    pub pupil_cy: f64,
    pub pupil_r: f64,
    pub iris_cx: f64,
    pub iris_cy: f64,
    pub iris_r: f64,
}

impl ManifestRow {
    pub fn circles(&self) -> CircleAnnotation {
        CircleAnnotation {
            pupil_cx: self.pupil_cx,
            pupil_cy: self.pupil_cy,
            pupil_r: self.pupil_r,
            iris_cx: self.iris_cx,
            iris_cy: self.iris_cy,
            iris_r: self.iris_r,
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<ManifestRow>, _>>()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    Ok(rows)
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_image(path: &Path) -> Result<EyeImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("gray") => decode_gray(&bytes).map_err(|e| annotate(e, path)),
        Some("png") => decode_png(&bytes).map_err(|e| annotate(e, path)),
        _ => Err(Error::Format(format!(
            "{}: unsupported image extension (expected .png or .gray)",
            path.display()
        ))),
    }
}

fn annotate(e: Error, path: &Path) -> Error {
    match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    }
}

pub fn decode_gray(bytes: &[u8]) -> Result<EyeImage> {
    if bytes.len() < 8 {
        return Err(Error::Format("raw image header truncated".into()));
    }
    let width = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() != width * height {
        return Err(Error::Format(format!(
            "raw {width}x{height} image needs {} bytes, found {}",
            width * height,
            body.len()
        )));
    }
    EyeImage::from_u8(width, height, body)
}

pub fn encode_gray(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + pixels.len());
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    out.extend_from_slice(pixels);
    out
}

pub fn decode_png(bytes: &[u8]) -> Result<EyeImage> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(|e| Error::Format(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Format(e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let gray = match info.color_type {
        png::ColorType::Grayscale => buf[..w * h].to_vec(),
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).take(w * h).map(|p| p[0]).collect(),
        other => {
            return Err(Error::Format(format!("expected 8-bit grayscale PNG, found {other:?}")))
        }
    };
    EyeImage::from_u8(w, h, &gray)
}

pub fn write_png(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let to_err = |e: png::EncodingError| Error::Format(format!("{}: {e}", path.display()));
    let mut writer = encoder.write_header().map_err(to_err)?;
    writer.write_image_data(pixels).map_err(to_err)?;
    writer.finish().map_err(to_err)
}

/// Normalized irises with their class labels, ready for feature extraction.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub irises: Vec<NormalizedIris>,
    pub labels: Vec<u32>,
    pub names: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Reads every manifest entry and unwraps it to the standard 64×512 grid.
    pub fn from_manifest(path: &Path) -> Result<Self> {
        let rows = read_manifest(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        let irises = rows
            .par_iter()
            .map(|row| {
                let image_path = base.join(&row.filename);
                let image = read_image(&image_path)?;
                rubber_sheet(&image, &row.circles(), RADIAL, ANGULAR).map_err(|e| match e {
                    Error::InvalidAnnotation(msg) => {
                        Error::InvalidAnnotation(format!("{}: {msg}", row.filename))
                    }
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            irises,
            labels: rows.iter().map(|r| r.class_id).collect(),
            names: rows.into_iter().map(|r| r.filename).collect(),
        })
    }
}
