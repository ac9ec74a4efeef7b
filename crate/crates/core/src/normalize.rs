//! Rubber-sheet unwrapping of the iris annulus.
//!
//! Angles follow the screen convention: `θ = 0` points along `+x` and grows
//! counterclockwise as the image is displayed (image `y` grows downward), so
//! a boundary point is `(cx + r·cos θ, cy − r·sin θ)`. Column `j` samples
//! `θ_j = 2πj / angular`; row `0` lies on the pupil boundary and row
//! `radial − 1` on the iris boundary.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const RADIAL: usize = 64;
pub const ANGULAR: usize = 512;

/// Grayscale eye image with intensities in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EyeImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl EyeImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty image {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidImage(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(Self { width, height, pixels })
    }

    /// Maps 8-bit intensities to `[0, 1]` by division by 255.
    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| f32::from(b) / 255.0).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    /// Bilinear sample at continuous pixel coordinates; pixel centers sit on
    /// integer coordinates and out-of-range positions clamp to the edge.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let px = |xx: usize, yy: usize| f64::from(self.pixels[yy * self.width + xx]);
        let top = px(x0, y0) * (1.0 - fx) + px(x1, y0) * fx;
        let bottom = px(x0, y1) * (1.0 - fx) + px(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Pupil and iris boundary circles in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleAnnotation {
    pub pupil_cx: f64,
    pub pupil_cy: f64,
    pub pupil_r: f64,
    pub iris_cx: f64,
    pub iris_cy: f64,
    pub iris_r: f64,
}

impl CircleAnnotation {
    pub fn pupil_point(&self, theta: f64) -> (f64, f64) {
        (self.pupil_cx + self.pupil_r * theta.cos(), self.pupil_cy - self.pupil_r * theta.sin())
    }

    pub fn iris_point(&self, theta: f64) -> (f64, f64) {
        (self.iris_cx + self.iris_r * theta.cos(), self.iris_cy - self.iris_r * theta.sin())
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let values = [
            self.pupil_cx,
            self.pupil_cy,
            self.pupil_r,
            self.iris_cx,
            self.iris_cy,
            self.iris_r,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidAnnotation("non-finite circle parameter".into()));
        }
        if self.pupil_r <= 0.0 || self.iris_r <= 0.0 {
            return Err(Error::InvalidAnnotation(format!(
                "radii must be positive (pupil {}, iris {})",
                self.pupil_r, self.iris_r
            )));
        }
        let inside = |cx: f64, cy: f64| {
            (0.0..width as f64).contains(&cx) && (0.0..height as f64).contains(&cy)
        };
        if !inside(self.pupil_cx, self.pupil_cy) || !inside(self.iris_cx, self.iris_cy) {
            return Err(Error::InvalidAnnotation(format!(
                "circle centers ({}, {}) / ({}, {}) outside {width}x{height} image",
                self.pupil_cx, self.pupil_cy, self.iris_cx, self.iris_cy
            )));
        }
        Ok(())
    }
}

/// Unwrapped iris texture, `rows` radial by `cols` angular, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedIris {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl NormalizedIris {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "normalized iris {rows}x{cols} cannot hold {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidImage("normalized values must lie in [0, 1]".into()));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.cols + col]
    }
}

/// Daugman rubber-sheet normalization with non-concentric circle support.
pub fn rubber_sheet(
    image: &EyeImage,
    circles: &CircleAnnotation,
    radial: usize,
    angular: usize,
) -> Result<NormalizedIris> {
    if radial < 2 || angular == 0 {
        return Err(Error::Parameter(format!(
            "grid {radial}x{angular} needs at least 2 radial and 1 angular sample"
        )));
    }
    circles.validate(image.width(), image.height())?;

    let mut values = vec![0.0f32; radial * angular];
    let denom = (radial - 1) as f64;
    for j in 0..angular {
        let theta = TAU * j as f64 / angular as f64;
        let (px, py) = circles.pupil_point(theta);
        let (ix, iy) = circles.iris_point(theta);
        let (dx, dy) = (ix - px, iy - py);
        if dx.hypot(dy) < 1e-9 {
            return Err(Error::DegenerateAnnotation { theta });
        }
        for i in 0..radial {
            let t = i as f64 / denom;
            let v = image.sample(px + t * dx, py + t * dy);
            values[i * angular + j] = v.clamp(0.0, 1.0) as f32;
        }
    }
    NormalizedIris::new(radial, angular, values)
}

/// Copies the single grayscale plane into three identical channels.
pub fn replicate_channels(n: &NormalizedIris) -> Tensor {
    let mut data = Vec::with_capacity(3 * n.values.len());
    for _ in 0..3 {
        data.extend_from_slice(&n.values);
    }
    Tensor::new([3, n.rows, n.cols], data).expect("dims match by construction")
}
