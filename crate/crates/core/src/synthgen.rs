//! Deterministic synthetic eye images with known circle annotations.
//!
//! Each class owns a texture defined on the unwrapped annulus `(ρ, θ)`,
//! `ρ ∈ [0, 1]` from pupil to iris boundary: a sum of 8 to 16 seeded
//! sinusoids `a·sin(2π·f·ρ + m·θ + φ)` with integer angular frequency `m`,
//! plus periodic bilinear value noise on a coarse polar lattice. The texture
//! is painted through the same linear pupil-to-iris mapping the rubber sheet
//! inverts, so normalization recovers it up to resampling error.
//!
//! Per-sample perturbations are a rotation, a pupil-radius dilation and
//! additive Gaussian pixel noise. All randomness is ChaCha8 keyed by
//! [`derive_seed`] on `(seed, class)` for class parameters and
//! `(seed, class, sample)` for perturbations.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{encode_gray, write_manifest, write_png, ManifestRow};
use crate::error::{Error, Result};
use crate::normalize::CircleAnnotation;
use crate::seed::{derive_seed, rng, stream};

pub const MANIFEST_NAME: &str = "manifest.csv";

const PUPIL_LEVEL: f64 = 0.08;
const SCLERA_LEVEL: f64 = 0.74;
const VALUE_NOISE_RADIAL: usize = 6;
const VALUE_NOISE_ANGULAR: usize = 48;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    #[default]
    Png,
    Gray,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub samples_per_class: usize,
    pub image_size: usize,
    pub seed: u64,
    /// Half-width of the uniform rotation jitter, radians.
    pub rotation_jitter: f64,
    /// Half-width of the uniform pupil-radius jitter, as a fraction of the radius.
    pub dilation_jitter: f64,
    pub noise_sigma: f64,
    pub format: ImageFormat,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_classes: 20,
            samples_per_class: 10,
            image_size: 240,
            seed: 42,
            rotation_jitter: 0.03,
            dilation_jitter: 0.1,
            noise_sigma: 0.03,
            format: ImageFormat::Png,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::Config(format!("n_classes must be >= 2, got {}", self.n_classes)));
        }
        if self.samples_per_class < 2 {
            return Err(Error::Config(format!(
                "samples_per_class must be >= 2, got {}",
                self.samples_per_class
            )));
        }
        if self.image_size < 32 {
            return Err(Error::Config(format!("image_size must be >= 32, got {}", self.image_size)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if !(0.0..std::f64::consts::PI).contains(&self.rotation_jitter) {
            return Err(Error::Config(format!(
                "rotation_jitter must lie in [0, π), got {}",
                self.rotation_jitter
            )));
        }
        if !(0.0..0.5).contains(&self.dilation_jitter) {
            return Err(Error::Config(format!(
                "dilation_jitter must lie in [0, 0.5), got {}",
                self.dilation_jitter
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Sinusoid {
    amplitude: f64,
    radial_freq: f64,
    angular_freq: f64,
    phase: f64,
}

/// Class-level geometry and texture.
#[derive(Clone, Debug)]
pub struct ClassModel {
    circles: CircleAnnotation,
    sinusoids: Vec<Sinusoid>,
    sinusoid_scale: f64,
    value_noise: Vec<f64>,
}

impl ClassModel {
    pub fn new(cfg: &SynthConfig, class_id: u32) -> Self {
        let mut r = rng(derive_seed(cfg.seed, &[stream::TEXTURE, u64::from(class_id)]));
        let size = cfg.image_size as f64;
        let iris_cx = size / 2.0 + r.random_range(-0.03..0.03) * size;
        let iris_cy = size / 2.0 + r.random_range(-0.03..0.03) * size;
        let iris_r = r.random_range(0.36..0.42) * size;
        let pupil_r = r.random_range(0.30..0.45) * iris_r;
        let pupil_cx = iris_cx + r.random_range(-0.02..0.02) * size;
        let pupil_cy = iris_cy + r.random_range(-0.02..0.02) * size;

        let count = r.random_range(8..=16);
        let sinusoids: Vec<Sinusoid> = (0..count)
            .map(|_| Sinusoid {
                amplitude: r.random_range(0.3..1.0),
                radial_freq: r.random_range(0.5..4.0),
                angular_freq: f64::from(r.random_range(1..=24u32)),
                phase: r.random_range(0.0..TAU),
            })
            .collect();
        let power: f64 = sinusoids.iter().map(|s| s.amplitude * s.amplitude / 2.0).sum();
        let value_noise = (0..VALUE_NOISE_RADIAL * VALUE_NOISE_ANGULAR)
            .map(|_| r.random_range(-1.0..1.0))
            .collect();

        Self {
            circles: CircleAnnotation { pupil_cx, pupil_cy, pupil_r, iris_cx, iris_cy, iris_r },
            sinusoids,
            sinusoid_scale: 0.12 / power.sqrt(),
            value_noise,
        }
    }

    pub fn circles(&self) -> CircleAnnotation {
        self.circles
    }

    /// Texture intensity at normalized radius `rho` and angle `theta`.
    pub fn texture(&self, rho: f64, theta: f64) -> f64 {
        let waves: f64 = self
            .sinusoids
            .iter()
            .map(|s| s.amplitude * (TAU * s.radial_freq * rho + s.angular_freq * theta + s.phase).sin())
            .sum();
        (0.5 + self.sinusoid_scale * waves + 0.1 * self.value_noise_at(rho, theta)).clamp(0.0, 1.0)
    }

    fn value_noise_at(&self, rho: f64, theta: f64) -> f64 {
        let u = rho.clamp(0.0, 1.0) * (VALUE_NOISE_RADIAL - 1) as f64;
        let v = theta.rem_euclid(TAU) / TAU * VALUE_NOISE_ANGULAR as f64;
        let (i0, j0) = (u.floor() as usize, v.floor() as usize);
        let (fu, fv) = (u - i0 as f64, v - j0 as f64);
        let i1 = (i0 + 1).min(VALUE_NOISE_RADIAL - 1);
        let j0 = j0 % VALUE_NOISE_ANGULAR;
        let j1 = (j0 + 1) % VALUE_NOISE_ANGULAR;
        let at = |i: usize, j: usize| self.value_noise[i * VALUE_NOISE_ANGULAR + j];
        let a = at(i0, j0) * (1.0 - fv) + at(i0, j1) * fv;
        let b = at(i1, j0) * (1.0 - fv) + at(i1, j1) * fv;
        a * (1.0 - fu) + b * fu
    }
}

/// Inverts the linear pupil-to-iris sheet: the point at `(ρ, θ)` lies on a
/// circle with center `pc + ρ(ic − pc)` and radius `pr + ρ(ir − pr)`.
fn sheet_coordinates(c: &CircleAnnotation, x: f64, y: f64) -> (f64, f64) {
    let (ax, ay) = (x - c.pupil_cx, y - c.pupil_cy);
    let (ex, ey) = (c.iris_cx - c.pupil_cx, c.iris_cy - c.pupil_cy);
    let s = c.iris_r - c.pupil_r;
    let qa = ex * ex + ey * ey - s * s;
    let qb = ax * ex + ay * ey + c.pupil_r * s;
    let qc = ax * ax + ay * ay - c.pupil_r * c.pupil_r;
    let rho = if qa.abs() < 1e-12 {
        qc / (2.0 * qb)
    } else {
        let disc = (qb * qb - qa * qc).max(0.0).sqrt();
        let lower = -c.pupil_r / s;
        [(qb + disc) / qa, (qb - disc) / qa]
            .into_iter()
            .filter(|r| *r > lower)
            .fold(f64::NAN, f64::max)
    };
    let cx = c.pupil_cx + rho * ex;
    let cy = c.pupil_cy + rho * ey;
    (rho, (cy - y).atan2(x - cx))
}

/// One rendered sample: 8-bit pixels plus its annotation.
pub struct Sample {
    pub pixels: Vec<u8>,
    pub circles: CircleAnnotation,
}

pub fn render_sample(cfg: &SynthConfig, class: &ClassModel, class_id: u32, sample_id: u32) -> Sample {
    let mut r = rng(derive_seed(
        cfg.seed,
        &[stream::SAMPLE, u64::from(class_id), u64::from(sample_id)],
    ));
    let rotation = symmetric(&mut r, cfg.rotation_jitter);
    let dilation = 1.0 + symmetric(&mut r, cfg.dilation_jitter);
    let mut circles = class.circles;
    circles.pupil_r *= dilation;

    let normal = Normal::new(0.0, cfg.noise_sigma).expect("sigma validated");
    let size = cfg.image_size;
    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (rho, theta) = sheet_coordinates(&circles, x as f64, y as f64);
            let base = if rho < 0.0 {
                PUPIL_LEVEL
            } else if rho > 1.0 {
                SCLERA_LEVEL
            } else {
                class.texture(rho, theta - rotation)
            };
            let noisy = if cfg.noise_sigma > 0.0 { base + normal.sample(&mut r) } else { base };
            pixels.push((noisy.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    Sample { pixels, circles }
}

fn symmetric(r: &mut impl Rng, half_width: f64) -> f64 {
    if half_width > 0.0 {
        r.random_range(-half_width..half_width)
    } else {
        0.0
    }
}

/// Writes all images and `manifest.csv` into `out_dir`; returns the manifest path.
pub fn generate(cfg: &SynthConfig, out_dir: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let ext = match cfg.format {
        ImageFormat::Png => "png",
        ImageFormat::Gray => "gray",
    };
    let classes: Vec<ClassModel> =
        (0..cfg.n_classes as u32).map(|c| ClassModel::new(cfg, c)).collect();
    let jobs: Vec<(u32, u32)> = (0..cfg.n_classes as u32)
        .flat_map(|c| (0..cfg.samples_per_class as u32).map(move |s| (c, s)))
        .collect();

    let rows = jobs
        .par_iter()
        .map(|&(class_id, sample_id)| {
            let sample = render_sample(cfg, &classes[class_id as usize], class_id, sample_id);
            let filename = format!("c{class_id:04}_s{sample_id:03}.{ext}");
            let path = out_dir.join(&filename);
            match cfg.format {
                ImageFormat::Png => write_png(&path, cfg.image_size, cfg.image_size, &sample.pixels)?,
                ImageFormat::Gray => {
                    let bytes = encode_gray(cfg.image_size, cfg.image_size, &sample.pixels);
                    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?
                }
            }
            let c = sample.circles;
            Ok(ManifestRow {
                filename,
                class_id,
                pupil_cx: c.pupil_cx,
                pupil_cy: c.pupil_cy,
                pupil_r: c.pupil_r,
                iris_cx: c.iris_cx,
                iris_cy: c.iris_cy,
                iris_r: c.iris_r,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = out_dir.join(MANIFEST_NAME);
    write_manifest(&manifest, &rows)?;
    Ok(manifest)
}
