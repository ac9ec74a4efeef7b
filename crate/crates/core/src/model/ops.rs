//! Layer primitives for channel-first `f32` tensors.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// 2-D convolution parameters; weights are laid out `out × in × kh × kw`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub weights: Vec<f32>,
    pub bias: Option<Vec<f32>>,
}

impl ConvSpec {
    pub fn zeros(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weights: vec![0.0; out_channels * in_channels * kernel.0 * kernel.1],
            bias: None,
        }
    }

    pub fn weight_dims(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel.0, self.kernel.1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.kernel.0 == 0 || self.kernel.1 == 0 {
            return Err(Error::Shape(format!("degenerate conv {:?}", self.weight_dims())));
        }
        if self.stride.0 == 0 || self.stride.1 == 0 {
            return Err(Error::Shape(format!("conv stride {:?} must be >= 1", self.stride)));
        }
        let expected: usize = self.weight_dims().iter().product();
        if self.weights.len() != expected {
            return Err(Error::Shape(format!(
                "conv weights {:?} need {expected} values, got {}",
                self.weight_dims(),
                self.weights.len()
            )));
        }
        if let Some(b) = &self.bias {
            if b.len() != self.out_channels {
                return Err(Error::Shape(format!(
                    "conv bias has {} entries for {} output channels",
                    b.len(),
                    self.out_channels
                )));
            }
        }
        Ok(())
    }

    pub fn output_size(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        window_output(height, width, self.kernel, self.stride, self.padding)
    }
}

fn window_output(
    height: usize,
    width: usize,
    kernel: (usize, usize),
    stride: (usize, usize),
    padding: (usize, usize),
) -> Result<(usize, usize)> {
    let (ph, pw) = (height + 2 * padding.0, width + 2 * padding.1);
    if ph < kernel.0 || pw < kernel.1 {
        return Err(Error::Shape(format!(
            "padded input {ph}x{pw} smaller than window {}x{}",
            kernel.0, kernel.1
        )));
    }
    Ok(((ph - kernel.0) / stride.0 + 1, (pw - kernel.1) / stride.1 + 1))
}

/// Cross-correlation with zero padding, plus optional bias.
pub fn conv2d(input: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    spec.validate()?;
    if input.channels() != spec.in_channels {
        return Err(Error::Shape(format!(
            "conv expects {} input channels, got {}",
            spec.in_channels,
            input.channels()
        )));
    }
    let (h, w) = (input.height(), input.width());
    let (oh, ow) = spec.output_size(h, w)?;
    let plane = oh * ow;
    let depth = spec.in_channels * spec.kernel.0 * spec.kernel.1;

    let pointwise = spec.kernel == (1, 1) && spec.stride == (1, 1) && spec.padding == (0, 0);
    let lowered;
    let columns: &[f32] = if pointwise {
        input.data()
    } else {
        lowered = im2col(input, spec, oh, ow);
        &lowered
    };

    let mut out = vec![0.0f32; spec.out_channels * plane];
    out.par_chunks_mut(plane).enumerate().for_each(|(o, dst)| {
        if let Some(bias) = &spec.bias {
            dst.fill(bias[o]);
        }
        let kernel = &spec.weights[o * depth..(o + 1) * depth];
        for (k, &wk) in kernel.iter().enumerate() {
            let src = &columns[k * plane..(k + 1) * plane];
            dst.iter_mut().zip(src).for_each(|(d, &s)| *d += wk * s);
        }
    });
    Tensor::new([spec.out_channels, oh, ow], out)
}

/// Lowers the receptive fields to a `(in·kh·kw) × (oh·ow)` matrix.
fn im2col(input: &Tensor, spec: &ConvSpec, oh: usize, ow: usize) -> Vec<f32> {
    let (h, w) = (input.height() as isize, input.width() as isize);
    let (kh, kw) = spec.kernel;
    let (sh, sw) = spec.stride;
    let (ph, pw) = (spec.padding.0 as isize, spec.padding.1 as isize);
    let plane = oh * ow;
    let mut cols = vec![0.0f32; spec.in_channels * kh * kw * plane];
    cols.par_chunks_mut(plane).enumerate().for_each(|(row, dst)| {
        let c = row / (kh * kw);
        let ky = (row / kw) % kh;
        let kx = row % kw;
        let src = input.plane(c);
        for oy in 0..oh {
            let iy = (oy * sh + ky) as isize - ph;
            if iy < 0 || iy >= h {
                continue;
            }
            let src_row = &src[iy as usize * w as usize..(iy as usize + 1) * w as usize];
            let dst_row = &mut dst[oy * ow..(oy + 1) * ow];
            for (ox, d) in dst_row.iter_mut().enumerate() {
                let ix = (ox * sw + kx) as isize - pw;
                if ix >= 0 && ix < w {
                    *d = src_row[ix as usize];
                }
            }
        }
    });
    cols
}

/// Inference-mode batch normalization parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub mean: Vec<f32>,
    pub variance: Vec<f32>,
    pub epsilon: f32,
}

impl BatchNormParams {
    pub fn identity(channels: usize, epsilon: f32) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            mean: vec![0.0; channels],
            variance: vec![1.0; channels],
            epsilon,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.gamma.len();
        if self.beta.len() != n || self.mean.len() != n || self.variance.len() != n {
            return Err(Error::Shape("batchnorm vectors differ in length".into()));
        }
        if self.variance.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Parameter("batchnorm variance must be non-negative".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Parameter(format!(
                "batchnorm epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

pub fn batchnorm(input: &Tensor, p: &BatchNormParams) -> Result<Tensor> {
    p.validate()?;
    if input.channels() != p.channels() {
        return Err(Error::Shape(format!(
            "batchnorm has {} channels, input has {}",
            p.channels(),
            input.channels()
        )));
    }
    let mut out = input.clone();
    let plane = input.height() * input.width();
    out.data_mut().par_chunks_mut(plane).enumerate().for_each(|(c, dst)| {
        let inv = 1.0 / (f64::from(p.variance[c]) + f64::from(p.epsilon)).sqrt();
        let scale = (f64::from(p.gamma[c]) * inv) as f32;
        let shift = (f64::from(p.beta[c]) - f64::from(p.mean[c]) * f64::from(p.gamma[c]) * inv) as f32;
        dst.iter_mut().for_each(|v| *v = *v * scale + shift);
    });
    Ok(out)
}

pub fn relu(mut input: Tensor) -> Tensor {
    input.map_inplace(|v| v.max(0.0));
    input
}

/// Window maximum; padded positions never win (negative-infinity padding).
pub fn maxpool(
    input: &Tensor,
    kernel: (usize, usize),
    stride: (usize, usize),
    padding: (usize, usize),
) -> Result<Tensor> {
    if kernel.0 == 0 || kernel.1 == 0 || stride.0 == 0 || stride.1 == 0 {
        return Err(Error::Shape("maxpool kernel and stride must be positive".into()));
    }
    let (h, w) = (input.height() as isize, input.width() as isize);
    let (oh, ow) = window_output(input.height(), input.width(), kernel, stride, padding)?;
    let mut out = vec![f32::NEG_INFINITY; input.channels() * oh * ow];
    out.par_chunks_mut(oh * ow).enumerate().for_each(|(c, dst)| {
        let src = input.plane(c);
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f32::NEG_INFINITY;
                for ky in 0..kernel.0 {
                    let iy = (oy * stride.0 + ky) as isize - padding.0 as isize;
                    if iy < 0 || iy >= h {
                        continue;
                    }
                    for kx in 0..kernel.1 {
                        let ix = (ox * stride.1 + kx) as isize - padding.1 as isize;
                        if ix >= 0 && ix < w {
                            best = best.max(src[(iy * w + ix) as usize]);
                        }
                    }
                }
                dst[oy * ow + ox] = best;
            }
        }
    });
    Tensor::new([input.channels(), oh, ow], out)
}

/// Per-channel spatial mean.
pub fn global_avg_pool(input: &Tensor) -> Vec<f32> {
    let plane = (input.height() * input.width()) as f64;
    (0..input.channels())
        .map(|c| (input.plane(c).iter().map(|&v| f64::from(v)).sum::<f64>() / plane) as f32)
        .collect()
}

pub fn add_inplace(acc: &mut Tensor, other: &Tensor) -> Result<()> {
    if acc.dims() != other.dims() {
        return Err(Error::Shape(format!(
            "residual add of {:?} and {:?}",
            acc.dims(),
            other.dims()
        )));
    }
    acc.data_mut().iter_mut().zip(other.data()).for_each(|(a, b)| *a += b);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_pointwise_conv() {
        let data: Vec<f32> = (0..3 * 4 * 5).map(|i| i as f32 * 0.25 - 3.0).collect();
        let input = Tensor::new([3, 4, 5], data).unwrap();
        let mut spec = ConvSpec::zeros(3, 3, (1, 1), (1, 1), (0, 0));
        for c in 0..3 {
            spec.weights[c * 3 + c] = 1.0;
        }
        assert_eq!(conv2d(&input, &spec).unwrap(), input);
    }

    #[test]
    fn stem_geometry() {
        let input = Tensor::zeros(3, 64, 512);
        let spec = ConvSpec::zeros(3, 64, (7, 7), (2, 2), (3, 3));
        let out = conv2d(&input, &spec).unwrap();
        assert_eq!(out.dims(), [64, 32, 256]);
        assert_eq!(out.len(), 524_288);
    }

    #[test]
    fn conv_shape_errors() {
        let input = Tensor::zeros(2, 3, 3);
        let spec = ConvSpec::zeros(3, 1, (1, 1), (1, 1), (0, 0));
        assert!(matches!(conv2d(&input, &spec), Err(Error::Shape(_))));
        let big = ConvSpec::zeros(2, 1, (5, 5), (1, 1), (0, 0));
        assert!(matches!(conv2d(&input, &big), Err(Error::Shape(_))));
    }

    #[test]
    fn near_identity_batchnorm() {
        let data: Vec<f32> = (0..2 * 3 * 3).map(|i| (i as f32 - 8.0) * 1.7).collect();
        let input = Tensor::new([2, 3, 3], data).unwrap();
        let eps = 1e-3f32;
        let out = batchnorm(&input, &BatchNormParams::identity(2, eps)).unwrap();
        for (x, y) in input.data().iter().zip(out.data()) {
            if *x != 0.0 {
                assert!(((x - y) / x).abs() <= eps, "{x} -> {y}");
            }
        }
    }

    #[test]
    fn relu_clears_negatives() {
        let t = relu(Tensor::filled(2, 2, 2, -0.5));
        assert!(t.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn maxpool_ignores_padding() {
        let t = Tensor::filled(1, 2, 2, -3.0);
        let out = maxpool(&t, (3, 3), (2, 2), (1, 1)).unwrap();
        assert_eq!(out.dims(), [1, 1, 1]);
        assert_eq!(out.data(), &[-3.0]);
    }

    #[test]
    fn gap_is_channel_mean() {
        let t = Tensor::new([2, 1, 2], vec![1.0, 3.0, -2.0, 6.0]).unwrap();
        assert_eq!(global_avg_pool(&t), vec![2.0, 2.0]);
    }
}
