//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use layerprobe::dataset::Dataset;
use layerprobe::model::ConvSpec;
use layerprobe::synthgen::{generate, SynthConfig};
use layerprobe::Tensor;

/// Direct seven-loop cross-correlation with f64 accumulation.
pub fn naive_conv(input: &Tensor, spec: &ConvSpec) -> Vec<f32> {
    let [c_in, h, w] = input.dims();
    let (kh, kw) = spec.kernel;
    let (sh, sw) = spec.stride;
    let (ph, pw) = spec.padding;
    let oh = (h + 2 * ph - kh) / sh + 1;
    let ow = (w + 2 * pw - kw) / sw + 1;
    let mut out = vec![0.0f32; spec.out_channels * oh * ow];
    for o in 0..spec.out_channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = spec.bias.as_ref().map_or(0.0, |b| f64::from(b[o]));
                for c in 0..c_in {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (y * sh + ky) as isize - ph as isize;
                            let ix = (x * sw + kx) as isize - pw as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let wv = spec.weights[((o * c_in + c) * kh + ky) * kw + kx];
                            acc += f64::from(wv) * f64::from(input.get(c, iy as usize, ix as usize));
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = acc as f32;
            }
        }
    }
    out
}

/// TPR at FMR by trying every candidate threshold and counting with plain loops.
pub fn brute_tpr_at_fmr(genuine: &[f64], impostor: &[f64], target: f64) -> f64 {
    let mut candidates: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    candidates.push(f64::INFINITY);
    let mut best = 0.0f64;
    for &t in &candidates {
        let mut false_matches = 0usize;
        for &s in impostor {
            if s >= t {
                false_matches += 1;
            }
        }
        let mut hits = 0usize;
        for &s in genuine {
            if s >= t {
                hits += 1;
            }
        }
        let fmr = false_matches as f64 / impostor.len() as f64;
        let tpr = hits as f64 / genuine.len() as f64;
        if fmr <= target && tpr > best {
            best = tpr;
        }
    }
    best
}

/// Minimizes the bias-augmented SVM dual `½αᵀQα − Σα` over the box `[0, C]`
/// with accelerated projected gradient, then returns the primal objective of
/// the recovered `(w, b)`.
pub fn svm_primal_oracle(x: &[Vec<f64>], y: &[f64], c: f64, iters: usize) -> f64 {
    let n = x.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let k: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum::<f64>() + 1.0;
                    y[i] * y[j] * k
                })
                .collect()
        })
        .collect();
    let lipschitz: f64 = q.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let mut alpha = vec![0.0; n];
    let mut prev = alpha.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        let z: Vec<f64> = (0..n).map(|i| alpha[i] + momentum * (alpha[i] - prev[i])).collect();
        prev.clone_from(&alpha);
        for i in 0..n {
            let grad: f64 = q[i].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() - 1.0;
            alpha[i] = (z[i] - step * grad).clamp(0.0, c);
        }
        t = t_next;
    }
    let d = x[0].len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for i in 0..n {
        for k in 0..d {
            w[k] += alpha[i] * y[i] * x[i][k];
        }
        b += alpha[i] * y[i];
    }
    let reg = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
    let hinge: f64 = (0..n)
        .map(|i| {
            let f: f64 = w.iter().zip(&x[i]).map(|(a, b)| a * b).sum::<f64>() + b;
            (1.0 - y[i] * f).max(0.0)
        })
        .sum();
    reg + c * hinge
}

/// Small synthetic dataset written to `dir` and loaded back.
pub fn synthetic_dataset(dir: &Path, cfg: &SynthConfig) -> Dataset {
    let manifest = generate(cfg, dir).expect("generate");
    Dataset::from_manifest(&manifest).expect("load")
}

/// Pearson correlation.
pub fn correlation(a: &[f32], b: &[f32]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let mb = b.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (f64::from(x) - ma, f64::from(y) - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}
