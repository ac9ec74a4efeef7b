//! Row-major `f64` matrices and the handful of kernels PCA needs.
//!
//! Every kernel fixes its summation order independently of the thread count,
//! so results are bitwise reproducible under any rayon pool size.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Column block width for the blocked products.
const BLOCK: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// First `n` rows.
    pub fn top_rows(&self, n: usize) -> Mat {
        Mat::from_vec(n, self.cols, self.data[..n * self.cols].to_vec())
    }

    /// First `n` columns.
    pub fn left_cols(&self, n: usize) -> Mat {
        Mat::from_fn(self.rows, n, |i, j| self.get(i, j))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let (ca, ra) = (a.chunks_exact(4), a.len() % 4);
    for (x, y) in ca.zip(b.chunks_exact(4)) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = a[a.len() - ra..].iter().zip(&b[b.len() - ra..]).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// `A · Bᵀ` for `A: p×r`, `B: q×r`.
pub fn mul_abt(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.cols, "inner dimensions");
    let (p, q, r) = (a.rows, b.rows, a.cols);
    let mut c = Mat::zeros(p, q);
    for start in (0..r).step_by(BLOCK) {
        let end = (start + BLOCK).min(r);
        c.data.par_chunks_mut(q.max(1)).enumerate().for_each(|(i, ci)| {
            let ai = &a.row(i)[start..end];
            for (j, cij) in ci.iter_mut().enumerate() {
                *cij += dot(ai, &b.row(j)[start..end]);
            }
        });
    }
    c
}

/// `Aᵀ · B` for `A: r×p`, `B: r×q`.
pub fn mul_atb(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.rows, b.rows, "inner dimensions");
    let (p, q, r) = (a.cols, b.cols, a.rows);
    let blocks: Vec<(usize, Vec<f64>)> = (0..q)
        .step_by(BLOCK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let end = (start + BLOCK).min(q);
            let w = end - start;
            let mut buf = vec![0.0; p * w];
            for i in 0..r {
                let bi = &b.row(i)[start..end];
                for (j, &aij) in a.row(i).iter().enumerate() {
                    if aij != 0.0 {
                        axpy(aij, bi, &mut buf[j * w..(j + 1) * w]);
                    }
                }
            }
            (start, buf)
        })
        .collect();
    let mut c = Mat::zeros(p, q);
    for (start, buf) in blocks {
        let w = buf.len() / p.max(1);
        for j in 0..p {
            c.row_mut(j)[start..start + w].copy_from_slice(&buf[j * w..(j + 1) * w]);
        }
    }
    c
}

/// Orthonormalizes the rows of `m` in place by classical Gram-Schmidt with
/// one reorthogonalization pass, and returns the upper-triangular `R` with
/// `m_original = Rᵀ · m_orthonormal`.
///
/// A row that is numerically dependent on its predecessors gets `R[j][j] = 0`
/// and is replaced by a random unit vector orthogonal to them.
pub fn orthonormalize_rows(m: &mut Mat, rng: &mut impl Rng) -> Mat {
    let l = m.rows;
    let len = m.cols;
    assert!(l <= len, "cannot orthonormalize {l} rows of length {len}");
    let mut r = Mat::zeros(l, l);
    for j in 0..l {
        let (done, rest) = m.data.split_at_mut(j * len);
        let v = &mut rest[..len];
        let original = norm(v);
        for _ in 0..2 {
            let coeffs = project_out(done, len, v);
            for (i, c) in coeffs.into_iter().enumerate() {
                r.data[i * l + j] += c;
            }
        }
        let remaining = norm(v);
        if remaining > original * 1e-10 && remaining > f64::MIN_POSITIVE {
            r.data[j * l + j] = remaining;
            v.iter_mut().for_each(|x| *x /= remaining);
        } else {
            loop {
                v.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
                project_out(done, len, v);
                project_out(done, len, v);
                let nv = norm(v);
                if nv > 1e-3 {
                    v.iter_mut().for_each(|x| *x /= nv);
                    break;
                }
            }
        }
    }
    r
}

/// Removes from `v` its components along the orthonormal rows in `basis`,
/// returning the coefficients.
fn project_out(basis: &[f64], len: usize, v: &mut [f64]) -> Vec<f64> {
    if basis.is_empty() {
        return Vec::new();
    }
    let coeffs: Vec<f64> = basis.par_chunks(len).map(|q| dot(q, v)).collect();
    v.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
        let start = b * BLOCK;
        for (q, &c) in basis.chunks(len).zip(&coeffs) {
            axpy(-c, &q[start..start + chunk.len()], chunk);
        }
    });
    coeffs
}

/// Thin SVD of a small square matrix by one-sided Jacobi rotations.
///
/// Returns `(U, σ, V)` with `A = U · diag(σ) · Vᵀ`, σ sorted descending, and
/// `U`, `V` orthonormal (columns for zero singular values are completed to an
/// orthonormal basis).
pub fn jacobi_svd(a: &Mat) -> (Mat, Vec<f64>, Mat) {
    let n = a.rows;
    assert_eq!(n, a.cols, "jacobi_svd expects a square matrix");
    // Columns of A and of V, stored as rows for contiguous access.
    let mut cols = a.transpose();
    let mut vcols = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 });
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(cols.row(p), cols.row(p));
                let beta = dot(cols.row(q), cols.row(q));
                let gamma = dot(cols.row(p), cols.row(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(usize, f64)> = (0..n).map(|i| (i, norm(cols.row(i)))).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let sigma: Vec<f64> = order.iter().map(|&(_, s)| s).collect();
    let floor = sigma.first().copied().unwrap_or(0.0) * n as f64 * f64::EPSILON;

    let mut ut = Mat::zeros(n, n);
    let mut vt = Mat::zeros(n, n);
    let mut deficient = Vec::new();
    for (k, &(i, s)) in order.iter().enumerate() {
        vt.row_mut(k).copy_from_slice(vcols.row(i));
        if s > floor && s > 0.0 {
            let src = cols.row(i);
            ut.row_mut(k).iter_mut().zip(src).for_each(|(d, x)| *d = x / s);
        } else {
            deficient.push(k);
        }
    }
    for k in deficient {
        complete_row(&mut ut, k);
    }
    (ut.transpose(), sigma, vt.transpose())
}

fn rotate(m: &mut Mat, p: usize, q: usize, c: f64, s: f64) {
    let len = m.cols;
    let (head, tail) = m.data.split_at_mut(q * len);
    let rp = &mut head[p * len..(p + 1) * len];
    let rq = &mut tail[..len];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills row `k` with the standard basis vector that is most orthogonal to
/// the other nonzero rows, orthonormalized against them.
fn complete_row(m: &mut Mat, k: usize) {
    let n = m.cols;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for e in 0..n {
        let mut v = vec![0.0; n];
        v[e] = 1.0;
        for _ in 0..2 {
            for i in (0..m.rows).filter(|&i| i != k) {
                let row = m.row(i);
                let c = dot(row, &v);
                axpy(-c, row, &mut v);
            }
        }
        let nv = norm(&v);
        if best.as_ref().is_none_or(|(b, _)| nv > *b) {
            best = Some((nv, v));
        }
    }
    let (nv, v) = best.expect("n >= 1");
    m.row_mut(k).iter_mut().zip(&v).for_each(|(d, x)| *d = x / nv);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;

    #[test]
    fn products_agree_with_naive() {
        let mut r = rng(1);
        let a = Mat::gaussian(7, 1100, &mut r);
        let b = Mat::gaussian(5, 1100, &mut r);
        let c = mul_abt(&a, &b);
        for i in 0..7 {
            for j in 0..5 {
                let naive: f64 = (0..1100).map(|k| a.get(i, k) * b.get(j, k)).sum();
                assert!((c.get(i, j) - naive).abs() < 1e-10);
            }
        }
        let d = mul_atb(&a.transpose(), &b.transpose());
        for i in 0..7 {
            for j in 0..5 {
                assert!((d.get(i, j) - c.get(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gram_schmidt_factorization() {
        let mut r = rng(2);
        let mut m = Mat::gaussian(6, 40, &mut r);
        // make row 3 dependent on rows 0 and 1
        let dep: Vec<f64> = (0..40).map(|k| 2.0 * m.get(0, k) - m.get(1, k)).collect();
        m.row_mut(3).copy_from_slice(&dep);
        let original = m.clone();
        let rr = orthonormalize_rows(&mut m, &mut r);
        assert_eq!(rr.get(3, 3), 0.0);
        for i in 0..6 {
            for j in 0..6 {
                let g = dot(m.row(i), m.row(j));
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        let rebuilt = mul_atb(&rr, &m);
        for (x, y) in rebuilt.data().iter().zip(original.data()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobi_reconstructs() {
        let mut r = rng(3);
        let mut a = Mat::gaussian(6, 6, &mut r);
        // rank deficiency: last column zero
        for i in 0..6 {
            a.set(i, 5, 0.0);
        }
        let (u, s, v) = jacobi_svd(&a);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        assert!(s[5].abs() < 1e-12);
        for i in 0..6 {
            for j in 0..6 {
                let rec: f64 = (0..6).map(|k| u.get(i, k) * s[k] * v.get(j, k)).sum();
                assert!((rec - a.get(i, j)).abs() < 1e-12);
                let uu: f64 = (0..6).map(|k| u.get(k, i) * u.get(k, j)).sum();
                let vv: f64 = (0..6).map(|k| v.get(k, i) * v.get(k, j)).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((uu - id).abs() < 1e-12 && (vv - id).abs() < 1e-12);
            }
        }
    }
}
