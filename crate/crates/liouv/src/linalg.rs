//! Dense complex linear algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Default cap on any register-level Hilbert dimension.
pub const DEFAULT_MAX_DIM: usize = 1 << 16;

/// Current Hilbert-dimension cap, overridable through `LIOUV_MAX_DIM`.
pub fn max_dim() -> usize {
    std::env::var("LIOUV_MAX_DIM")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_MAX_DIM)
}

pub fn check_dim(requested: usize, context: &str) -> Result<()> {
    let cap = max_dim();
    if requested > cap {
        return Err(Error::DimensionCap {
            requested,
            cap,
            context: context.to_string(),
        });
    }
    Ok(())
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn cis(theta: f64) -> C64 {
    C64::new(theta.cos(), theta.sin())
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn dagger(a: &CMat) -> CMat {
    a.adjoint()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn basis(n: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[k] = ONE;
    v
}

pub fn diag_real(values: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(
        values.len(),
        values.iter().map(|&x| c(x)),
    ))
}

pub fn diag(values: &[C64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(values))
}

/// Largest singular value.
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(h: &CMat) -> (Vec<f64>, CMat) {
    let n = h.nrows();
    if n == 0 {
        return (vec![], CMat::zeros(0, 0));
    }
    let sym = (h + h.adjoint()) * c(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vecs)
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_function<F: Fn(f64) -> C64>(h: &CMat, f: F) -> CMat {
    let (vals, vecs) = eigh(h);
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fv = f(v);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= fv;
        }
    }
    scaled * vecs.adjoint()
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn psd_sqrt(m: &CMat) -> CMat {
    hermitian_function(m, |x| if x < 1e-14 { ZERO } else { c(x.sqrt()) })
}

/// e^{-iHt} for Hermitian H via eigendecomposition.
pub fn expm_hermitian(h: &CMat, t: f64) -> CMat {
    hermitian_function(h, |x| cis(-x * t))
}

/// General matrix exponential (scaling and squaring Padé).
pub fn expm(m: &CMat) -> CMat {
    m.clone().exp()
}

/// Unitary DFT with entries e^{2πijk/n}/√n.
pub fn dft(n: usize) -> CMat {
    let s = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |j, k| {
        cis(2.0 * PI * ((j * k) % n) as f64 / n as f64) * s
    })
}

pub fn hadamard() -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_row_slice(2, 2, &[c(s), c(s), c(s), c(-s)])
}

/// Unitary whose first column is the normalized vector `v`.
pub fn unitary_with_first_column(v: &CVec) -> CMat {
    let n = v.len();
    let norm = v.norm();
    let v = v / c(norm);
    let theta = v[0].arg();
    let phase = cis(theta);
    let mut w = -v.clone();
    w[0] += phase;
    let mut d = identity(n);
    d[(0, 0)] = phase;
    let wn = w.norm_squared();
    if wn < 1e-30 {
        return d;
    }
    let h = identity(n) - (&w * w.adjoint()) * c(2.0 / wn);
    h * d
}

pub fn unitarity_error(u: &CMat) -> f64 {
    spectral_norm(&(u.adjoint() * u - identity(u.ncols())))
}

pub fn hermiticity_error(h: &CMat) -> f64 {
    spectral_norm(&(h - h.adjoint()))
}

pub fn random_complex_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        C64::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        )
    })
}

/// Random Hermitian matrix rescaled to the requested spectral norm.
pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize, norm: f64) -> CMat {
    let a = random_complex_matrix(rng, n, n);
    let h = (&a + a.adjoint()) * c(0.5);
    let s = spectral_norm(&h);
    if s == 0.0 {
        return h;
    }
    h * c(norm / s)
}

/// Random matrix rescaled to the requested spectral norm.
pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, norm: f64) -> CMat {
    let a = random_complex_matrix(rng, n, n);
    let s = spectral_norm(&a);
    a * c(norm / s)
}

pub fn random_unit_vector<R: Rng>(rng: &mut R, n: usize) -> CVec {
    let v = CVec::from_fn(n, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let nv = v.norm();
    v / c(nv)
}

pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let a = random_complex_matrix(rng, n, n);
    let qr = a.qr();
    qr.q()
}

/// Mixed-radix index helpers for tensor-product layouts (most significant first).
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

pub fn unravel(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
    out
}

pub fn ravel(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

pub fn column(v: &CVec) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

pub fn first_column(m: &CMat) -> CVec {
    CVec::from_iterator(m.nrows(), m.column(0).iter().cloned())
}

pub fn inner(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_column_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 2, 5] {
            let v = random_unit_vector(&mut rng, n);
            let u = unitary_with_first_column(&v);
            assert!(unitarity_error(&u) < 1e-12);
            assert!((first_column(&u) - &v).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_is_unitary() {
        assert!(unitarity_error(&dft(6)) < 1e-12);
    }

    #[test]
    fn expm_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_hermitian(&mut rng, 6, 2.0);
        let a = expm_hermitian(&h, 0.7);
        let b = expm(&(h * C64::new(0.0, -0.7)));
        assert!(spectral_norm(&(a - b)) < 1e-10);
    }

    #[test]
    fn ravel_roundtrip() {
        let dims = [3, 4, 2];
        for i in 0..24 {
            assert_eq!(ravel(&unravel(i, &dims), &dims), i);
        }
    }
}
