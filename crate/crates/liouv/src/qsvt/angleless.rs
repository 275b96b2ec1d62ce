//! Angle-free eigenvalue transformation.
//!
//! A function `f` is loaded as a diagonal of values `f(cos(2πm/4D))` on a
//! Fourier register; controlled powers of the qubitized walk `W = (2Π − I)U`
//! sandwich the diagonal so that the block becomes `f(A)/√2` up to the
//! truncation error of the Fourier series of `θ ↦ f(cos θ)`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use crate::bea::{qubits_for, BlockEncoding};
use crate::error::{Error, Result};
use crate::linalg::{self, c, cis, dft, CMat, C64};
use crate::ops::{Local, OpRef, Operator, Sequence};
use crate::qsvt::{check_sim_hypothesis, oaa, semantic_encoding, Mode};

/// Largest Fourier half-width tried by the simulation driver.
pub const MAX_HALF_WIDTH: usize = 1024;

/// Diagonal values `f(cos(2πm/4D))` with their accuracy and truncation error.
#[derive(Clone, Debug)]
pub struct DiagonalFunctionEncoding {
    pub half_width: usize,
    pub entries: Vec<C64>,
    pub delta: f64,
    pub truncation_error: f64,
}

impl DiagonalFunctionEncoding {
    pub fn register_dim(&self) -> usize {
        4 * self.half_width
    }
}

fn fourier_coefficients(entries: &[C64]) -> Vec<C64> {
    let n = entries.len();
    (0..n)
        .map(|j| {
            entries
                .iter()
                .enumerate()
                .map(|(m, &d)| d * cis(2.0 * PI * (m * j % n) as f64 / n as f64))
                .sum::<C64>()
                / n as f64
        })
        .collect()
}

/// Coefficients `a_j`, `j ∈ (−4D, 4D)`, of the realized block `Σ_j a_j T_|j|(A)`.
fn realized_coefficients(entries: &[C64], d: usize) -> Vec<(i64, C64)> {
    let n = entries.len() as i64;
    let g = fourier_coefficients(entries);
    let mut out = Vec::new();
    for j in (1 - n)..n {
        let lo = (d as i64).max(j);
        let hi = (3 * d as i64 - 1).min(n - 1 + j);
        if hi < lo {
            continue;
        }
        let count = (hi - lo + 1) as f64;
        out.push((j, g[j.rem_euclid(n) as usize] * count / (2 * d) as f64));
    }
    out
}

/// Sampled sup-norm error of the realized scalar map `cos θ ↦ Σ a_j cos(jθ)` against `f`.
pub fn laurent_error(f: &dyn Fn(f64) -> C64, d: usize) -> f64 {
    let n = 4 * d;
    let entries: Vec<C64> = (0..n)
        .map(|m| f((2.0 * PI * m as f64 / n as f64).cos()))
        .collect();
    let coeffs = realized_coefficients(&entries, d);
    let samples = 16 * n + 257;
    (0..samples)
        .map(|s| {
            let theta = PI * s as f64 / (samples - 1) as f64;
            let approx: C64 = coeffs
                .iter()
                .map(|&(j, a)| a * (j as f64 * theta).cos())
                .sum();
            (approx - f(theta.cos())).norm()
        })
        .fold(0.0, f64::max)
}

/// Tabulate `f` on the Fourier grid of half-width `d`; `delta` is the entry accuracy.
pub fn angleless_encode(
    f: &dyn Fn(f64) -> C64,
    d: usize,
    delta: f64,
) -> Result<DiagonalFunctionEncoding> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "Fourier half-width must be positive".into(),
        ));
    }
    let n = 4 * d;
    let entries: Vec<C64> = (0..n)
        .map(|m| f((2.0 * PI * m as f64 / n as f64).cos()))
        .collect();
    if let Some(bad) = entries.iter().find(|e| e.norm() > 1.0 + 1e-12) {
        return Err(Error::Hypothesis(format!(
            "diagonal entry of modulus {:.6} exceeds 1",
            bad.norm()
        )));
    }
    Ok(DiagonalFunctionEncoding {
        half_width: d,
        truncation_error: laurent_error(f, d),
        entries,
        delta,
    })
}

struct AnglelessOp {
    u: OpRef,
    keep: usize,
    n: usize,
    entries: Vec<C64>,
    qft: CMat,
    left: CMat,
}

impl AnglelessOp {
    fn big_n(&self) -> usize {
        self.u.dim()
    }

    fn on_k(&self, x: &CMat, m: &CMat) -> CMat {
        let nn = self.big_n();
        let cols = x.ncols();
        let mut y = CMat::zeros(x.nrows(), cols);
        for uf in 0..2 {
            let mut g = CMat::zeros(self.n, nn * cols);
            for k in 0..self.n {
                for col in 0..cols {
                    for i in 0..nn {
                        g[(k, col * nn + i)] = x[((uf * self.n + k) * nn + i, col)];
                    }
                }
            }
            let h = m * g;
            for k in 0..self.n {
                for col in 0..cols {
                    for i in 0..nn {
                        y[((uf * self.n + k) * nn + i, col)] = h[(k, col * nn + i)];
                    }
                }
            }
        }
        y
    }

    fn reflect(&self, z: &mut CMat) {
        for col in 0..z.ncols() {
            for row in self.keep..z.nrows() {
                z[(row, col)] = -z[(row, col)];
            }
        }
    }

    fn walk(&self, z: &CMat, inverse: bool) -> CMat {
        if inverse {
            let mut y = z.clone();
            self.reflect(&mut y);
            self.u.apply_adjoint(&y)
        } else {
            let mut y = self.u.apply(z);
            self.reflect(&mut y);
            y
        }
    }

    /// `Σ_k |k⟩⟨k| ⊗ W^{±k}` by binary controlled powers.
    fn controlled_powers(&self, x: &CMat, inverse: bool) -> CMat {
        let nn = self.big_n();
        let cols = x.ncols();
        let mut y = x.clone();
        let mut p = 1;
        while p < self.n {
            let slices: Vec<(usize, usize)> = (0..2)
                .flat_map(|uf| {
                    (0..self.n)
                        .filter(move |k| k & p != 0)
                        .map(move |k| (uf, k))
                })
                .collect();
            let mut g = CMat::zeros(nn, slices.len() * cols);
            for (s, &(uf, k)) in slices.iter().enumerate() {
                for col in 0..cols {
                    for i in 0..nn {
                        g[(i, s * cols + col)] = y[((uf * self.n + k) * nn + i, col)];
                    }
                }
            }
            for _ in 0..p {
                g = self.walk(&g, inverse);
            }
            for (s, &(uf, k)) in slices.iter().enumerate() {
                for col in 0..cols {
                    for i in 0..nn {
                        y[((uf * self.n + k) * nn + i, col)] = g[(i, s * cols + col)];
                    }
                }
            }
            p <<= 1;
        }
        y
    }

    fn diagonal_dilation(&self, x: &CMat, adjoint: bool) -> CMat {
        let nn = self.big_n();
        let mut y = x.clone();
        for k in 0..self.n {
            let mut d = self.entries[k];
            if adjoint {
                d = d.conj();
            }
            let s = c((1.0 - d.norm_sqr()).max(0.0).sqrt());
            let dm = if adjoint {
                -self.entries[k]
            } else {
                -self.entries[k].conj()
            };
            for col in 0..x.ncols() {
                for i in 0..nn {
                    let r0 = k * nn + i;
                    let r1 = (self.n + k) * nn + i;
                    let a = x[(r0, col)];
                    let b = x[(r1, col)];
                    y[(r0, col)] = d * a + s * b;
                    y[(r1, col)] = s * a + dm * b;
                }
            }
        }
        y
    }
}

impl Operator for AnglelessOp {
    fn dim(&self) -> usize {
        2 * self.n * self.big_n()
    }
    fn apply(&self, x: &CMat) -> CMat {
        let qft_inv = self.qft.adjoint();
        let mut y = self.on_k(x, &self.qft);
        y = self.controlled_powers(&y, false);
        y = self.on_k(&y, &qft_inv);
        y = self.diagonal_dilation(&y, false);
        y = self.on_k(&y, &self.qft);
        y = self.controlled_powers(&y, true);
        self.on_k(&y, &self.left.adjoint())
    }
    fn apply_adjoint(&self, x: &CMat) -> CMat {
        let qft_inv = self.qft.adjoint();
        let mut y = self.on_k(x, &self.left);
        y = self.controlled_powers(&y, false);
        y = self.on_k(&y, &qft_inv);
        y = self.diagonal_dilation(&y, true);
        y = self.on_k(&y, &self.qft);
        y = self.controlled_powers(&y, true);
        self.on_k(&y, &qft_inv)
    }
}

/// `(√2, a + log₂(4D) + 1, (1+√2)E_D + √2δ)`-block-encoding of `f(A)`.
pub fn angleless_transform(
    be: &BlockEncoding,
    dfe: &DiagonalFunctionEncoding,
) -> Result<BlockEncoding> {
    let sym = be.symmetrized();
    let n = dfe.register_dim();
    let d = dfe.half_width;
    let mut plus = linalg::CVec::zeros(n);
    for k in d..3 * d {
        plus[k] = c(1.0 / ((2 * d) as f64).sqrt());
    }
    let op = AnglelessOp {
        u: sym.op.clone(),
        keep: sym.target_dim,
        n,
        entries: dfe.entries.clone(),
        qft: dft(n),
        left: linalg::unitary_with_first_column(&plus),
    };
    let eps = (1.0 + SQRT_2) * dfe.truncation_error + SQRT_2 * dfe.delta;
    let mut out = BlockEncoding::new(
        Arc::new(op),
        SQRT_2,
        2 * n * sym.ancilla_dim,
        sym.target_dim,
        eps,
    );
    out.ancilla_qubits = sym.ancilla_qubits + 1 + qubits_for(n);
    out.queries = 2 * (n - 1) * sym.queries;
    Ok(out)
}

/// Printed query formula `ceil(48α|t| + 72 ln(48(1+√2)/ε) − 6)`.
pub fn angleless_query_formula(alpha: f64, t: f64, eps: f64) -> usize {
    (48.0 * alpha * t.abs() + 72.0 * (48.0 * (1.0 + SQRT_2) / eps).ln() - 6.0).ceil() as usize
}

/// Smallest power-of-two half-width whose truncation term fits `eps/4`.
pub fn ham_sim_half_width(alpha: f64, t: f64, eps: f64) -> Result<usize> {
    let tau = alpha * t;
    let f = move |x: f64| cis(-tau * x);
    let mut d = 1;
    while d <= MAX_HALF_WIDTH {
        if (1.0 + SQRT_2) * laurent_error(&f, d) <= eps / 4.0 {
            return Ok(d);
        }
        d *= 2;
    }
    Err(Error::Hypothesis(format!(
        "angle-free simulation needs a Fourier half-width above {MAX_HALF_WIDTH}; split the evolution into segments"
    )))
}

/// `(1, ·, eps)`-block-encoding of `e^{−iHt}` without phase factors.
pub fn angleless_ham_sim(
    be: &BlockEncoding,
    t: f64,
    eps: f64,
    mode: Mode,
) -> Result<BlockEncoding> {
    angleless_ham_sim_padded(be, t, eps, mode, 0)
}

/// Angle-free simulation whose Fourier half-width is at least `min_half_width`.
pub fn angleless_ham_sim_padded(
    be: &BlockEncoding,
    t: f64,
    eps: f64,
    mode: Mode,
    min_half_width: usize,
) -> Result<BlockEncoding> {
    check_sim_hypothesis(be, t, eps)?;
    let tau = be.alpha * t;
    let d = ham_sim_half_width(be.alpha, t, eps)?.max(min_half_width);
    if d > MAX_HALF_WIDTH {
        return Err(Error::Hypothesis(format!(
            "Fourier half-width {d} exceeds the cap {MAX_HALF_WIDTH}"
        )));
    }
    let extra = 2 + qubits_for(4 * d) + usize::from(!be.self_adjoint);
    let queries = 6 * (4 * d - 1) * be.queries;
    if mode == Mode::Semantic {
        let mut out = semantic_encoding(be, |x| cis(-tau * x), extra, queries)?;
        out.alpha = 1.0;
        return Ok(out.with_epsilon(eps));
    }
    let f = move |x: f64| cis(-tau * x);
    let dfe = angleless_encode(&f, d, eps / (24.0 * SQRT_2))?;
    let inner = angleless_transform(be, &dfe)?;
    let m = inner.dim();
    let op = Sequence::arc(vec![
        Local::arc(&[2, m], &[0], crate::ops::Dense::arc(linalg::hadamard())),
        Local::arc(&[2, m], &[1], inner.op.clone()),
    ]);
    let mut half = BlockEncoding::new(
        op,
        2.0,
        2 * inner.ancilla_dim,
        inner.target_dim,
        inner.epsilon,
    );
    half.ancilla_qubits = inner.ancilla_qubits + 1;
    half.queries = inner.queries;
    let amplified = oaa(&half);
    debug_assert!(be.epsilon * t.abs() + amplified.epsilon <= eps * (1.0 + 1e-9));
    Ok(amplified.with_epsilon(eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bea::{dilate, verify_contract};
    use crate::linalg::{diag_real, expm_hermitian, random_hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_function_block() {
        let a = diag_real(&[0.5, -0.5]);
        let be = dilate(&a, 1.0).unwrap();
        let f = |x: f64| c(x);
        let dfe = angleless_encode(&f, 2, 0.0).unwrap();
        assert!(dfe.truncation_error < 1e-12);
        let out = angleless_transform(&be, &dfe).unwrap();
        assert!(verify_contract(&out, &a).unwrap() < 1e-12);
        assert!((out.alpha - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn smooth_function_within_declared_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let h = random_hermitian(&mut rng, 3, 0.9);
        let be = dilate(&h, 1.0).unwrap();
        let f = |x: f64| cis(-2.0 * x) * 0.9;
        let dfe = angleless_encode(&f, 8, 0.0).unwrap();
        let out = angleless_transform(&be, &dfe).unwrap();
        let expect = linalg::hermitian_function(&h, |x| f(x));
        let err = verify_contract(&out, &expect).unwrap();
        assert!(err <= out.epsilon + 1e-12, "{err} > {}", out.epsilon);
        assert!(out.epsilon < 1e-3);
    }

    #[test]
    fn ham_sim_matches_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = random_hermitian(&mut rng, 2, 1.0);
        let be = dilate(&h, 1.0).unwrap();
        let out = angleless_ham_sim(&be, 1.5, 1e-4, Mode::Faithful).unwrap();
        assert!(verify_contract(&out, &expm_hermitian(&h, 1.5)).unwrap() <= 1e-4);
        let d = ham_sim_half_width(1.0, 1.5, 1e-4).unwrap();
        assert_eq!(out.queries, 6 * (4 * d - 1));
    }

    #[test]
    fn formula_regression() {
        assert_eq!(angleless_query_formula(1.0, 1.0, 0.01), 716);
    }

    #[test]
    fn oversized_entries_rejected() {
        let f = |x: f64| c(2.0 * x);
        assert!(angleless_encode(&f, 2, 0.0).is_err());
    }
}
