//! Block-encoding algebra: dilation, verification, LCU, products and tensors.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, check_dim, hermiticity_error, identity, psd_sqrt, spectral_norm, CMat, CVec, C64, ONE,
};
use crate::ops::{
    self, BlockDiag, Dense, Identity, Local, OpRef, Operator, Padded, Phased, Sequence,
};

/// A unitary `U` on `[ancilla | target]` whose top-left block approximates `A/α`.
#[derive(Clone)]
pub struct BlockEncoding {
    pub op: OpRef,
    pub alpha: f64,
    pub ancilla_dim: usize,
    pub target_dim: usize,
    pub epsilon: f64,
    /// Logical ancilla qubit count used for cost accounting.
    pub ancilla_qubits: usize,
    /// Whether the unitary is Hermitian (required by angleless QSP).
    pub self_adjoint: bool,
    /// Applications of the underlying input oracle made by one use of `op`.
    pub queries: usize,
}

impl std::fmt::Debug for BlockEncoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockEncoding")
            .field("alpha", &self.alpha)
            .field("ancilla_dim", &self.ancilla_dim)
            .field("target_dim", &self.target_dim)
            .field("epsilon", &self.epsilon)
            .field("ancilla_qubits", &self.ancilla_qubits)
            .field("self_adjoint", &self.self_adjoint)
            .field("queries", &self.queries)
            .finish()
    }
}

pub fn qubits_for(dim: usize) -> usize {
    if dim <= 1 {
        0
    } else {
        (usize::BITS - (dim - 1).leading_zeros()) as usize
    }
}

impl BlockEncoding {
    pub fn new(op: OpRef, alpha: f64, ancilla_dim: usize, target_dim: usize, epsilon: f64) -> Self {
        assert_eq!(
            op.dim(),
            ancilla_dim * target_dim,
            "block encoding dimension mismatch"
        );
        BlockEncoding {
            op,
            alpha,
            ancilla_dim,
            target_dim,
            epsilon,
            ancilla_qubits: qubits_for(ancilla_dim),
            self_adjoint: false,
            queries: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.ancilla_dim * self.target_dim
    }

    /// `⟨0|U|0⟩`, without the α factor.
    pub fn raw_block(&self) -> CMat {
        let cols = ops::columns(self.op.as_ref(), self.target_dim);
        cols.rows(0, self.target_dim).into_owned()
    }

    /// `α·⟨0|U|0⟩`, the encoded matrix.
    pub fn block(&self) -> CMat {
        self.raw_block() * c(self.alpha)
    }

    /// Dense unitary; fails beyond the Hilbert-dimension cap.
    pub fn unitary(&self) -> Result<CMat> {
        check_dim(self.dim(), "materializing a block-encoding unitary")?;
        Ok(ops::materialize(self.op.as_ref()))
    }

    /// Apply `U` to `|0⟩_anc ⊗ ψ` and return the full output vector.
    pub fn apply_to_state(&self, psi: &CVec) -> CVec {
        let mut x = CMat::zeros(self.dim(), 1);
        for i in 0..self.target_dim {
            x[(i, 0)] = psi[i];
        }
        linalg::first_column(&self.op.apply(&x))
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_qubits(mut self, q: usize) -> Self {
        self.ancilla_qubits = q;
        self
    }

    /// Identity encoding with α = 1 and no ancilla.
    pub fn identity(n: usize) -> Self {
        let mut be = BlockEncoding::new(Arc::new(Identity(n)), 1.0, 1, n, 0.0);
        be.self_adjoint = true;
        be
    }

    /// Relabel as an encoding of `A/α` with α = 1.
    pub fn normalized(&self) -> Self {
        let mut be = self.clone();
        be.epsilon = self.epsilon / self.alpha;
        be.alpha = 1.0;
        be
    }

    /// Same block on a larger ancilla space (`U ⊕ I`).
    pub fn pad_ancilla(&self, new_dim: usize) -> Self {
        assert!(new_dim >= self.ancilla_dim);
        if new_dim == self.ancilla_dim {
            return self.clone();
        }
        let op = Padded::arc(self.op.clone(), new_dim * self.target_dim);
        BlockEncoding {
            op,
            alpha: self.alpha,
            ancilla_dim: new_dim,
            target_dim: self.target_dim,
            epsilon: self.epsilon,
            ancilla_qubits: self.ancilla_qubits.max(qubits_for(new_dim)),
            self_adjoint: self.self_adjoint,
            queries: self.queries,
        }
    }

    /// Encoding of `A ⊗ I` where `A` acts on registers `targets` of `sys_dims`.
    pub fn embed(&self, sys_dims: &[usize], targets: &[usize]) -> Result<Self> {
        let t: usize = targets.iter().map(|&k| sys_dims[k]).product();
        if t != self.target_dim {
            return Err(Error::Dimension(format!(
                "embedding target registers of size {t} into encoding of size {}",
                self.target_dim
            )));
        }
        let total: usize = sys_dims.iter().product();
        check_dim(total, "embedding a block encoding")?;
        let mut dims = vec![self.ancilla_dim];
        dims.extend_from_slice(sys_dims);
        let mut tg = vec![0usize];
        tg.extend(targets.iter().map(|&k| k + 1));
        let op = Local::arc(&dims, &tg, self.op.clone());
        Ok(BlockEncoding {
            op,
            alpha: self.alpha,
            ancilla_dim: self.ancilla_dim,
            target_dim: total,
            epsilon: self.epsilon,
            ancilla_qubits: self.ancilla_qubits,
            self_adjoint: self.self_adjoint,
            queries: self.queries,
        })
    }

    /// Replace the circuit by the exact dilation of its own computed block.
    ///
    /// Every downstream transformation (QSVT, amplification, LCU) depends on
    /// the unitary only through its top-left block, so this keeps the encoded
    /// matrix, α, ε and the logical ancilla count unchanged.
    pub fn compress(&self) -> Result<Self> {
        let block = self.block();
        let mut be = dilate(&block, self.alpha)?;
        be.epsilon = self.epsilon;
        be.ancilla_qubits = self.ancilla_qubits;
        be.queries = self.queries;
        Ok(be)
    }

    /// Hermitian-unitary encoding of the Hermitian part of the block:
    /// `(H ⊗ I)·[[0, U], [U†, 0]]·(H ⊗ I)` with one extra qubit.
    pub fn symmetrized(&self) -> Self {
        if self.self_adjoint {
            return self.clone();
        }
        let n = self.dim();
        let inner = self.op.clone();
        let swap: OpRef = Arc::new(OffDiagonal { u: inner });
        let had = ops::leading(&linalg::hadamard(), n);
        let op = Sequence::arc(vec![had.clone(), swap, had]);
        BlockEncoding {
            op,
            alpha: self.alpha,
            ancilla_dim: 2 * self.ancilla_dim,
            target_dim: self.target_dim,
            epsilon: self.epsilon,
            ancilla_qubits: self.ancilla_qubits + 1,
            self_adjoint: true,
            queries: self.queries,
        }
    }
}

/// `[[0, U], [U†, 0]]`.
struct OffDiagonal {
    u: OpRef,
}

impl Operator for OffDiagonal {
    fn dim(&self) -> usize {
        2 * self.u.dim()
    }
    fn apply(&self, x: &CMat) -> CMat {
        let n = self.u.dim();
        let top = x.rows(0, n).into_owned();
        let bottom = x.rows(n, n).into_owned();
        let mut y = CMat::zeros(2 * n, x.ncols());
        y.rows_mut(0, n).copy_from(&self.u.apply(&bottom));
        y.rows_mut(n, n).copy_from(&self.u.apply_adjoint(&top));
        y
    }
    fn apply_adjoint(&self, x: &CMat) -> CMat {
        self.apply(x)
    }
}

/// Exact unitary dilation of `target/alpha`.
pub fn dilate(target: &CMat, alpha: f64) -> Result<BlockEncoding> {
    if target.nrows() != target.ncols() {
        return Err(Error::Dimension(format!(
            "dilation target must be square, got {}x{}",
            target.nrows(),
            target.ncols()
        )));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let n = target.nrows();
    check_dim(n, "dilation target")?;
    let norm = spectral_norm(target);
    if norm > alpha * (1.0 + 1e-12) + 1e-14 {
        return Err(Error::NormViolation {
            measured: norm,
            alpha,
        });
    }
    let hermitian = n > 0 && hermiticity_error(target) <= 1e-12 * alpha.max(1.0);
    let mut a = target / c(alpha);
    if hermitian {
        a = (&a + a.adjoint()) * c(0.5);
    }
    let id = identity(n);
    let top_right = psd_sqrt(&(&id - &a * a.adjoint()));
    let bottom_left = psd_sqrt(&(&id - a.adjoint() * &a));
    let mut u = CMat::zeros(2 * n, 2 * n);
    u.view_mut((0, 0), (n, n)).copy_from(&a);
    u.view_mut((0, n), (n, n)).copy_from(&top_right);
    u.view_mut((n, 0), (n, n)).copy_from(&bottom_left);
    u.view_mut((n, n), (n, n)).copy_from(&(-a.adjoint()));
    let mut be = BlockEncoding::new(Dense::arc(u), alpha, 2, n, 0.0);
    be.self_adjoint = hermitian;
    Ok(be)
}

/// Dilation of `approx` certified against a different `target`.
pub fn dilate_approx(target: &CMat, approx: &CMat, alpha: f64) -> Result<BlockEncoding> {
    let be = dilate(approx, alpha)?;
    let eps = spectral_norm(&(target - approx));
    Ok(be.with_epsilon(eps))
}

/// `‖target − α⟨0|U|0⟩‖` in spectral norm.
pub fn verify_contract(be: &BlockEncoding, target: &CMat) -> Result<f64> {
    if target.nrows() != be.target_dim || target.ncols() != be.target_dim {
        return Err(Error::Dimension(format!(
            "target is {}x{}, encoding target dimension is {}",
            target.nrows(),
            target.ncols(),
            be.target_dim
        )));
    }
    Ok(spectral_norm(&(target - be.block())))
}

/// State-preparation pair `(P_L, P_R)` with `P_L|0⟩ = Σ c_j|j⟩`, `P_R|0⟩ = Σ d_j|j⟩`.
#[derive(Clone, Debug)]
pub struct StatePrepPair {
    pub left_unitary: CMat,
    pub right_unitary: CMat,
    pub beta: f64,
    pub eps_sp: f64,
    pub weights: Vec<f64>,
}

impl StatePrepPair {
    pub fn dim(&self) -> usize {
        self.left_unitary.nrows()
    }

    /// `Σ_j |y_j − β c_j* d_j|` including padding indices.
    pub fn deviation(&self) -> f64 {
        let mut total = 0.0;
        for j in 0..self.dim() {
            let cj = self.left_unitary[(j, 0)];
            let dj = self.right_unitary[(j, 0)];
            let y = self.weights.get(j).cloned().unwrap_or(0.0);
            total += (c(y) - cj.conj() * dj * self.beta).norm();
        }
        total
    }

    /// ℓ2 distance of the right state to the ideal `Σ √(y_j/β)|j⟩`.
    pub fn state_error(&self) -> f64 {
        let ideal = ideal_amplitudes(&self.weights, self.beta);
        (0..self.dim())
            .map(|j| (self.right_unitary[(j, 0)] - c(*ideal.get(j).unwrap_or(&0.0))).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

fn ideal_amplitudes(weights: &[f64], beta: f64) -> Vec<f64> {
    weights.iter().map(|&y| (y / beta).sqrt()).collect()
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() || weights.iter().any(|&y| !(y >= 0.0) || !y.is_finite()) {
        return Err(Error::InvalidArgument(
            "weights must be finite and non-negative".into(),
        ));
    }
    if !weights.iter().any(|&y| y > 0.0) {
        return Err(Error::InvalidArgument("all-zero weights".into()));
    }
    Ok(())
}

/// Exact symmetric state-preparation pair for non-negative weights.
pub fn make_state_prep(weights: &[f64], eps_sp: f64) -> Result<StatePrepPair> {
    validate_weights(weights)?;
    let beta: f64 = weights.iter().sum();
    let amps = ideal_amplitudes(weights, beta);
    let v = CVec::from_iterator(amps.len(), amps.iter().map(|&a| c(a)));
    let u = linalg::unitary_with_first_column(&v);
    Ok(StatePrepPair {
        left_unitary: u.clone(),
        right_unitary: u,
        beta,
        eps_sp,
        weights: weights.to_vec(),
    })
}

/// State-preparation pair whose prepared state is deliberately displaced by
/// an ℓ2 distance of at most `eps_sp/(2β)` from the ideal amplitudes.
pub fn make_state_prep_perturbed<R: Rng>(
    weights: &[f64],
    eps_sp: f64,
    rng: &mut R,
) -> Result<StatePrepPair> {
    validate_weights(weights)?;
    let beta: f64 = weights.iter().sum();
    let amps = ideal_amplitudes(weights, beta);
    let n = amps.len();
    let radius = eps_sp / (2.0 * beta);
    let ideal = CVec::from_iterator(n, amps.iter().map(|&a| c(a)));
    let dir = linalg::random_unit_vector(rng, n);
    let mut v = &ideal + dir * c(radius * rng.random::<f64>());
    let nv = v.norm();
    v /= c(nv);
    let dist = (&v - &ideal).norm();
    if dist > radius {
        let t = radius / dist;
        v = &ideal + (&v - &ideal) * c(t);
        let nv = v.norm();
        v /= c(nv);
    }
    let u = linalg::unitary_with_first_column(&v);
    Ok(StatePrepPair {
        left_unitary: u.clone(),
        right_unitary: u,
        beta,
        eps_sp,
        weights: weights.to_vec(),
    })
}

/// PREP†·SELECT·PREP encoding of `Σ_j y_j A_j`.
pub fn lcu_combine(pair: &StatePrepPair, terms: &[BlockEncoding]) -> Result<BlockEncoding> {
    let phases = vec![ONE; terms.len()];
    lcu_combine_phased(pair, terms, &phases)
}

/// LCU with a unit-modulus phase `ω_j` on each SELECT arm: encodes `Σ_j y_j ω_j A_j`.
pub fn lcu_combine_phased(
    pair: &StatePrepPair,
    terms: &[BlockEncoding],
    phases: &[C64],
) -> Result<BlockEncoding> {
    if terms.is_empty() {
        return Err(Error::InvalidArgument("LCU needs at least one term".into()));
    }
    if terms.len() > pair.dim() || phases.len() != terms.len() {
        return Err(Error::Dimension(format!(
            "{} terms, {} phases, prep dimension {}",
            terms.len(),
            phases.len(),
            pair.dim()
        )));
    }
    let n = terms[0].target_dim;
    let alpha = terms[0].alpha;
    for t in terms {
        if t.target_dim != n {
            return Err(Error::Dimension("LCU terms must share target_dim".into()));
        }
        if (t.alpha - alpha).abs() > 1e-12 * alpha.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "LCU terms must share alpha ({} vs {}); normalize first",
                t.alpha, alpha
            )));
        }
    }
    let a = terms.iter().map(|t| t.ancilla_dim).max().unwrap();
    let b = pair.dim();
    check_dim(a.saturating_mul(n), "LCU term register")?;
    let inner_dim = a * n;
    let mut arms: Vec<OpRef> = Vec::with_capacity(b);
    for (t, &w) in terms.iter().zip(phases) {
        let padded = t.pad_ancilla(a);
        arms.push(if w == ONE {
            padded.op
        } else {
            Phased::arc(padded.op, w)
        });
    }
    while arms.len() < b {
        arms.push(Arc::new(Identity(inner_dim)));
    }
    let select = if b == 1 {
        arms.pop().unwrap()
    } else {
        BlockDiag::arc(arms)
    };
    let op = if b == 1 {
        let p = pair.left_unitary[(0, 0)].conj() * pair.right_unitary[(0, 0)];
        Phased::arc(select, p / p.norm())
    } else {
        Sequence::arc(vec![
            ops::leading(&pair.right_unitary, inner_dim),
            select,
            ops::leading(&pair.left_unitary.adjoint(), inner_dim),
        ])
    };
    let eps_terms = terms.iter().map(|t| t.epsilon).fold(0.0, f64::max);
    let self_adjoint = terms.iter().all(|t| t.self_adjoint)
        && phases.iter().all(|p| (p.im).abs() < 1e-15)
        && (pair.left_unitary.clone() - pair.right_unitary.clone()).norm() < 1e-15;
    let max_q = terms.iter().map(|t| t.ancilla_qubits).max().unwrap();
    Ok(BlockEncoding {
        op,
        alpha: alpha * pair.beta,
        ancilla_dim: b * a,
        target_dim: n,
        epsilon: alpha * pair.eps_sp + pair.beta * eps_terms,
        ancilla_qubits: qubits_for(b) + max_q,
        self_adjoint,
        queries: terms.iter().map(|t| t.queries).max().unwrap(),
    })
}

/// LCU of encodings with arbitrary scalings and complex coefficients:
/// encodes `Σ_j coeff_j A_j` using weights `|coeff_j|·α_j`.
pub fn lcu_weighted(coeffs: &[C64], terms: &[BlockEncoding]) -> Result<BlockEncoding> {
    let mut weights = Vec::new();
    let mut phases = Vec::new();
    let mut normed = Vec::new();
    for (cf, t) in coeffs.iter().zip(terms) {
        let mag = cf.norm();
        if mag == 0.0 {
            continue;
        }
        weights.push(mag * t.alpha);
        phases.push(cf / mag);
        normed.push(t.normalized());
    }
    if normed.is_empty() {
        return Err(Error::InvalidArgument(
            "all LCU coefficients are zero".into(),
        ));
    }
    let pair = make_state_prep(&weights, 0.0)?;
    lcu_combine_phased(&pair, &normed, &phases)
}

/// Encoding of the product `A·B`.
pub fn product(be_a: &BlockEncoding, be_b: &BlockEncoding) -> Result<BlockEncoding> {
    if be_a.target_dim != be_b.target_dim {
        return Err(Error::Dimension(format!(
            "product of {}- and {}-dimensional targets",
            be_a.target_dim, be_b.target_dim
        )));
    }
    let n = be_a.target_dim;
    let dims = [be_a.ancilla_dim, be_b.ancilla_dim, n];
    check_dim(be_a.ancilla_dim * be_b.ancilla_dim * n, "product encoding")?;
    let ub = Local::arc(&dims, &[1, 2], be_b.op.clone());
    let ua = Local::arc(&dims, &[0, 2], be_a.op.clone());
    let op = Sequence::arc(vec![ub, ua]);
    Ok(BlockEncoding {
        op,
        alpha: be_a.alpha * be_b.alpha,
        ancilla_dim: be_a.ancilla_dim * be_b.ancilla_dim,
        target_dim: n,
        epsilon: be_a.alpha * be_b.epsilon
            + be_b.alpha * be_a.epsilon
            + be_a.epsilon * be_b.epsilon,
        ancilla_qubits: be_a.ancilla_qubits + be_b.ancilla_qubits,
        self_adjoint: false,
        queries: be_a.queries + be_b.queries,
    })
}

/// Encoding of the Kronecker product `A ⊗ B`.
pub fn tensor(be_a: &BlockEncoding, be_b: &BlockEncoding) -> Result<BlockEncoding> {
    let dims = [
        be_a.ancilla_dim,
        be_b.ancilla_dim,
        be_a.target_dim,
        be_b.target_dim,
    ];
    let total: usize = dims.iter().product();
    check_dim(be_a.target_dim * be_b.target_dim, "tensor-product target")?;
    let _ = total;
    let ua = Local::arc(&dims, &[0, 2], be_a.op.clone());
    let ub = Local::arc(&dims, &[1, 3], be_b.op.clone());
    let op = Sequence::arc(vec![ub, ua]);
    Ok(BlockEncoding {
        op,
        alpha: be_a.alpha * be_b.alpha,
        ancilla_dim: be_a.ancilla_dim * be_b.ancilla_dim,
        target_dim: be_a.target_dim * be_b.target_dim,
        epsilon: be_a.alpha * be_b.epsilon
            + be_b.alpha * be_a.epsilon
            + be_a.epsilon * be_b.epsilon,
        ancilla_qubits: be_a.ancilla_qubits + be_b.ancilla_qubits,
        self_adjoint: be_a.self_adjoint && be_b.self_adjoint,
        queries: be_a.queries + be_b.queries,
    })
}

/// Product of encodings acting on disjoint registers of `sys_dims`.
///
/// Each part is `(encoding, registers)` where the encoding's target is the
/// Kronecker product of the listed registers in the listed order. The result
/// has its ancillas first, in part order, followed by `sys_dims`.
pub fn disjoint_product(
    sys_dims: &[usize],
    parts: &[(&BlockEncoding, &[usize])],
) -> Result<BlockEncoding> {
    if parts.is_empty() {
        return Err(Error::InvalidArgument(
            "disjoint product needs at least one part".into(),
        ));
    }
    let mut used = vec![false; sys_dims.len()];
    for (be, regs) in parts {
        let t: usize = regs
            .iter()
            .map(|&r| sys_dims.get(r).copied().unwrap_or(0))
            .product();
        if t != be.target_dim {
            return Err(Error::Dimension(format!(
                "part acts on registers {regs:?} of size {t} but encodes dimension {}",
                be.target_dim
            )));
        }
        for &r in regs.iter() {
            if used[r] {
                return Err(Error::InvalidArgument(format!(
                    "register {r} shared by two parts"
                )));
            }
            used[r] = true;
        }
    }
    let k = parts.len();
    let n: usize = sys_dims.iter().product();
    let anc: usize = parts.iter().map(|(be, _)| be.ancilla_dim).product();
    check_dim(n, "disjoint-product target")?;
    let mut dims: Vec<usize> = parts.iter().map(|(be, _)| be.ancilla_dim).collect();
    dims.extend_from_slice(sys_dims);
    let mut seq = Vec::with_capacity(k);
    for (i, (be, regs)) in parts.iter().enumerate() {
        let mut tg = vec![i];
        tg.extend(regs.iter().map(|&r| r + k));
        seq.push(Local::arc(&dims, &tg, be.op.clone()));
    }
    let mut alpha = 1.0;
    let mut epsilon = 0.0;
    for (be, _) in parts {
        epsilon = alpha * be.epsilon + be.alpha * epsilon + epsilon * be.epsilon;
        alpha *= be.alpha;
    }
    Ok(BlockEncoding {
        op: if seq.len() == 1 {
            seq.pop().unwrap()
        } else {
            Sequence::arc(seq)
        },
        alpha,
        ancilla_dim: anc,
        target_dim: n,
        epsilon,
        ancilla_qubits: parts.iter().map(|(be, _)| be.ancilla_qubits).sum(),
        self_adjoint: parts.iter().all(|(be, _)| be.self_adjoint),
        queries: parts.iter().map(|(be, _)| be.queries).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, kron, random_hermitian, random_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dilate_identity() {
        let be = dilate(&identity(3), 1.0).unwrap();
        assert!(verify_contract(&be, &identity(3)).unwrap() < 1e-10);
        assert_eq!(be.epsilon, 0.0);
        assert!(linalg::unitarity_error(&be.unitary().unwrap()) < 1e-12);
    }

    #[test]
    fn dilate_diagonal_contraction() {
        let a = diag_real(&[0.3, -0.7]);
        let be = dilate(&a, 1.0).unwrap();
        assert!(spectral_norm(&(be.raw_block() - &a)) < 1e-10);
        assert!(be.self_adjoint);
    }

    #[test]
    fn dilate_random_hermitian_with_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hermitian(&mut rng, 4, 2.0);
        let be = dilate(&a, 2.0).unwrap();
        assert!(verify_contract(&be, &a).unwrap() < 1e-10);
        assert!(linalg::unitarity_error(&be.unitary().unwrap()) < 1e-12);
        let u = be.unitary().unwrap();
        assert!(hermiticity_error(&u) < 1e-12);
    }

    #[test]
    fn dilate_rejects_norm_violation() {
        let a = diag_real(&[2.0, 0.1]);
        match dilate(&a, 1.0) {
            Err(Error::NormViolation { measured, .. }) => assert!((measured - 2.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            dilate(&CMat::zeros(2, 3), 1.0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn verify_contract_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_matrix(&mut rng, 3, 0.8);
        let b = random_matrix(&mut rng, 3, 0.8);
        let be = dilate(&a, 1.0).unwrap();
        let d = verify_contract(&be, &b).unwrap();
        assert!((d - spectral_norm(&(a - b))).abs() < 1e-10);
    }

    #[test]
    fn state_prep_examples() {
        let p = make_state_prep(&[1.0], 0.3).unwrap();
        assert!(p.deviation() < 1e-14);
        let p = make_state_prep(&[1.0, 1.0, 1.0], 0.0).unwrap();
        assert!((p.beta - 3.0).abs() < 1e-15);
        for j in 0..3 {
            assert!((p.right_unitary[(j, 0)].re - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        }
        let p = make_state_prep(&[1.0, 6.0, 8.0], 1e-8).unwrap();
        assert!((p.beta - 15.0).abs() < 1e-14);
        for (j, z) in [1.0, 6.0, 8.0].iter().enumerate() {
            assert!((p.right_unitary[(j, 0)].re - (z / 15.0f64).sqrt()).abs() < 1e-14);
        }
        assert!(p.deviation() <= 1e-8);
        assert!(make_state_prep(&[0.0, 0.0], 0.1).is_err());
    }

    #[test]
    fn perturbed_state_prep_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let w: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let p = make_state_prep_perturbed(&w, 0.05, &mut rng).unwrap();
            assert!(p.state_error() <= 0.05 / (2.0 * p.beta) + 1e-14);
            assert!(p.deviation() <= 2.0 * p.beta * p.state_error() + 1e-12);
            assert!(p.deviation() <= p.eps_sp + 1e-12);
        }
    }

    #[test]
    fn lcu_single_term_and_cancellation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_hermitian(&mut rng, 3, 1.0);
        let be = dilate(&a, 1.0).unwrap();
        let one = lcu_combine(&make_state_prep(&[1.0], 0.0).unwrap(), &[be.clone()]).unwrap();
        assert!(verify_contract(&one, &a).unwrap() < 1e-10);

        let pair = make_state_prep(&[1.0, 1.0], 0.0).unwrap();
        let neg = lcu_combine_phased(&pair, &[be.clone(), be.clone()], &[ONE, -ONE]).unwrap();
        assert!(verify_contract(&neg, &CMat::zeros(3, 3)).unwrap() <= neg.epsilon + 1e-10);
        assert!(linalg::unitarity_error(&neg.unitary().unwrap()) < 1e-12);
    }

    #[test]
    fn lcu_difference_of_hamiltonians() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ha = random_hermitian(&mut rng, 4, 1.5);
        let hb = random_hermitian(&mut rng, 4, 2.5);
        let be = lcu_weighted(
            &[c(1.0), c(-1.0)],
            &[dilate(&hb, 2.5).unwrap(), dilate(&ha, 1.5).unwrap()],
        )
        .unwrap();
        assert!((be.alpha - 4.0).abs() < 1e-12);
        assert!(verify_contract(&be, &(hb - ha)).unwrap() < 1e-10);
    }

    #[test]
    fn product_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b = random_matrix(&mut rng, 3, 0.9);
        let p = product(&BlockEncoding::identity(3), &dilate(&b, 1.0).unwrap()).unwrap();
        assert!(verify_contract(&p, &b).unwrap() < 1e-10);

        let a = diag_real(&[2.0, 0.5, 1.0]);
        let ainv = diag_real(&[0.5, 2.0, 1.0]);
        let p = product(&dilate(&a, 2.0).unwrap(), &dilate(&ainv, 2.0).unwrap()).unwrap();
        assert!((p.alpha - 4.0).abs() < 1e-14);
        assert!(verify_contract(&p, &identity(3)).unwrap() < 1e-10);
    }

    #[test]
    fn tensor_matches_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_hermitian(&mut rng, 2, 1.0);
        let b = random_matrix(&mut rng, 3, 2.0);
        let t = tensor(&dilate(&a, 1.0).unwrap(), &dilate(&b, 2.0).unwrap()).unwrap();
        assert!(verify_contract(&t, &kron(&a, &b)).unwrap() < 1e-10);
    }

    #[test]
    fn symmetrized_is_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_matrix(&mut rng, 3, 1.0);
        let s = dilate(&a, 1.0).unwrap().symmetrized();
        let u = s.unitary().unwrap();
        assert!(hermiticity_error(&u) < 1e-12);
        let herm = (&a + a.adjoint()) * c(0.5);
        assert!(verify_contract(&s, &herm).unwrap() < 1e-10);
    }

    #[test]
    fn compress_preserves_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_hermitian(&mut rng, 3, 1.0);
        let b = random_hermitian(&mut rng, 3, 1.0);
        let p = product(&dilate(&a, 1.0).unwrap(), &dilate(&b, 1.0).unwrap()).unwrap();
        let q = p.compress().unwrap();
        assert!(spectral_norm(&(p.block() - q.block())) < 1e-10);
        assert_eq!(q.ancilla_qubits, p.ancilla_qubits);
    }

    #[test]
    fn embed_acts_on_selected_register() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = random_hermitian(&mut rng, 3, 1.0);
        let e = dilate(&a, 1.0).unwrap().embed(&[2, 3], &[1]).unwrap();
        assert!(verify_contract(&e, &kron(&identity(2), &a)).unwrap() < 1e-10);
    }

    #[test]
    fn disjoint_product_matches_kronecker_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let a = random_hermitian(&mut rng, 3, 1.0);
        let b = random_hermitian(&mut rng, 4, 1.5);
        let ea = dilate(&a, 1.0).unwrap();
        let eb = dilate(&b, 1.5).unwrap();
        let p = disjoint_product(&[2, 3, 2], &[(&ea, &[1]), (&eb, &[2, 0])]).unwrap();
        let mut target = CMat::zeros(12, 12);
        for i in 0..12 {
            for j in 0..12 {
                let (i0, i1, i2) = (i / 6, (i / 2) % 3, i % 2);
                let (j0, j1, j2) = (j / 6, (j / 2) % 3, j % 2);
                target[(i, j)] = a[(i1, j1)] * b[(i2 * 2 + i0, j2 * 2 + j0)];
            }
        }
        assert!(verify_contract(&p, &target).unwrap() < 1e-10);
        assert!(p.self_adjoint);
        assert!((p.alpha - 1.5).abs() < 1e-15);
        assert!(disjoint_product(&[2, 3], &[(&ea, &[1]), (&ea, &[1])]).is_err());
    }
}
