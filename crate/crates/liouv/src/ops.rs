//! Matrix-free operators acting on multi-register tensor layouts.
//!
//! Every operator acts on column blocks: `apply(X)` returns `U·X` for an
//! `dim × k` input, so applying to the identity materializes the matrix.
//! Layouts are mixed-radix with the first register most significant.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::linalg::{c, strides, CMat, C64, ONE};

pub trait Operator: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &CMat) -> CMat;
    fn apply_adjoint(&self, x: &CMat) -> CMat;
}

pub type OpRef = Arc<dyn Operator>;

/// Dense matrix of the operator.
pub fn materialize(op: &dyn Operator) -> CMat {
    op.apply(&CMat::identity(op.dim(), op.dim()))
}

/// Columns `cols` of the operator (i.e. `U·[e_c ...]`).
pub fn columns(op: &dyn Operator, cols: usize) -> CMat {
    let mut x = CMat::zeros(op.dim(), cols);
    for k in 0..cols {
        x[(k, k)] = ONE;
    }
    op.apply(&x)
}

pub struct Dense {
    m: CMat,
    adj: CMat,
}

impl Dense {
    pub fn new(m: CMat) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "dense operator must be square");
        let adj = m.adjoint();
        Dense { m, adj }
    }
    pub fn arc(m: CMat) -> OpRef {
        Arc::new(Dense::new(m))
    }
    pub fn matrix(&self) -> &CMat {
        &self.m
    }
}

impl Operator for Dense {
    fn dim(&self) -> usize {
        self.m.nrows()
    }
    fn apply(&self, x: &CMat) -> CMat {
        &self.m * x
    }
    fn apply_adjoint(&self, x: &CMat) -> CMat {
        &self.adj * x
    }
}

/// Diagonal operator.
pub struct Diagonal {
    d: Vec<C64>,
}

impl Diagonal {
    pub fn new(d: Vec<C64>) -> Self {
        Diagonal { d }
    }
    pub fn arc(d: Vec<C64>) -> OpRef {
        Arc::new(Diagonal { d })
    }
    /// The reflection `2Π − I` with Π projecting onto the first `keep` indices.
    pub fn reflection(dim: usize, keep: usize) -> OpRef {
        Self::arc(
            (0..dim)
                .map(|i| if i < keep { ONE } else { -ONE })
                .collect(),
        )
    }
    /// `e^{iθ(2Π − I)}` with Π projecting onto the first `keep` indices.
    pub fn projector_phase(dim: usize, keep: usize, theta: f64) -> OpRef {
        let p = crate::linalg::cis(theta);
        let m = p.conj();
        Self::arc((0..dim).map(|i| if i < keep { p } else { m }).collect())
    }
}

impl Operator for Diagonal {
    fn dim(&self) -> usize {
        self.d.len()
    }
    fn apply(&self, x: &CMat) -> CMat {
        let mut y = x.clone();
        for j in 0..y.ncols() {
            for i in 0..y.nrows() {
                y[(i, j)] *= self.d[i];
            }
        }
        y
    }
    fn apply_adjoint(&self, x: &CMat) -> CMat {
        let mut y = x.clone();
        for j in 0..y.ncols() {
            for i in 0..y.nrows() {
                y[(i, j)] *= self.d[i].conj();
            }
        }
        y
    }
}

/// An operator acting on a subset of registers of a larger layout.
pub struct Local {
    dims: Vec<usize>,
    inner: OpRef,
    pos: Vec<usize>,
    t_dim: usize,
    r_dim: usize,
}

impl Local {
    /// `targets` lists the registers the inner operator acts on, in the
    /// inner operator's own significance order.
    pub fn new(dims: &[usize], targets: &[usize], inner: OpRef) -> Self {
        let total: usize = dims.iter().product();
        let t_dims: Vec<usize> = targets.iter().map(|&t| dims[t]).collect();
        let t_dim: usize = t_dims.iter().product();
        assert_eq!(t_dim, inner.dim(), "local operator dimension mismatch");
        let rest: Vec<usize> = (0..dims.len()).filter(|k| !targets.contains(k)).collect();
        let r_dims: Vec<usize> = rest.iter().map(|&k| dims[k]).collect();
        let r_dim: usize = r_dims.iter().product();
        let full_strides = strides(dims);
        let t_str = strides(&t_dims);
        let r_str = strides(&r_dims);
        let mut pos = vec![0usize; total];
        for t in 0..t_dim {
            let mut base = 0;
            for (k, &reg) in targets.iter().enumerate() {
                base += ((t / t_str[k]) % t_dims[k]) * full_strides[reg];
            }
            for r in 0..r_dim {
                let mut idx = base;
                for (k, &reg) in rest.iter().enumerate() {
                    idx += ((r / r_str[k]) % r_dims[k]) * full_strides[reg];
                }
                pos[t * r_dim + r] = idx;
            }
        }
        Local {
            dims: dims.to_vec(),
            inner,
            pos,
            t_dim,
            r_dim,
        }
    }

    pub fn arc(dims: &[usize], targets: &[usize], inner: OpRef) -> OpRef {
        if targets.len() == dims.len() && targets.iter().enumerate().all(|(k, &t)| k == t) {
            return inner;
        }
        Arc::new(Local::new(dims, targets, inner))
    }

    fn run(&self, x: &CMat, adjoint: bool) -> CMat {
        let k = x.ncols();
        let mut g = CMat::zeros(self.t_dim, self.r_dim * k);
        for col in 0..k {
            for t in 0..self.t_dim {
                for r in 0..self.r_dim {
                    g[(t, col * self.r_dim + r)] = x[(self.pos[t * self.r_dim + r], col)];
                }
            }
        }
        let h = if adjoint {
            self.inner.apply_adjoint(&g)
        } else {
            self.inner.apply(&g)
        };
        let mut y = CMat::zeros(x.nrows(), k);
        for col in 0..k {
            for t in 0..self.t_dim {
                for r in 0..self.r_dim {
                    y[(self.pos[t * self.r_dim + r], col)] = h[(t, col * self.r_dim + r)];
                }
            }
        }
        y
    }
}

impl Operator for Local {
    fn dim(&self) -> usize {
        self.dims.iter().product()
    }
    fn apply(&self, x: &CMat) -> CMat {
        self.run(x, false)
    }
    fn apply_adjoint(&self, x: &CMat) -> CMat {
        self.run(x, true)
    }
}

/// Product of operators; `ops[0]` is applied first.
pub struct Sequence {
    ops: Vec<OpRef>,
}

impl Sequence {
    pub fn arc(ops: Vec<OpRef>) -> OpRef {
        assert!(!ops.is_empty());
        let d = ops[0].dim();
        assert!(
            ops.iter().all(|o| o.dim() == d),
            "sequence dimension mismatch"
        );
        Arc::new(Sequence { ops })
    }
}

impl Operator for Sequence {
    fn dim(&self) -> usize {
        self.ops[0].dim()
    }
    fn apply(&self, x: &CMat) -> CMat {
        let mut y = x.clone();
        for op in &self.ops {
            y = op.apply(&y);
        }
        y
    }
    fn apply_adjoint(&self, x: &CMat) -> CMat {
        let mut y = x.clone();
        for op in self.ops.iter().rev() {
            y = op.apply_adjoint(&y);
        }
        y
    }
}

pub struct Adjoint(pub OpRef);

impl Operator for Adjoint {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &CMat) -> CMat {
        self.0.apply_adjoint(x)
    }
    fn apply_adjoint(&self, x: &CMat) -> CMat {
        self.0.apply(x)
    }
}

/// Multiplication by a unit-modulus scalar.
pub struct Phased {
    inner: OpRef,
    phase: C64,
}

impl Phased {
    pub fn arc(inner: OpRef, phase: C64) -> OpRef {
        Arc::new(Phased { inner, phase })
    }
}

impl Operator for Phased {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &CMat) -> CMat {
        self.inner.apply(x) * self.phase
    }
    fn apply_adjoint(&self, x: &CMat) -> CMat {
        self.inner.apply_adjoint(x) * self.phase.conj()
    }
}

/// Direct sum `inner ⊕ I`: acts as `inner` on the leading indices.
pub struct Padded {
    inner: OpRef,
    total: usize,
}

impl Padded {
    pub fn arc(inner: OpRef, total: usize) -> OpRef {
        assert!(total >= inner.dim());
        if total == inner.dim() {
            return inner;
        }
        Arc::new(Padded { inner, total })
    }
    fn run(&self, x: &CMat, adjoint: bool) -> CMat {
        let n = self.inner.dim();
        let head = x.rows(0, n).into_owned();
        let out = if adjoint {
            self.inner.apply_adjoint(&head)
        } else {
            self.inner.apply(&head)
        };
        let mut y = x.clone();
        y.rows_mut(0, n).copy_from(&out);
        y
    }
}

impl Operator for Padded {
    fn dim(&self) -> usize {
        self.total
    }
    fn apply(&self, x: &CMat) -> CMat {
        self.run(x, false)
    }
    fn apply_adjoint(&self, x: &CMat) -> CMat {
        self.run(x, true)
    }
}

/// Block-diagonal operator `Σ_j |j⟩⟨j| ⊗ U_j` with the control most significant.
pub struct BlockDiag {
    blocks: Vec<OpRef>,
    block_dim: usize,
}

impl BlockDiag {
    pub fn arc(blocks: Vec<OpRef>) -> OpRef {
        assert!(!blocks.is_empty());
        let block_dim = blocks[0].dim();
        assert!(
            blocks.iter().all(|b| b.dim() == block_dim),
            "block dimension mismatch"
        );
        Arc::new(BlockDiag { blocks, block_dim })
    }
    fn run(&self, x: &CMat, adjoint: bool) -> CMat {
        let mut y = CMat::zeros(x.nrows(), x.ncols());
        let n = self.block_dim;
        for (j, b) in self.blocks.iter().enumerate() {
            let slice = x.rows(j * n, n).into_owned();
            let out = if adjoint {
                b.apply_adjoint(&slice)
            } else {
                b.apply(&slice)
            };
            y.rows_mut(j * n, n).copy_from(&out);
        }
        y
    }
}

impl Operator for BlockDiag {
    fn dim(&self) -> usize {
        self.blocks.len() * self.block_dim
    }
    fn apply(&self, x: &CMat) -> CMat {
        self.run(x, false)
    }
    fn apply_adjoint(&self, x: &CMat) -> CMat {
        self.run(x, true)
    }
}

/// Identity of a given dimension.
pub struct Identity(pub usize);

impl Operator for Identity {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &CMat) -> CMat {
        x.clone()
    }
    fn apply_adjoint(&self, x: &CMat) -> CMat {
        x.clone()
    }
}

/// Wrapper counting how many times the wrapped operator (or its adjoint) is applied.
pub struct Counting {
    inner: OpRef,
    calls: AtomicUsize,
}

impl Counting {
    pub fn new(inner: OpRef) -> Arc<Counting> {
        Arc::new(Counting {
            inner,
            calls: AtomicUsize::new(0),
        })
    }
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }
}

impl Operator for Counting {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &CMat) -> CMat {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.apply(x)
    }
    fn apply_adjoint(&self, x: &CMat) -> CMat {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.apply_adjoint(x)
    }
}

/// `(P ⊗ I)` for a dense `P` on the most significant register.
pub fn leading(p: &CMat, rest: usize) -> OpRef {
    Local::arc(&[p.nrows(), rest], &[0], Dense::arc(p.clone()))
}

pub fn scale(x: &CMat, s: f64) -> CMat {
    x * c(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, random_unitary, spectral_norm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn local_matches_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_unitary(&mut rng, 2);
        let b = random_unitary(&mut rng, 3);
        let dims = [2, 3, 4];
        let op_a = Local::arc(&dims, &[0], Dense::arc(a.clone()));
        let expect = kron(&kron(&a, &CMat::identity(3, 3)), &CMat::identity(4, 4));
        assert!(spectral_norm(&(materialize(op_a.as_ref()) - expect)) < 1e-12);

        let ab = kron(&b, &a);
        let op = Local::arc(&dims, &[1, 0], Dense::arc(ab.clone()));
        let m = materialize(op.as_ref());
        let mut expect = CMat::zeros(24, 24);
        for i in 0..24 {
            for j in 0..24 {
                let (i0, i1, i2) = (i / 12, (i / 4) % 3, i % 4);
                let (j0, j1, j2) = (j / 12, (j / 4) % 3, j % 4);
                if i2 == j2 {
                    expect[(i, j)] = ab[(i1 * 2 + i0, j1 * 2 + j0)];
                }
            }
        }
        assert!(spectral_norm(&(m - expect)) < 1e-12);
    }

    #[test]
    fn sequence_adjoint_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = Dense::arc(random_unitary(&mut rng, 5));
        let v = Dense::arc(random_unitary(&mut rng, 5));
        let s = Sequence::arc(vec![u, v]);
        let x = CMat::identity(5, 5);
        let y = s.apply_adjoint(&s.apply(&x));
        assert!(spectral_norm(&(y - x)) < 1e-12);
    }
}
