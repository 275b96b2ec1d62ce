//! Polynomial transformations of block encodings: QSVT circuits, robust
//! Hamiltonian simulation, sign filtering and angle-free QSP.

pub mod angleless;
pub mod phases;
pub mod poly;

use std::sync::Arc;

use crate::bea::{self, qubits_for, BlockEncoding};
use crate::error::{Error, Result};
use crate::linalg::{self, c, cis, dft, CMat, C64, I, ONE};
use crate::ops::{OpRef, Operator};

pub use angleless::{
    angleless_encode, angleless_ham_sim, angleless_ham_sim_padded, angleless_query_formula,
    angleless_transform, ham_sim_half_width, laurent_error, DiagonalFunctionEncoding,
    MAX_HALF_WIDTH,
};
pub use phases::{find_phases, MAX_DEGREE};
pub use poly::{approx_exp, approx_sign, ChebyshevPolynomial, ExpApproximation, Parity};

/// Execution mode of a transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Explicit circuit algebra (phased reflections, LCU branches, amplification).
    Faithful,
    /// Direct matrix function of the extracted block.
    Semantic,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "faithful" => Ok(Mode::Faithful),
            "semantic" => Ok(Mode::Semantic),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

/// One phase sequence of a QSVT circuit together with its LCU coefficient.
#[derive(Clone, Debug)]
pub struct QsvtBranch {
    /// Reflection-convention phases `θ_0..θ_d`.
    pub theta: Vec<f64>,
    pub coeff: C64,
}

/// Uniform LCU over phased-reflection circuits sharing one input unitary:
/// block `= (1/c) Σ_j ω_j ⟨0|M_j|0⟩`.
pub struct QsvtCircuit {
    u: OpRef,
    keep: usize,
    branches: Vec<QsvtBranch>,
    prep: CMat,
}

fn projector_phase(z: &mut CMat, keep: usize, theta: f64) {
    let p = cis(theta);
    let m = p.conj();
    for col in 0..z.ncols() {
        for row in 0..z.nrows() {
            z[(row, col)] *= if row < keep { p } else { m };
        }
    }
}

impl QsvtCircuit {
    pub fn new(u: OpRef, keep: usize, branches: Vec<QsvtBranch>) -> Self {
        let prep = dft(branches.len());
        QsvtCircuit {
            u,
            keep,
            branches,
            prep,
        }
    }

    /// Number of input-unitary applications along the longest branch.
    pub fn queries(&self) -> usize {
        self.branches
            .iter()
            .map(|b| b.theta.len() - 1)
            .max()
            .unwrap_or(0)
    }

    fn branch(&self, b: &QsvtBranch, x: &CMat, adjoint: bool) -> CMat {
        let d = b.theta.len() - 1;
        let mut z = x.clone();
        if !adjoint {
            projector_phase(&mut z, self.keep, b.theta[d]);
            for i in (1..=d).rev() {
                z = if (d - i) % 2 == 0 {
                    self.u.apply(&z)
                } else {
                    self.u.apply_adjoint(&z)
                };
                projector_phase(&mut z, self.keep, b.theta[i - 1]);
            }
            z * b.coeff
        } else {
            projector_phase(&mut z, self.keep, -b.theta[0]);
            for i in 1..=d {
                z = if (d - i) % 2 == 0 {
                    self.u.apply_adjoint(&z)
                } else {
                    self.u.apply(&z)
                };
                projector_phase(&mut z, self.keep, -b.theta[i]);
            }
            z * b.coeff.conj()
        }
    }

    fn mix(&self, x: &CMat, m: &CMat) -> CMat {
        let n = self.u.dim();
        let cnt = self.branches.len();
        let mut y = CMat::zeros(x.nrows(), x.ncols());
        for j in 0..cnt {
            for k in 0..cnt {
                let w = m[(j, k)];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                let src = x.rows(k * n, n);
                let mut dst = y.rows_mut(j * n, n);
                dst += src * w;
            }
        }
        y
    }

    fn run(&self, x: &CMat, adjoint: bool) -> CMat {
        let n = self.u.dim();
        let y = self.mix(x, &self.prep);
        let mut z = CMat::zeros(x.nrows(), x.ncols());
        for (j, b) in self.branches.iter().enumerate() {
            let out = self.branch(b, &y.rows(j * n, n).into_owned(), adjoint);
            z.rows_mut(j * n, n).copy_from(&out);
        }
        self.mix(&z, &self.prep.adjoint())
    }
}

impl Operator for QsvtCircuit {
    fn dim(&self) -> usize {
        self.branches.len() * self.u.dim()
    }
    fn apply(&self, x: &CMat) -> CMat {
        self.run(x, false)
    }
    fn apply_adjoint(&self, x: &CMat) -> CMat {
        self.run(x, true)
    }
}

/// Two branches realizing a definite-parity real polynomial with `|p| ≤ 1`:
/// their uniform combination has block `mult · p(A)`.
fn parity_branches(p: &ChebyshevPolynomial, mult: C64) -> Result<(Vec<QsvtBranch>, f64)> {
    let ph = find_phases(&p.coefficients)?;
    let d = ph.degree;
    let plus = phases::to_reflection_convention(&ph.phases);
    let neg: Vec<f64> = ph.phases.iter().map(|x| -x).collect();
    let minus = phases::to_reflection_convention(&neg);
    let omega = I.powi(d as i32 - 1) * mult;
    Ok((
        vec![
            QsvtBranch {
                theta: plus,
                coeff: omega,
            },
            QsvtBranch {
                theta: minus,
                coeff: -omega,
            },
        ],
        ph.residual,
    ))
}

/// A QSVT circuit for `(1/L) Σ_ℓ mult_ℓ · p_ℓ(A/α)` from `L` definite-parity polynomials.
pub struct Assembled {
    pub be: BlockEncoding,
    pub phase_residual: f64,
    pub degree: usize,
}

fn assemble(be: &BlockEncoding, parts: &[(ChebyshevPolynomial, C64)]) -> Result<Assembled> {
    let mut branches = Vec::new();
    let mut residual = 0.0f64;
    for (p, m) in parts {
        let (b, r) = parity_branches(p, *m)?;
        branches.extend(b);
        residual = residual.max(r);
    }
    let cnt = branches.len();
    let circuit = QsvtCircuit::new(be.op.clone(), be.target_dim, branches);
    let degree = circuit.queries();
    let mut out = BlockEncoding::new(
        Arc::new(circuit),
        1.0,
        cnt * be.ancilla_dim,
        be.target_dim,
        0.0,
    );
    out.ancilla_qubits = be.ancilla_qubits + qubits_for(cnt);
    out.queries = degree * be.queries;
    Ok(Assembled {
        be: out,
        phase_residual: residual,
        degree,
    })
}

fn check_hermitian_block(be: &BlockEncoding) -> Result<CMat> {
    let b = be.raw_block();
    let herm = linalg::hermiticity_error(&b);
    let allowed = 2.0 * be.epsilon / be.alpha + 1e-10;
    if herm > allowed {
        return Err(Error::Hypothesis(format!(
            "encoded target is not Hermitian: ‖B − B†‖ = {herm:.3e} > {allowed:.3e}"
        )));
    }
    Ok((&b + b.adjoint()) * c(0.5))
}

pub(crate) fn semantic_encoding(
    be: &BlockEncoding,
    f: impl Fn(f64) -> C64,
    extra_qubits: usize,
    queries: usize,
) -> Result<BlockEncoding> {
    let b = check_hermitian_block(be)?;
    let m = linalg::hermitian_function(&b, f);
    let norm = linalg::spectral_norm(&m);
    let mut out = bea::dilate(&m, norm.max(1.0))?;
    out.ancilla_qubits = be.ancilla_qubits + extra_qubits;
    out.queries = queries;
    Ok(out)
}

/// Eigenvalue transform `p(A/α)` of a Hermitian block encoding.
///
/// Definite-parity polynomials need `|p| ≤ 1` and cost one extra qubit;
/// mixed-parity polynomials need `|p| ≤ 1/2` and cost two.
pub fn eigen_transform(
    be: &BlockEncoding,
    poly: &ChebyshevPolynomial,
    mode: Mode,
) -> Result<BlockEncoding> {
    let sup = poly.sampled_sup();
    let limit = if poly.parity == Parity::None {
        0.5
    } else {
        1.0
    };
    if sup > limit + 1e-12 {
        return Err(Error::Hypothesis(format!(
            "polynomial sup-norm {sup:.6} exceeds {limit} for {:?} parity",
            poly.parity
        )));
    }
    if !be.self_adjoint || mode == Mode::Semantic {
        check_hermitian_block(be)?;
    }
    let d = poly.degree;
    let base_err = 4.0 * d as f64 * (be.epsilon / be.alpha).sqrt();
    match mode {
        Mode::Semantic => {
            let extra = if poly.parity == Parity::None { 2 } else { 1 };
            let out = semantic_encoding(be, |x| c(poly.eval(x)), extra, d * be.queries)?;
            Ok(out.with_epsilon(base_err))
        }
        Mode::Faithful => {
            let parts = if poly.parity == Parity::None {
                vec![
                    (poly.even_part().scaled(2.0), ONE),
                    (poly.odd_part().scaled(2.0), ONE),
                ]
            } else {
                vec![(poly.clone(), ONE)]
            };
            let a = assemble(be, &parts)?;
            let eps = base_err + a.phase_residual;
            Ok(a.be.with_epsilon(eps))
        }
    }
}

/// Oblivious amplitude amplification `−W R W† R W` with `R = 2Π − I`:
/// maps a block `V/2` (with `V` unitary) to `V`.
pub struct Oaa {
    w: OpRef,
    keep: usize,
}

impl Oaa {
    fn reflect(&self, z: &mut CMat) {
        for col in 0..z.ncols() {
            for row in self.keep..z.nrows() {
                z[(row, col)] = -z[(row, col)];
            }
        }
    }
}

impl Operator for Oaa {
    fn dim(&self) -> usize {
        self.w.dim()
    }
    fn apply(&self, x: &CMat) -> CMat {
        let mut y = self.w.apply(x);
        self.reflect(&mut y);
        let mut y = self.w.apply_adjoint(&y);
        self.reflect(&mut y);
        -self.w.apply(&y)
    }
    fn apply_adjoint(&self, x: &CMat) -> CMat {
        let mut y = self.w.apply_adjoint(x);
        self.reflect(&mut y);
        let mut y = self.w.apply(&y);
        self.reflect(&mut y);
        -self.w.apply_adjoint(&y)
    }
}

/// Amplify an encoding of a unitary with α = 2 to α = 1.
pub fn oaa(be: &BlockEncoding) -> BlockEncoding {
    let e = be.epsilon;
    let mut out = BlockEncoding::new(
        Arc::new(Oaa {
            w: be.op.clone(),
            keep: be.target_dim,
        }),
        1.0,
        be.ancilla_dim,
        be.target_dim,
        e + 1.5 * e * e + 0.5 * e * e * e,
    );
    out.ancilla_qubits = be.ancilla_qubits;
    out.queries = 3 * be.queries;
    out
}

/// Printed query formula `ceil(6α|t| + 9 ln(12/ε))`.
pub fn hamsim_query_formula(alpha: f64, t: f64, eps: f64) -> usize {
    (6.0 * alpha * t.abs() + 9.0 * (12.0 / eps).ln()).ceil() as usize
}

pub(crate) fn check_sim_hypothesis(be: &BlockEncoding, t: f64, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    if t != 0.0 {
        let required = eps / (2.0 * t.abs());
        if be.epsilon > required * (1.0 + 1e-12) {
            return Err(Error::Hypothesis(format!(
                "input encoding error {:.3e} exceeds the required bound eps/(2|t|) = {required:.3e}",
                be.epsilon
            )));
        }
    }
    Ok(())
}

/// Polynomial data of a Hamiltonian-simulation circuit.
#[derive(Clone, Debug)]
pub struct HamSimPlan {
    pub cos_part: ChebyshevPolynomial,
    pub sin_part: ChebyshevPolynomial,
    pub degree: usize,
    pub poly_error: f64,
}

/// Scaled Jacobi–Anger pair for `e^{−iτx}` with `|·| < 1` and total error `δ_p`.
pub fn ham_sim_plan(tau: f64, delta_p: f64, min_degree: usize) -> Result<HamSimPlan> {
    let approx = approx_exp(tau.abs(), (delta_p / 2.0).min(0.5))?;
    let s = 1.0 / (1.0 + delta_p / 2.0);
    let cos_part = approx.cos_part.scaled(s);
    let mut sin_part = approx.sin_part.scaled(s);
    if tau < 0.0 {
        sin_part = sin_part.scaled(-1.0);
    }
    let pad = |p: &ChebyshevPolynomial, parity: usize| {
        let mut target = min_degree.max(p.degree);
        if target % 2 != parity {
            target += 1;
        }
        let mut cf = p.padded(target);
        cf[target] += 0.0;
        ChebyshevPolynomial {
            degree: cf.len() - 1,
            coefficients: cf,
            parity: p.parity,
            sup_bound: p.sup_bound,
        }
    };
    let cos_part = if min_degree > 0 {
        pad(&cos_part, 0)
    } else {
        cos_part
    };
    let sin_part = if min_degree > 0 {
        pad(&sin_part, 1)
    } else {
        sin_part
    };
    let degree = cos_part.degree.max(sin_part.degree);
    Ok(HamSimPlan {
        cos_part,
        sin_part,
        degree,
        poly_error: delta_p,
    })
}

/// `(1, a+2, eps)`-block-encoding of `e^{−iHt}`.
pub fn ham_sim(be: &BlockEncoding, t: f64, eps: f64, mode: Mode) -> Result<BlockEncoding> {
    ham_sim_padded(be, t, eps, mode, 0)
}

/// Hamiltonian simulation whose polynomials are padded to at least `min_degree`.
pub fn ham_sim_padded(
    be: &BlockEncoding,
    t: f64,
    eps: f64,
    mode: Mode,
    min_degree: usize,
) -> Result<BlockEncoding> {
    check_sim_hypothesis(be, t, eps)?;
    if !be.self_adjoint && mode == Mode::Faithful {
        check_hermitian_block(be)?;
    }
    if t == 0.0 && min_degree == 0 {
        let mut id = BlockEncoding::identity(be.target_dim);
        id.ancilla_qubits = be.ancilla_qubits + 2;
        id.queries = 0;
        return Ok(id.with_epsilon(0.0));
    }
    let tau = be.alpha * t;
    let plan = ham_sim_plan(tau, eps / 8.0, min_degree)?;
    if plan.degree > MAX_DEGREE {
        return Err(Error::Hypothesis(format!(
            "Hamiltonian simulation needs degree {} above the cap {MAX_DEGREE}; split the evolution into segments",
            plan.degree
        )));
    }
    match mode {
        Mode::Semantic => {
            let mut out =
                semantic_encoding(be, |x| cis(-tau * x), 2, 3 * plan.degree * be.queries)?;
            out.alpha = 1.0;
            Ok(out.with_epsilon(eps))
        }
        Mode::Faithful => {
            let parts = vec![(plan.cos_part.clone(), ONE), (plan.sin_part.clone(), I)];
            let a = assemble(be, &parts)?;
            let mut half = a.be;
            half.alpha = 2.0;
            half.epsilon = plan.poly_error + 2.0 * a.phase_residual;
            let amplified = oaa(&half);
            let certified = be.epsilon * t.abs() + amplified.epsilon;
            debug_assert!(certified <= eps * (1.0 + 1e-9));
            Ok(amplified.with_epsilon(eps))
        }
    }
}

/// Degree of the Hamiltonian-simulation polynomials for `(α, t, eps)`.
pub fn ham_sim_degree(alpha: f64, t: f64, eps: f64) -> Result<usize> {
    Ok(ham_sim_plan(alpha * t, eps / 8.0, 0)?.degree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bea::{dilate, verify_contract};
    use crate::linalg::{
        diag_real, expm_hermitian, random_hermitian, spectral_norm, unitarity_error,
    };
    use crate::ops::Counting;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn t1_is_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let a = random_hermitian(&mut rng, 4, 1.5);
        let be = dilate(&a, 2.0).unwrap();
        let out =
            eigen_transform(&be, &ChebyshevPolynomial::chebyshev_t(1), Mode::Faithful).unwrap();
        assert!(verify_contract(&out, &(&a / c(2.0))).unwrap() < 1e-10);
        assert!(unitarity_error(&out.unitary().unwrap()) < 1e-12);
    }

    #[test]
    fn t2_at_plus_minus_one() {
        let be = dilate(&diag_real(&[1.0, -1.0]), 1.0).unwrap();
        let out =
            eigen_transform(&be, &ChebyshevPolynomial::chebyshev_t(2), Mode::Faithful).unwrap();
        assert!(verify_contract(&out, &linalg::identity(2)).unwrap() < 1e-10);
    }

    #[test]
    fn mixed_parity_needs_half_bound() {
        let be = dilate(&diag_real(&[0.3, -0.6]), 1.0).unwrap();
        let p = ChebyshevPolynomial::new(vec![0.2, 0.25, 0.0, 0.05]);
        let out = eigen_transform(&be, &p, Mode::Faithful).unwrap();
        let expect = diag_real(&[p.eval(0.3), p.eval(-0.6)]);
        assert!(verify_contract(&out, &expect).unwrap() < 1e-10);
        let big = ChebyshevPolynomial::new(vec![0.4, 0.5]);
        assert!(eigen_transform(&be, &big, Mode::Faithful).is_err());
    }

    #[test]
    fn faithful_and_semantic_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_hermitian(&mut rng, 6, 1.0);
        let be = dilate(&a, 1.0).unwrap();
        let p = approx_sign(0.1, 1e-4).unwrap();
        let f = eigen_transform(&be, &p, Mode::Faithful).unwrap();
        let s = eigen_transform(&be, &p, Mode::Semantic).unwrap();
        assert!(spectral_norm(&(f.block() - s.block())) <= f.epsilon + 1e-10);
    }

    #[test]
    fn faithful_query_count_is_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let a = random_hermitian(&mut rng, 3, 1.0);
        let be = dilate(&a, 1.0).unwrap();
        let counter = Counting::new(be.op.clone());
        let mut counted = be.clone();
        counted.op = counter.clone();
        let p = ChebyshevPolynomial::new(vec![0.0, 0.3, 0.0, 0.2, 0.0, 0.1]);
        let out = eigen_transform(&counted, &p, Mode::Faithful).unwrap();
        counter.reset();
        let _ = out.apply_to_state(&linalg::basis(3, 0));
        assert_eq!(counter.calls(), 2 * 5);
        assert_eq!(out.queries, 5);
    }

    #[test]
    fn ham_sim_zero_time() {
        let be = dilate(&diag_real(&[0.5, -0.2]), 1.0).unwrap();
        let out = ham_sim(&be, 0.0, 1e-3, Mode::Faithful).unwrap();
        assert!(verify_contract(&out, &linalg::identity(2)).unwrap() < 1e-14);
        assert_eq!(
            hamsim_query_formula(1.0, 0.0, 1e-3),
            (9.0 * 12000f64.ln()).ceil() as usize
        );
    }

    #[test]
    fn ham_sim_formula_regression() {
        assert_eq!(hamsim_query_formula(2.0, 5.0, 1e-6), 207);
    }

    #[test]
    fn ham_sim_pauli_z() {
        let z = diag_real(&[1.0, -1.0]);
        let be = dilate(&z, 1.0).unwrap();
        let t = std::f64::consts::FRAC_PI_2;
        let out = ham_sim(&be, t, 1e-6, Mode::Faithful).unwrap();
        let expect = linalg::diag(&[cis(-t), cis(t)]);
        assert!(verify_contract(&out, &expect).unwrap() <= 1e-6);
        assert!(out.queries <= hamsim_query_formula(1.0, t, 1e-6));
    }

    #[test]
    fn ham_sim_random_and_negative_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = random_hermitian(&mut rng, 5, 3.0);
        let be = dilate(&h, 3.5).unwrap();
        for &t in &[1.3, -0.7] {
            let out = ham_sim(&be, t, 1e-6, Mode::Faithful).unwrap();
            assert!(verify_contract(&out, &expm_hermitian(&h, t)).unwrap() <= 1e-6);
            assert!(unitarity_error(&out.unitary().unwrap()) < 1e-10);
            let sem = ham_sim(&be, t, 1e-6, Mode::Semantic).unwrap();
            assert!(verify_contract(&sem, &expm_hermitian(&h, t)).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn ham_sim_rejects_inaccurate_input() {
        let be = dilate(&diag_real(&[0.5, -0.2]), 1.0)
            .unwrap()
            .with_epsilon(1e-2);
        assert!(matches!(
            ham_sim(&be, 1.0, 1e-3, Mode::Faithful),
            Err(Error::Hypothesis(_))
        ));
    }
}
