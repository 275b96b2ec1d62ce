//! Full Liouvillian assembly and KvN time evolution.
//!
//! The electronic part is `L_el = −Σ_{n,j} D^el_{n,j} ⊗ K_{p'_{n,j}}` with
//! `K = −iD` Hermitian; together with the classical part it forms a
//! Hermitian generator whose evolution `e^{−iLt}` is emulated by QSVT or by
//! the angle-free construction, segmenting long times so the polynomial
//! degree stays under the phase-finding cap.

use std::str::FromStr;

use crate::bea::{self, BlockEncoding};
use crate::electronic::{self, DiagonalKickback, ElectronicSpec, GroundStateSource};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::ops;
use crate::phasespace::{self, KvNState, PhaseSpaceSpec, Variable};
use crate::qsvt::{self, Mode, MAX_DEGREE};

/// Encoding of the zero operator: a Pauli X on a single ancilla qubit.
pub fn zero_encoding(n: usize) -> BlockEncoding {
    let x = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
    let mut be = BlockEncoding::new(ops::leading(&x, n), 1.0, 2, n, 0.0);
    be.self_adjoint = true;
    be.queries = 0;
    be
}

/// Force values below roundoff relative to their scale.
fn is_zero_term(values: &[f64], alpha: f64) -> bool {
    values.iter().all(|v| v.abs() <= 1e-12 * alpha.max(1.0))
}

/// Hellmann–Feynman force field `D^el_{n,j}` on the joint position register.
pub struct ForceField {
    pub n: usize,
    pub j: usize,
    pub field: DiagonalKickback,
}

/// Every `D^el_{n,j}` of the system.
pub fn electronic_forces(
    espec: &ElectronicSpec,
    pspec: &PhaseSpaceSpec,
    gs: &GroundStateSource,
) -> Result<Vec<ForceField>> {
    let mut out = Vec::new();
    for n in 0..pspec.n_nuclei {
        for j in 0..pspec.spatial_dim {
            out.push(ForceField {
                n,
                j,
                field: electronic::d_el(espec, pspec, n, j, gs)?,
            });
        }
    }
    Ok(out)
}

/// `L_el` as a self-adjoint LCU of `D^el ⊗ K_p` products.
pub fn electronic_liouvillian_from(
    pspec: &PhaseSpaceSpec,
    forces: &[ForceField],
) -> Result<BlockEncoding> {
    let layout = pspec.layout();
    let x_axes = pspec.position_axes();
    let kp = phasespace::momentum_encoding(&pspec.p)?;
    let mut terms = Vec::new();
    for f in forces {
        if is_zero_term(&f.field.values, f.field.be.alpha) && f.field.be.epsilon == 0.0 {
            continue;
        }
        let pa = layout.axis(Variable::P { n: f.n, j: f.j })?;
        terms.push(bea::disjoint_product(
            &layout.dims,
            &[(&kp, &[pa]), (&f.field.be, &x_axes)],
        )?);
    }
    if terms.is_empty() {
        return Ok(zero_encoding(layout.total()));
    }
    let coeffs = vec![c(-1.0); terms.len()];
    bea::lcu_weighted(&coeffs, &terms)
}

/// Block encoding of `L_el` from freshly computed force fields.
pub fn electronic_liouvillian(
    espec: &ElectronicSpec,
    pspec: &PhaseSpaceSpec,
    gs: &GroundStateSource,
) -> Result<BlockEncoding> {
    let forces = electronic_forces(espec, pspec, gs)?;
    electronic_liouvillian_from(pspec, &forces)
}

/// Dense `−Σ diag(v_{n,j}) ⊗ K_{p'_{n,j}}` from explicit force values over the position register.
pub fn electronic_liouvillian_dense(
    pspec: &PhaseSpaceSpec,
    fields: &[(usize, usize, Vec<f64>)],
) -> Result<CMat> {
    let layout = pspec.layout();
    let dims = &layout.dims;
    let total = layout.total();
    linalg::check_dim(total, "dense electronic Liouvillian")?;
    let nx = pspec.n_nuclei * pspec.spatial_dim;
    let xdims = &dims[..nx];
    let kp = phasespace::momentum_matrix(&pspec.p)?;
    let strides = linalg::strides(dims);
    let mut out = CMat::zeros(total, total);
    for (n, j, values) in fields {
        let pa = layout.axis(Variable::P { n: *n, j: *j })?;
        for col in 0..total {
            let digits = linalg::unravel(col, dims);
            let v = values[linalg::ravel(&digits[..nx], xdims)];
            if v == 0.0 {
                continue;
            }
            let k = digits[pa];
            for r in 0..dims[pa] {
                let entry = kp[(r, k)];
                if entry != C64::new(0.0, 0.0) {
                    let row = col - k * strides[pa] + r * strides[pa];
                    out[(row, col)] -= entry * v;
                }
            }
        }
    }
    Ok(out)
}

/// Sum of a classical and an electronic Liouvillian on the same layout.
pub fn combine(
    l_cl: &BlockEncoding,
    l_el: &BlockEncoding,
    electronic_vanishes: bool,
) -> Result<BlockEncoding> {
    if l_cl.target_dim != l_el.target_dim {
        return Err(Error::Dimension(format!(
            "classical Liouvillian acts on dimension {} but electronic on {}",
            l_cl.target_dim, l_el.target_dim
        )));
    }
    if electronic_vanishes {
        return Ok(l_cl.clone());
    }
    bea::lcu_weighted(&[c(1.0), c(1.0)], &[l_cl.clone(), l_el.clone()])
}

/// The assembled generator together with its parts.
pub struct FullLiouvillian {
    pub be: BlockEncoding,
    pub classical: BlockEncoding,
    pub electronic: BlockEncoding,
    pub forces: Vec<ForceField>,
}

impl FullLiouvillian {
    /// `α_{L_el}` (zero when the force field vanishes).
    pub fn electronic_alpha(&self) -> f64 {
        if self.electronic_vanishes() {
            0.0
        } else {
            self.electronic.alpha
        }
    }

    pub fn electronic_vanishes(&self) -> bool {
        self.forces
            .iter()
            .all(|f| is_zero_term(&f.field.values, f.field.be.alpha) && f.field.be.epsilon == 0.0)
    }

    /// Dense `L_cl + L_el` built from the exact reference force values.
    pub fn dense_reference(&self, pspec: &PhaseSpaceSpec) -> Result<CMat> {
        let mut l = phasespace::classical_liouvillian_dense(pspec)?;
        let fields: Vec<(usize, usize, Vec<f64>)> = self
            .forces
            .iter()
            .map(|f| (f.n, f.j, f.field.reference.clone()))
            .collect();
        l += electronic_liouvillian_dense(pspec, &fields)?;
        Ok(l)
    }
}

/// `L = L_cl + L_el` with `α_L = α_cl + α_el`.
pub fn full_liouvillian(
    espec: &ElectronicSpec,
    pspec: &PhaseSpaceSpec,
    gs: &GroundStateSource,
) -> Result<FullLiouvillian> {
    let classical = phasespace::classical_liouvillian(pspec)?;
    let forces = electronic_forces(espec, pspec, gs)?;
    let electronic = electronic_liouvillian_from(pspec, &forces)?;
    let mut full = FullLiouvillian {
        be: classical.clone(),
        classical,
        electronic,
        forces,
    };
    full.be = combine(
        &full.classical,
        &full.electronic,
        full.electronic_vanishes(),
    )?;
    Ok(full)
}

/// Evolution engine for `e^{−iLt}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Qsvt,
    Angleless,
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qsvt" => Ok(Engine::Qsvt),
            "angleless" => Ok(Engine::Angleless),
            other => Err(Error::Config(format!(
                "unknown engine `{other}` (expected qsvt or angleless)"
            ))),
        }
    }
}

/// Outcome of [`evolve`].
#[derive(Clone, Debug)]
pub struct Evolution {
    /// Projected (unnormalized) KvN amplitudes.
    pub state: KvNState,
    pub norm: f64,
    /// Product over segments of the probability of finding the ancillas in `|0⟩`.
    pub success_probability: f64,
    pub segments: usize,
    /// Logical queries to the Liouvillian encoding.
    pub queries: usize,
    /// Polynomial degree (QSVT) or Fourier half-width (angle-free) per segment.
    pub degree: usize,
    /// Certified ℓ2 error of the projected state.
    pub epsilon: f64,
}

fn fits(engine: Engine, alpha: f64, t: f64, eps: f64) -> Result<Option<usize>> {
    match engine {
        Engine::Qsvt => {
            let d = qsvt::ham_sim_degree(alpha, t, eps)?;
            Ok((d <= MAX_DEGREE).then_some(d))
        }
        Engine::Angleless => match qsvt::ham_sim_half_width(alpha, t, eps) {
            Ok(d) => Ok(Some(d)),
            Err(Error::Hypothesis(_)) => Ok(None),
            Err(e) => Err(e),
        },
    }
}

/// Segment count and per-segment size for evolving to `t` within `eps`.
pub fn segment_plan(engine: Engine, alpha: f64, t: f64, eps: f64) -> Result<(usize, usize)> {
    let mut m = 1usize;
    loop {
        if let Some(d) = fits(engine, alpha, t / m as f64, eps / m as f64)? {
            return Ok((m, d));
        }
        m = if m < 8 { m + 1 } else { m + m / 4 };
        if m > 1 << 20 {
            return Err(Error::Hypothesis(format!(
                "evolution to t = {t} with α = {alpha} needs more than 2^20 segments"
            )));
        }
    }
}

/// `e^{−iLt}ρ₀` through a Hamiltonian-simulation encoding of `L`.
///
/// Faithful mode runs the encoding on `|0⟩|ρ⟩` and projects the ancillas onto
/// `|0⟩` after each segment; semantic mode exponentiates the extracted block.
pub fn evolve(
    l: &BlockEncoding,
    rho0: &KvNState,
    t: f64,
    eps: f64,
    engine: Engine,
    mode: Mode,
) -> Result<Evolution> {
    if rho0.amplitudes.len() != l.target_dim {
        return Err(Error::Dimension(format!(
            "state of length {} for a Liouvillian on dimension {}",
            rho0.amplitudes.len(),
            l.target_dim
        )));
    }
    let n0 = rho0.amplitudes.norm();
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "initial state norm {n0} differs from 1"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    if t == 0.0 {
        return Ok(Evolution {
            state: rho0.clone(),
            norm: n0,
            success_probability: 1.0,
            segments: 0,
            queries: 0,
            degree: 0,
            epsilon: 0.0,
        });
    }
    qsvt::check_sim_hypothesis(l, t, eps)?;
    let (m, degree) = segment_plan(engine, l.alpha, t, eps)?;
    let dt = t / m as f64;
    let de = eps / m as f64;
    let (psi, success, queries) = match mode {
        Mode::Semantic => {
            let block = l.block();
            let herm = (&block + block.adjoint()) * c(0.5);
            let u = linalg::expm_hermitian(&herm, t);
            let psi = u * &rho0.amplitudes;
            let s = psi.norm_squared();
            let q = match engine {
                Engine::Qsvt => m * 3 * degree * l.queries,
                Engine::Angleless => m * 6 * (4 * degree - 1) * l.queries,
            };
            (psi, s, q)
        }
        Mode::Faithful => {
            let seg = match engine {
                Engine::Qsvt => qsvt::ham_sim(l, dt, de, Mode::Faithful)?,
                Engine::Angleless => qsvt::angleless_ham_sim(l, dt, de, Mode::Faithful)?,
            };
            let mut psi = rho0.amplitudes.clone();
            let mut success = 1.0;
            for _ in 0..m {
                let before = psi.norm_squared();
                psi = project(&seg, &psi);
                let after = psi.norm_squared();
                success *= if before > 0.0 { after / before } else { 0.0 };
            }
            (psi, success, m * seg.queries)
        }
    };
    let norm = psi.norm();
    Ok(Evolution {
        state: KvNState {
            amplitudes: psi,
            layout: rho0.layout.clone(),
        },
        norm,
        success_probability: success,
        segments: m,
        queries,
        degree,
        epsilon: eps,
    })
}

/// `(⟨0| ⊗ I) U (|0⟩ ⊗ ψ)`.
fn project(be: &BlockEncoding, psi: &CVec) -> CVec {
    let full = be.apply_to_state(psi);
    full.rows(0, be.target_dim).into_owned()
}

/// Semantic reference for [`evolve`]: dense `e^{−iLt}ρ₀` from an explicit generator.
pub fn evolve_dense(l: &CMat, rho0: &KvNState, t: f64) -> Result<KvNState> {
    let u = linalg::expm_hermitian(l, t);
    Ok(KvNState {
        amplitudes: u * &rho0.amplitudes,
        layout: rho0.layout.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::electronic::{ground_state_source, ElectronicMode, GroundStateSettings};
    use crate::linalg::spectral_norm;
    use crate::oracle;
    use crate::phasespace::{GaussianAxis, GridSpec};

    fn free_particle(g: usize) -> PhaseSpaceSpec {
        PhaseSpaceSpec::nve(
            1,
            GridSpec::centered(g, 0.5, 2),
            GridSpec::centered(4, 0.5, 1),
            vec![1.0],
            vec![1.0],
            0.5,
        )
    }

    fn gaussian(spec: &PhaseSpaceSpec) -> KvNState {
        let layout = spec.layout();
        let axes: Vec<GaussianAxis> = layout
            .dims
            .iter()
            .map(|_| GaussianAxis {
                center: 0.1,
                width: 0.6,
            })
            .collect();
        KvNState::gaussian(spec, &axes).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let spec = free_particle(6);
        let l = phasespace::classical_liouvillian(&spec).unwrap();
        let rho = gaussian(&spec);
        let out = evolve(&l, &rho, 0.0, 1e-3, Engine::Qsvt, Mode::Faithful).unwrap();
        assert!(out.state.distance(&rho) < 1e-15);
        assert_eq!(out.queries, 0);
    }

    #[test]
    fn engines_agree_with_dense_expm() {
        let spec = free_particle(6);
        let l = phasespace::classical_liouvillian(&spec).unwrap();
        let dense = oracle::classical_liouvillian(&spec).unwrap();
        let rho = gaussian(&spec);
        let t = 1.3;
        let eps = 1e-4;
        let truth = oracle::expm_evolve(&dense, &rho.amplitudes, t).unwrap();
        let q = evolve(&l, &rho, t, eps, Engine::Qsvt, Mode::Faithful).unwrap();
        let a = evolve(&l, &rho, t, eps, Engine::Angleless, Mode::Faithful).unwrap();
        assert!((&q.state.amplitudes - &truth).norm() <= eps);
        assert!((&a.state.amplitudes - &truth).norm() <= eps);
        assert!((q.norm - 1.0).abs() <= eps + 1e-10);
        assert!((a.norm - 1.0).abs() <= eps + 1e-10);
        assert!(q.success_probability > 1.0 - 2.0 * eps);
    }

    #[test]
    fn segmented_evolution_composes() {
        let spec = free_particle(5);
        let l = phasespace::classical_liouvillian(&spec).unwrap();
        let dense = oracle::classical_liouvillian(&spec).unwrap();
        let rho = gaussian(&spec);
        let eps = 1e-5;
        let long = 1.5 * MAX_DEGREE as f64 / l.alpha;
        let out = evolve(&l, &rho, long, eps, Engine::Qsvt, Mode::Faithful).unwrap();
        assert!(out.segments > 1);
        let truth = oracle::expm_evolve(&dense, &rho.amplitudes, long).unwrap();
        assert!((&out.state.amplitudes - &truth).norm() <= eps);
        let half = evolve(&l, &rho, long / 2.0, eps, Engine::Qsvt, Mode::Faithful).unwrap();
        let mut mid = half.state.clone();
        mid.amplitudes /= c(mid.amplitudes.norm());
        let twice = evolve(&l, &mid, long / 2.0, eps, Engine::Qsvt, Mode::Faithful).unwrap();
        assert!(twice.state.distance(&out.state) <= 3.0 * eps);
    }

    #[test]
    fn semantic_mode_matches_faithful() {
        let spec = free_particle(5);
        let l = phasespace::classical_liouvillian(&spec).unwrap();
        let rho = gaussian(&spec);
        let f = evolve(&l, &rho, 0.7, 1e-6, Engine::Qsvt, Mode::Faithful).unwrap();
        let s = evolve(&l, &rho, 0.7, 1e-6, Engine::Qsvt, Mode::Semantic).unwrap();
        assert!(f.state.distance(&s.state) < 2e-6);
    }

    fn electronic_toy() -> (ElectronicSpec, PhaseSpaceSpec) {
        let espec = ElectronicSpec::new(1, 3, 1.0).with_fixed_charge(1.0, vec![0.0]);
        let pspec = PhaseSpaceSpec::nve(
            1,
            GridSpec::centered(4, 0.4, 1),
            GridSpec::centered(4, 0.5, 1),
            vec![2.0],
            vec![1.0],
            0.5,
        );
        (espec, pspec)
    }

    #[test]
    fn electronic_liouvillian_matches_force_kronecker() {
        let (espec, pspec) = electronic_toy();
        let gs = ground_state_source(&espec, &pspec, &GroundStateSettings::default()).unwrap();
        let full = full_liouvillian(&espec, &pspec, &gs).unwrap();
        let grads: Vec<f64> = (0..pspec.position_count())
            .map(|x| {
                let pos = pspec.positions(x);
                oracle::ground_energy_gradient(&espec, &pspec.charges, &pos, 0, 0, 1e-4).unwrap()
            })
            .collect();
        let kp = phasespace::momentum_matrix(&pspec.p).unwrap();
        let expected = -linalg::kron(&linalg::diag_real(&grads), &kp);
        let got = full.electronic.block();
        assert!(spectral_norm(&(&got - &expected)) < 1e-6);
        assert!(linalg::hermiticity_error(&got) < 1e-10);
        let dense = full.dense_reference(&pspec).unwrap();
        assert!(bea::verify_contract(&full.be, &dense).unwrap() <= full.be.epsilon + 1e-9);
        assert!((full.be.alpha - full.classical.alpha - full.electronic.alpha).abs() < 1e-9);
    }

    #[test]
    fn faithful_ground_states_stay_within_contract() {
        let (mut espec, pspec) = electronic_toy();
        espec.mode = ElectronicMode::Faithful;
        let gs = ground_state_source(&espec, &pspec, &GroundStateSettings::default()).unwrap();
        let el = electronic_liouvillian(&espec, &pspec, &gs).unwrap();
        let forces = electronic_forces(&espec, &pspec, &gs).unwrap();
        let fields: Vec<(usize, usize, Vec<f64>)> = forces
            .iter()
            .map(|f| (f.n, f.j, f.field.reference.clone()))
            .collect();
        let dense = electronic_liouvillian_dense(&pspec, &fields).unwrap();
        assert!(bea::verify_contract(&el, &dense).unwrap() <= el.epsilon);
    }

    #[test]
    fn flat_energy_gives_zero_electronic_part() {
        let espec = ElectronicSpec::new(1, 3, 1.0);
        let pspec = electronic_toy().1;
        let gs = ground_state_source(&espec, &pspec, &GroundStateSettings::default()).unwrap();
        let full = full_liouvillian(&espec, &pspec, &gs).unwrap();
        assert!(full.electronic_vanishes());
        assert_eq!(full.electronic_alpha(), 0.0);
        assert!(spectral_norm(&full.electronic.block()) < 1e-12);
        assert_eq!(full.be.alpha, full.classical.alpha);
    }
}
