//! Alchemical thermodynamic integration.
//!
//! The pipeline prepares `(1/√N_Λ) Σ_Λ |Λ⟩|ρ₀⟩`, evolves every block under
//! its own interpolated Liouvillian `L_Λ = (1−Λ)L_A + ΛL_B`, copies the
//! thermostat register, and reads `ΔF̃ = (1/N_Λ) Σ_Λ ⟨H_B − H_A⟩_Λ` from a
//! Hadamard test on the block encoding of the Hamiltonian difference,
//! optionally through amplitude estimation with median boosting.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bea::{self, BlockEncoding};
use crate::electronic::{self, DiagonalKickback, ElectronicSpec, GroundStateSettings};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::liouvillian::{self, Engine, FullLiouvillian};
use crate::ops::{BlockDiag, Local, OpRef};
use crate::phasespace::{self, Ensemble, KvNState, Layout, PhaseSpaceSpec, Variable};
use crate::qsvt::{self, Mode};

/// Single-run success probability of phase estimation (`8/π²`) minus one half,
/// rounded down; sets the number of median repetitions.
const QAE_MARGIN: f64 = 0.31;

/// Largest phase-estimation register accepted.
pub const MAX_QAE_ANCILLAS: usize = 24;

/// How the Hadamard-test probability is read out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimation {
    /// Exact probability from the amplitudes.
    Ideal,
    /// Bernoulli estimate from the given number of shots.
    Sampled { shots: usize },
    /// Amplitude estimation with median boosting.
    Qae,
}

impl FromStr for Estimation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "ideal" => Ok(Estimation::Ideal),
            "qae" => Ok(Estimation::Qae),
            "sampled" => Ok(Estimation::Sampled { shots: 1000 }),
            other => match other.strip_prefix("sampled:") {
                Some(n) => n
                    .parse()
                    .map(|shots| Estimation::Sampled { shots })
                    .map_err(|_| Error::Config(format!("bad shot count in `{other}`"))),
                None => Err(Error::Config(format!(
                    "unknown estimation mode `{other}` (expected ideal, sampled[:shots] or qae)"
                ))),
            },
        }
    }
}

/// Parameters of a free-energy run.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermoConfig {
    pub n_lambda: usize,
    pub t_eq: f64,
    pub eps: f64,
    pub xi: f64,
    /// Phase-estimation register size; the minimum sufficient size when absent.
    pub qae_ancillas: Option<usize>,
    pub estimation: Estimation,
    pub engine: Engine,
    pub mode: Mode,
    /// Drop Hamiltonian terms that are identical in both systems before encoding `ΔH`.
    pub cancel_shared_terms: bool,
    /// Compare every Λ block against a dense evolution.
    pub reference: bool,
    pub seed: u64,
}

impl Default for ThermoConfig {
    fn default() -> Self {
        ThermoConfig {
            n_lambda: 4,
            t_eq: 1.0,
            eps: 0.05,
            xi: 0.05,
            qae_ancillas: None,
            estimation: Estimation::Qae,
            engine: Engine::Qsvt,
            mode: Mode::Faithful,
            cancel_shared_terms: false,
            reference: true,
            seed: 11,
        }
    }
}

impl ThermoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_lambda == 0 {
            return Err(Error::InvalidArgument("n_lambda must be at least 1".into()));
        }
        if !(self.t_eq >= 0.0) || !self.t_eq.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "t_eq must be non-negative, got {}",
                self.t_eq
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "xi must lie in (0, 1), got {}",
                self.xi
            )));
        }
        if let Estimation::Sampled { shots: 0 } = self.estimation {
            return Err(Error::InvalidArgument(
                "sampled estimation needs at least one shot".into(),
            ));
        }
        Ok(())
    }

    /// Left Riemann points `k/N_Λ`.
    pub fn lambdas(&self) -> Vec<f64> {
        lambda_grid(self.n_lambda)
    }
}

/// Left Riemann points `k/n`, `k = 0..n`.
pub fn lambda_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 / n as f64).collect()
}

/// Precision split of the total target `eps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Budget {
    pub eps_disc: f64,
    pub eps_qae: f64,
    pub eps_delta: f64,
    /// Evolution tolerance per Λ block.
    pub eps_l: f64,
}

impl Budget {
    /// `ε_disc = ε_qae = ε/3`, `ε_Δ = ε/6`, `2α_Δ√(2ε_L) = ε/6`.
    pub fn split(eps: f64, alpha_delta: f64) -> Budget {
        let r = eps / (12.0 * alpha_delta);
        Budget {
            eps_disc: eps / 3.0,
            eps_qae: eps / 3.0,
            eps_delta: eps / 6.0,
            eps_l: r * r / 2.0,
        }
    }

    /// Contribution `2α_Δ√(2ε_L)` of imperfect evolution to `ΔF̂`.
    pub fn evolution_term(&self, alpha_delta: f64) -> f64 {
        2.0 * alpha_delta * (2.0 * self.eps_l).sqrt()
    }
}

/// One end point of the alchemical path.
#[derive(Clone, Debug, PartialEq)]
pub struct System {
    pub phase_space: PhaseSpaceSpec,
    pub electronic: Option<ElectronicSpec>,
}

/// Two systems sharing every nuclear register.
#[derive(Clone, Debug, PartialEq)]
pub struct AlchemicalPair {
    pub a: System,
    pub b: System,
}

impl AlchemicalPair {
    pub fn new(a: System, b: System) -> Result<Self> {
        let pair = AlchemicalPair { a, b };
        pair.validate()?;
        Ok(pair)
    }

    /// Path run backwards.
    pub fn reversed(&self) -> Self {
        AlchemicalPair {
            a: self.b.clone(),
            b: self.a.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (pa, pb) = (&self.a.phase_space, &self.b.phase_space);
        pa.validate()?;
        pb.validate()?;
        if pa.layout() != pb.layout() {
            return Err(Error::Dimension(format!(
                "systems act on different registers: {:?} vs {:?}",
                pa.layout().dims,
                pb.layout().dims
            )));
        }
        if pa.x != pb.x || pa.p != pb.p || pa.s != pb.s || pa.ps != pb.ps {
            return Err(Error::Dimension(
                "shared registers must have identical grid specs".into(),
            ));
        }
        if pa.ensemble != pb.ensemble || pa.bath != pb.bath {
            return Err(Error::InvalidArgument(
                "both systems must share the ensemble and bath".into(),
            ));
        }
        for e in [&self.a.electronic, &self.b.electronic]
            .into_iter()
            .flatten()
        {
            e.validate()?;
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        self.a.phase_space.layout()
    }

    /// Block encodings and reference values of both systems.
    pub fn prepare(&self, settings: &GroundStateSettings) -> Result<PreparedPair> {
        self.validate()?;
        Ok(PreparedPair {
            a: prepare_system(&self.a, settings).map_err(|e| e.at_stage("system_a"))?,
            b: prepare_system(&self.b, settings).map_err(|e| e.at_stage("system_b"))?,
            layout: self.layout(),
        })
    }
}

/// Encoded pieces of one system.
pub struct PreparedSystem {
    pub spec: PhaseSpaceSpec,
    pub liouvillian: FullLiouvillian,
    /// `H_kin` over `(p', s)` registers (`p'` only in NVE).
    pub kinetic: Vec<f64>,
    /// `H_pot` over the position registers.
    pub potential: Vec<f64>,
    /// `H_gse` over the position registers.
    pub ground: Option<DiagonalKickback>,
}

/// Both systems of a pair after preparation.
pub struct PreparedPair {
    pub a: PreparedSystem,
    pub b: PreparedSystem,
    pub layout: Layout,
}

fn kinetic_axes(spec: &PhaseSpaceSpec) -> Result<Vec<usize>> {
    let layout = spec.layout();
    let mut axes: Vec<usize> = layout
        .axes
        .iter()
        .enumerate()
        .filter(|(_, v)| matches!(v, Variable::P { .. }))
        .map(|(a, _)| a)
        .collect();
    if spec.ensemble == Ensemble::Nvt {
        axes.push(layout.axis(Variable::S)?);
    }
    Ok(axes)
}

/// Liouvillian and nuclear-Hamiltonian data of one system.
pub fn prepare_system(system: &System, settings: &GroundStateSettings) -> Result<PreparedSystem> {
    let spec = &system.phase_space;
    spec.validate()?;
    let kinetic = phasespace::reduced_diagonal(spec, &kinetic_axes(spec)?, |pt| spec.kinetic(pt));
    let potential =
        phasespace::reduced_diagonal(spec, &spec.position_axes(), |pt| spec.potential(pt));
    let (liouvillian, ground) = match &system.electronic {
        Some(espec) => {
            let gs = electronic::ground_state_source(espec, spec, settings)?;
            let full = liouvillian::full_liouvillian(espec, spec, &gs)?;
            let ground = electronic::h_gse(espec, spec, &gs)?;
            (full, Some(ground))
        }
        None => {
            let classical = phasespace::classical_liouvillian(spec)?;
            let n = spec.layout().total();
            let full = FullLiouvillian {
                be: classical.clone(),
                classical,
                electronic: liouvillian::zero_encoding(n),
                forces: Vec::new(),
            };
            (full, None)
        }
    };
    Ok(PreparedSystem {
        spec: spec.clone(),
        liouvillian,
        kinetic,
        potential,
        ground,
    })
}

impl PreparedSystem {
    fn ground_values(&self) -> Option<&[f64]> {
        self.ground.as_ref().map(|g| g.values.as_slice())
    }

    /// Exact `E₀(x)` values, when the system has electrons.
    pub fn ground_reference(&self) -> Option<&[f64]> {
        self.ground.as_ref().map(|g| g.reference.as_slice())
    }

    /// `H_nuc` values over the full layout as encoded (kickback values for `H_gse`).
    pub fn hamiltonian_diagonal(&self) -> Result<Vec<f64>> {
        self.diagonal_with(self.ground_values())
    }

    /// `H_nuc` values over the full layout with exact ground-state energies.
    pub fn hamiltonian_reference(&self) -> Result<Vec<f64>> {
        self.diagonal_with(self.ground_reference())
    }

    fn diagonal_with(&self, ground: Option<&[f64]>) -> Result<Vec<f64>> {
        let layout = self.spec.layout();
        let kin_axes = kinetic_axes(&self.spec)?;
        let x_axes = self.spec.position_axes();
        Ok(scatter(
            &layout.dims,
            &[(&self.kinetic, &kin_axes), (&self.potential, &x_axes)],
            ground,
            &x_axes,
        ))
    }

    /// Dense `L = L_cl + L_el` from the exact force values.
    pub fn liouvillian_dense(&self) -> Result<CMat> {
        self.liouvillian.dense_reference(&self.spec)
    }
}

fn gather(digits: &[usize], dims: &[usize], axes: &[usize]) -> usize {
    axes.iter().fold(0, |acc, &a| acc * dims[a] + digits[a])
}

fn scatter(
    dims: &[usize],
    parts: &[(&[f64], &[usize])],
    ground: Option<&[f64]>,
    x_axes: &[usize],
) -> Vec<f64> {
    let total: usize = dims.iter().product();
    (0..total)
        .map(|i| {
            let digits = linalg::unravel(i, dims);
            let mut v: f64 = parts
                .iter()
                .map(|(vals, axes)| vals[gather(&digits, dims, axes)])
                .sum();
            if let Some(g) = ground {
                v += g[gather(&digits, dims, x_axes)];
            }
            v
        })
        .collect()
}

impl PreparedPair {
    /// Registers of the state after the bath copy is appended.
    fn test_dims(&self) -> Vec<usize> {
        let mut dims = self.layout.dims.clone();
        if let Ok(sa) = self.layout.axis(Variable::S) {
            dims.push(self.layout.dims[sa]);
        }
        dims
    }

    fn nvt(&self) -> bool {
        self.layout.axis(Variable::S).is_ok()
    }

    /// Kinetic registers inside [`Self::test_dims`], reading the bath copy.
    fn test_kinetic_axes(&self) -> Result<Vec<usize>> {
        let mut axes = kinetic_axes(&self.a.spec)?;
        if self.nvt() {
            axes.pop();
            axes.push(self.layout.dims.len());
        }
        Ok(axes)
    }

    /// `ΔH` values over the full phase-space layout as encoded.
    pub fn delta_diagonal(&self) -> Result<Vec<f64>> {
        let ha = self.a.hamiltonian_diagonal()?;
        let hb = self.b.hamiltonian_diagonal()?;
        Ok(hb.iter().zip(&ha).map(|(b, a)| b - a).collect())
    }

    /// `ΔH` values over the full phase-space layout with exact ground-state energies.
    pub fn delta_reference(&self) -> Result<Vec<f64>> {
        let ha = self.a.hamiltonian_reference()?;
        let hb = self.b.hamiltonian_reference()?;
        Ok(hb.iter().zip(&ha).map(|(b, a)| b - a).collect())
    }

    /// Dense `L_Λ` from the exact force values.
    pub fn interpolated_dense(&self, lambda: f64) -> Result<CMat> {
        Ok(self.a.liouvillian_dense()? * c(1.0 - lambda) + self.b.liouvillian_dense()? * c(lambda))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "Λ must lie in [0, 1], got {lambda}"
        )));
    }
    Ok(())
}

/// `L_Λ = (1−Λ)L_A + ΛL_B` with `α_Λ = (1−Λ)α_A + Λα_B`.
///
/// Both end points keep their branch in the state preparation, so every Λ
/// yields an encoding with the same ancilla structure.
pub fn interpolated_liouvillian(pair: &PreparedPair, lambda: f64) -> Result<BlockEncoding> {
    check_lambda(lambda)?;
    let la = &pair.a.liouvillian.be;
    let lb = &pair.b.liouvillian.be;
    if la.target_dim != lb.target_dim {
        return Err(Error::Dimension(format!(
            "Liouvillians act on {} and {} states",
            la.target_dim, lb.target_dim
        )));
    }
    let weights = [(1.0 - lambda) * la.alpha, lambda * lb.alpha];
    let prep = bea::make_state_prep(&weights, 0.0)?;
    bea::lcu_combine(&prep, &[la.normalized(), lb.normalized()])
}

/// `(1/√N_Λ) Σ_Λ |Λ⟩|ρ_Λ⟩` with the Λ register most significant.
#[derive(Clone, Debug)]
pub struct SuperposedState {
    pub lambdas: Vec<f64>,
    pub amplitudes: CVec,
    pub layout: Layout,
}

impl SuperposedState {
    /// Every block equal to `ρ₀`.
    pub fn uniform(rho0: &KvNState, lambdas: &[f64]) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one Λ point is required".into(),
            ));
        }
        for &l in lambdas {
            check_lambda(l)?;
        }
        let n = rho0.amplitudes.len();
        let k = lambdas.len();
        let w = c(1.0 / (k as f64).sqrt());
        let mut amplitudes = CVec::zeros(k * n);
        for j in 0..k {
            amplitudes
                .rows_mut(j * n, n)
                .copy_from(&(&rho0.amplitudes * w));
        }
        Ok(SuperposedState {
            lambdas: lambdas.to_vec(),
            amplitudes,
            layout: rho0.layout.clone(),
        })
    }

    pub fn block_dim(&self) -> usize {
        self.layout.total()
    }

    /// Block `j` rescaled by `√N_Λ`, so it equals `ρ_Λ` without the uniform weight.
    pub fn block(&self, j: usize) -> CVec {
        let n = self.block_dim();
        self.amplitudes.rows(j * n, n).into_owned() * c((self.lambdas.len() as f64).sqrt())
    }

    /// `⟨O⟩_Λ` of a diagonal observable on each normalized block.
    pub fn expectations(&self, values: &[f64]) -> Vec<f64> {
        (0..self.lambdas.len())
            .map(|j| {
                let b = self.block(j);
                let w = b.norm_squared();
                let s: f64 = b.iter().zip(values).map(|(a, v)| a.norm_sqr() * v).sum();
                if w > 0.0 {
                    s / w
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Cost and success data of a superposed evolution.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperposedEvolution {
    pub segments: usize,
    /// Common degree (QSVT) or Fourier half-width (angle-free) of every segment.
    pub degree: usize,
    pub queries: usize,
    pub success_probability: f64,
}

fn segment_width(engine: Engine, alpha: f64, t: f64, eps: f64) -> Result<usize> {
    match engine {
        Engine::Qsvt => qsvt::ham_sim_degree(alpha, t, eps),
        Engine::Angleless => qsvt::ham_sim_half_width(alpha, t, eps),
    }
}

/// Evolve every block for time `t` under its own `L_Λ` within `eps`.
///
/// Faithful mode builds one simulation circuit per Λ with a common segment
/// count and a common polynomial degree (or half-width), and applies them as a
/// single Λ-controlled block-diagonal operator, projecting the ancillas onto
/// `|0⟩` after every segment.
pub fn equilibrate(
    pair: &PreparedPair,
    state: &SuperposedState,
    t: f64,
    eps: f64,
    engine: Engine,
    mode: Mode,
) -> Result<(SuperposedState, SuperposedEvolution)> {
    if state.layout != pair.layout {
        return Err(Error::Dimension(
            "state layout differs from the pair layout".into(),
        ));
    }
    if t == 0.0 {
        let stats = SuperposedEvolution {
            segments: 0,
            degree: 0,
            queries: 0,
            success_probability: 1.0,
        };
        return Ok((state.clone(), stats));
    }
    let bes: Vec<BlockEncoding> = state
        .lambdas
        .iter()
        .map(|&l| interpolated_liouvillian(pair, l))
        .collect::<Result<_>>()?;
    for (j, be) in bes.iter().enumerate() {
        qsvt::check_sim_hypothesis(be, t, eps).map_err(|e| e.at_stage(&format!("lambda[{j}]")))?;
    }
    let mut m = 1;
    for (j, be) in bes.iter().enumerate() {
        let (mj, _) = liouvillian::segment_plan(engine, be.alpha, t, eps)
            .map_err(|e| e.at_stage(&format!("lambda[{j}]")))?;
        m = m.max(mj);
    }
    let dt = t / m as f64;
    let de = eps / m as f64;
    let mut degree = 0;
    for be in &bes {
        degree = degree.max(segment_width(engine, be.alpha, dt, de)?);
    }
    let n = state.block_dim();
    let k = state.lambdas.len();
    let before = state.amplitudes.norm_squared();
    let (psi, queries) = match mode {
        Mode::Semantic => {
            let mut psi = CVec::zeros(k * n);
            for (j, be) in bes.iter().enumerate() {
                let block = be.block();
                let herm = (&block + block.adjoint()) * c(0.5);
                let u = linalg::expm_hermitian(&herm, t);
                let out = u * state.amplitudes.rows(j * n, n);
                psi.rows_mut(j * n, n).copy_from(&out);
            }
            let q = match engine {
                Engine::Qsvt => m * 3 * degree * bes[0].queries,
                Engine::Angleless => m * 6 * (4 * degree - 1) * bes[0].queries,
            };
            (psi, q)
        }
        Mode::Faithful => {
            let segs: Vec<BlockEncoding> = bes
                .iter()
                .enumerate()
                .map(|(j, be)| {
                    match engine {
                        Engine::Qsvt => qsvt::ham_sim_padded(be, dt, de, Mode::Faithful, degree),
                        Engine::Angleless => {
                            qsvt::angleless_ham_sim_padded(be, dt, de, Mode::Faithful, degree)
                        }
                    }
                    .map_err(|e| e.at_stage(&format!("lambda[{j}]")))
                })
                .collect::<Result<_>>()?;
            let anc = segs[0].ancilla_dim;
            if segs.iter().any(|s| s.ancilla_dim != anc) {
                return Err(Error::Dimension(
                    "Λ blocks disagree on the ancilla register".into(),
                ));
            }
            let op: OpRef = BlockDiag::arc(segs.iter().map(|s| s.op.clone()).collect());
            let mut psi = state.amplitudes.clone();
            for _ in 0..m {
                let mut full = CMat::zeros(k * anc * n, 1);
                for j in 0..k {
                    full.view_mut((j * anc * n, 0), (n, 1))
                        .copy_from(&psi.rows(j * n, n));
                }
                let out = op.apply(&full);
                for j in 0..k {
                    psi.rows_mut(j * n, n)
                        .copy_from(&out.view((j * anc * n, 0), (n, 1)));
                }
            }
            (psi, m * segs[0].queries)
        }
    };
    let after = psi.norm_squared();
    let out = SuperposedState {
        lambdas: state.lambdas.clone(),
        amplitudes: psi,
        layout: state.layout.clone(),
    };
    let stats = SuperposedEvolution {
        segments: m,
        degree,
        queries,
        success_probability: if before > 0.0 { after / before } else { 0.0 },
    };
    Ok((out, stats))
}

/// Uniform superposition over the configured Λ grid evolved for `t_eq` within `eps_l`.
pub fn superposed_equilibrate(
    pair: &PreparedPair,
    cfg: &ThermoConfig,
    rho0: &KvNState,
    eps_l: f64,
) -> Result<(SuperposedState, SuperposedEvolution)> {
    cfg.validate()?;
    let start = SuperposedState::uniform(rho0, &cfg.lambdas())?;
    equilibrate(pair, &start, cfg.t_eq, eps_l, cfg.engine, cfg.mode)
}

/// Amplitudes over `dims` with register `axis` copied into a new last register.
pub fn duplicate_register(
    amplitudes: &CVec,
    dims: &[usize],
    axis: usize,
) -> Result<(CVec, Vec<usize>)> {
    let total: usize = dims.iter().product();
    if amplitudes.len() != total || axis >= dims.len() {
        return Err(Error::Dimension(format!(
            "register {axis} of {dims:?} for a state of length {}",
            amplitudes.len()
        )));
    }
    let g = dims[axis];
    let stride: usize = dims[axis + 1..].iter().product();
    let mut out = CVec::zeros(total * g);
    for (i, a) in amplitudes.iter().enumerate() {
        let digit = (i / stride) % g;
        out[i * g + digit] = *a;
    }
    let mut new_dims = dims.to_vec();
    new_dims.push(g);
    Ok((out, new_dims))
}

/// Superposed state after the thermostat register has been copied.
#[derive(Clone, Debug)]
pub struct DuplicatedState {
    pub amplitudes: CVec,
    /// `[N_Λ, phase-space registers…, copy]`; no copy register in NVE mode.
    pub dims: Vec<usize>,
    pub warning: Option<String>,
}

/// Copy `|s̄⟩|0⟩ → |s̄⟩|s̄⟩` into a fresh register appended after the phase space.
pub fn duplicate_bath(state: &SuperposedState) -> Result<DuplicatedState> {
    let mut dims = vec![state.lambdas.len()];
    dims.extend_from_slice(&state.layout.dims);
    match state.layout.axis(Variable::S) {
        Ok(sa) => {
            let (amplitudes, dims) = duplicate_register(&state.amplitudes, &dims, sa + 1)?;
            Ok(DuplicatedState {
                amplitudes,
                dims,
                warning: None,
            })
        }
        Err(_) => Ok(DuplicatedState {
            amplitudes: state.amplitudes.clone(),
            dims,
            warning: Some("NVE ensemble has no thermostat register; bath copy skipped".into()),
        }),
    }
}

fn nonzero(values: &[f64]) -> bool {
    values.iter().any(|v| *v != 0.0)
}

/// Encoded `H_nuc` terms of one system on `dims`, reading the given registers.
fn hamiltonian_terms(
    sys: &PreparedSystem,
    dims: &[usize],
    kin_axes: &[usize],
    x_axes: &[usize],
    skip: [bool; 3],
) -> Result<Vec<BlockEncoding>> {
    let mut terms = Vec::new();
    if !skip[0] && nonzero(&sys.kinetic) {
        terms.push(phasespace::diagonal_encoding(&sys.kinetic)?.embed(dims, kin_axes)?);
    }
    if !skip[1] && nonzero(&sys.potential) {
        terms.push(phasespace::diagonal_encoding(&sys.potential)?.embed(dims, x_axes)?);
    }
    if let Some(g) = &sys.ground {
        if !skip[2] {
            terms.push(g.be.embed(dims, x_axes)?);
        }
    }
    Ok(terms)
}

/// `H_nuc = H_kin + H_pot + H_gse` of one system as a three-branch LCU on
/// the phase-space layout, with `α_H = α_kin + α_pot + λ`.
pub fn nuclear_hamiltonian(sys: &PreparedSystem) -> Result<BlockEncoding> {
    let dims = sys.spec.layout().dims;
    let terms = hamiltonian_terms(
        sys,
        &dims,
        &kinetic_axes(&sys.spec)?,
        &sys.spec.position_axes(),
        [false; 3],
    )?;
    if terms.is_empty() {
        return Ok(liouvillian::zero_encoding(dims.iter().product()));
    }
    bea::lcu_weighted(&vec![c(1.0); terms.len()], &terms)
}

fn same(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x == y)
}

fn delta_on(
    pair: &PreparedPair,
    dims: &[usize],
    kin_axes: &[usize],
    cancel: bool,
) -> Result<BlockEncoding> {
    let x_axes = pair.a.spec.position_axes();
    let skip = if cancel {
        let ground_same = match (pair.a.ground_values(), pair.b.ground_values()) {
            (Some(a), Some(b)) => same(a, b) && pair.a.ground.as_ref().unwrap().be.epsilon == 0.0,
            (None, None) => true,
            _ => false,
        };
        [
            same(&pair.a.kinetic, &pair.b.kinetic),
            same(&pair.a.potential, &pair.b.potential),
            ground_same,
        ]
    } else {
        [false; 3]
    };
    let ta = hamiltonian_terms(&pair.a, dims, kin_axes, &x_axes, skip)?;
    let tb = hamiltonian_terms(&pair.b, dims, kin_axes, &x_axes, skip)?;
    let mut coeffs = vec![c(-1.0); ta.len()];
    coeffs.extend(vec![c(1.0); tb.len()]);
    let terms: Vec<BlockEncoding> = ta.into_iter().chain(tb).collect();
    if terms.is_empty() {
        return Ok(liouvillian::zero_encoding(dims.iter().product()));
    }
    bea::lcu_weighted(&coeffs, &terms)
}

/// `ΔH = H_B − H_A` on the phase-space layout with `α_Δ = α_{H_A} + α_{H_B}`.
pub fn delta_hamiltonian(pair: &PreparedPair, cancel_shared_terms: bool) -> Result<BlockEncoding> {
    delta_on(
        pair,
        &pair.layout.dims,
        &kinetic_axes(&pair.a.spec)?,
        cancel_shared_terms,
    )
}

/// `ΔH` on the phase space extended by the bath copy, with the kinetic term
/// reading the copied register.
pub fn delta_hamiltonian_on_copy(
    pair: &PreparedPair,
    cancel_shared_terms: bool,
) -> Result<BlockEncoding> {
    delta_on(
        pair,
        &pair.test_dims(),
        &pair.test_kinetic_axes()?,
        cancel_shared_terms,
    )
}

/// Result of a Hadamard test on a Λ-controlled state.
#[derive(Clone, Debug, PartialEq)]
pub struct HadamardOutcome {
    /// Exact `P(0) = ½(1 + Re⟨Φ|U_Δ|Φ⟩)` on the normalized state.
    pub p: f64,
    /// `Im⟨Φ|U_Δ|Φ⟩`, zero for a Hermitian encoded block.
    pub imaginary: f64,
    /// `Σ_Λ Pr(Λ)·P_Λ`: the same probability with the Λ register measured first.
    pub p_measured: f64,
    /// Per-Λ `Re⟨ρ_Λ|U_Δ|ρ_Λ⟩` on the normalized blocks.
    pub block_values: Vec<f64>,
}

/// Hadamard test of `I_Λ ⊗ U_Δ` on `amplitudes` over `[control, target…]`.
pub fn hadamard_test(
    amplitudes: &CVec,
    controls: usize,
    delta: &BlockEncoding,
) -> Result<HadamardOutcome> {
    let n = delta.target_dim;
    if controls == 0 || amplitudes.len() != controls * n {
        return Err(Error::Dimension(format!(
            "state of length {} for {controls} control values and a {n}-dimensional encoding",
            amplitudes.len()
        )));
    }
    let total = amplitudes.norm_squared();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument(
            "Hadamard test on a zero state".into(),
        ));
    }
    let anc = delta.ancilla_dim;
    let op = Local::arc(&[controls, anc * n], &[1], delta.op.clone());
    let mut input = CMat::zeros(controls * anc * n, 1);
    for j in 0..controls {
        input
            .view_mut((j * anc * n, 0), (n, 1))
            .copy_from(&amplitudes.rows(j * n, n));
    }
    let output = op.apply(&input);
    let mut overlap = C64::new(0.0, 0.0);
    let mut p_measured = 0.0;
    let mut block_values = Vec::with_capacity(controls);
    for j in 0..controls {
        let psi = amplitudes.rows(j * n, n);
        let phi = output.view((j * anc * n, 0), (n, 1));
        let ov = psi.dotc(&phi.column(0));
        overlap += ov;
        let w = psi.norm_squared();
        let v = if w > 0.0 { ov.re / w } else { 0.0 };
        block_values.push(v);
        p_measured += (w / total) * 0.5 * (1.0 + v);
    }
    let overlap = overlap / total;
    Ok(HadamardOutcome {
        p: 0.5 * (1.0 + overlap.re),
        imaginary: overlap.im,
        p_measured,
        block_values,
    })
}

/// Bernoulli estimate of `p` from `shots` samples.
pub fn sample_probability<R: Rng>(p: f64, shots: usize, rng: &mut R) -> Result<f64> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shot count must be positive".into()));
    }
    let p = p.clamp(0.0, 1.0);
    let hits = (0..shots).filter(|_| rng.random_bool(p)).count();
    Ok(hits as f64 / shots as f64)
}

/// Phase-estimation register size for precision `precision` on the probability.
pub fn required_qae_ancillas(precision: f64) -> usize {
    ((PI / precision).log2().ceil().max(0.0) as usize) + 2
}

/// Median repetitions for failure probability `xi`.
pub fn median_repetitions(xi: f64) -> usize {
    ((1.0 / xi).ln() / (2.0 * QAE_MARGIN * QAE_MARGIN))
        .ceil()
        .max(1.0) as usize
}

fn fejer(m: usize, delta: f64) -> f64 {
    let mf = m as f64;
    let s = (PI * delta).sin();
    if s.abs() < 1e-15 {
        return 1.0;
    }
    let num = (mf * PI * delta).sin();
    (num * num) / (mf * mf * s * s)
}

/// Exact outcome distribution of `m`-ancilla phase estimation on the Grover
/// iterate of an amplitude-`√p` state preparation.
///
/// The iterate acts on the plane spanned by the good and bad components as a
/// rotation by `2θ`, `sin²θ = p`; its eigenphases `±θ/π` carry weight ½ each,
/// and phase estimation turns each into a Fejér kernel over the `2^m` outcomes.
pub fn qae_distribution(p: f64, m: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    if m == 0 || m > MAX_QAE_ANCILLAS {
        return Err(Error::InvalidArgument(format!(
            "phase-estimation register of {m} qubits outside 1..={MAX_QAE_ANCILLAS}"
        )));
    }
    let size = 1usize << m;
    let theta = p.sqrt().asin();
    let r = linalg::CMat::from_row_slice(
        2,
        2,
        &[
            c((2.0 * theta).cos()),
            c(-(2.0 * theta).sin()),
            c((2.0 * theta).sin()),
            c((2.0 * theta).cos()),
        ],
    );
    let start = CVec::from_vec(vec![c(p.sqrt()), c((1.0 - p).sqrt())]);
    let plus = CVec::from_vec(vec![
        c(1.0 / 2f64.sqrt()),
        C64::new(0.0, -1.0 / 2f64.sqrt()),
    ]);
    let minus = CVec::from_vec(vec![c(1.0 / 2f64.sqrt()), C64::new(0.0, 1.0 / 2f64.sqrt())]);
    let eig_plus = (r.clone() * &plus).dotc(&plus).conj().arg() / (2.0 * PI);
    let eig_minus = (r * &minus).dotc(&minus).conj().arg() / (2.0 * PI);
    let w_plus = plus.dotc(&start).norm_sqr();
    let w_minus = minus.dotc(&start).norm_sqr();
    let mut out = Vec::with_capacity(size);
    for y in 0..size {
        let f = y as f64 / size as f64;
        out.push(w_plus * fejer(size, eig_plus - f) + w_minus * fejer(size, eig_minus - f));
    }
    let s: f64 = out.iter().sum();
    for v in &mut out {
        *v /= s;
    }
    Ok(out)
}

/// Amplitude-estimation readout.
#[derive(Clone, Debug, PartialEq)]
pub struct QaeOutcome {
    pub estimate: f64,
    pub ancillas: usize,
    pub repetitions: usize,
    /// Calls to the test circuit or its inverse over all repetitions.
    pub accesses: usize,
    pub samples: Vec<f64>,
}

/// Median of `r` phase-estimation readouts of `p` at precision `precision`.
pub fn amplitude_estimate<R: Rng>(
    p: f64,
    precision: f64,
    xi: f64,
    ancillas: Option<usize>,
    rng: &mut R,
) -> Result<QaeOutcome> {
    if !(precision > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "precision must be positive, got {precision}"
        )));
    }
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "xi must lie in (0, 1), got {xi}"
        )));
    }
    let required = required_qae_ancillas(precision);
    let m = ancillas.unwrap_or(required);
    if m < required {
        return Err(Error::InvalidArgument(format!(
            "{m} phase-estimation qubits cannot reach precision {precision:.3e}; at least {required} are required"
        )));
    }
    let dist = qae_distribution(p, m)?;
    let mut cumulative = Vec::with_capacity(dist.len());
    let mut acc = 0.0;
    for v in &dist {
        acc += v;
        cumulative.push(acc);
    }
    let size = dist.len();
    let r = median_repetitions(xi);
    let mut samples: Vec<f64> = (0..r)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let y = cumulative.partition_point(|&cdf| cdf < u).min(size - 1);
            (PI * y as f64 / size as f64).sin().powi(2)
        })
        .collect();
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let estimate = sorted[r / 2];
    samples.shrink_to_fit();
    Ok(QaeOutcome {
        estimate,
        ancillas: m,
        repetitions: r,
        accesses: r * (size - 1) * 2,
        samples,
    })
}

/// Error terms of a free-energy estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct Ledger {
    pub eps_l: f64,
    /// `2α_Δ√(2ε_L)`.
    pub evolution: f64,
    pub eps_delta: f64,
    pub eps_disc: f64,
    pub eps_qae: f64,
}

impl Ledger {
    pub fn total(&self) -> f64 {
        self.evolution + self.eps_delta + self.eps_disc + self.eps_qae
    }

    /// Bound on `|ΔF̂ − ΔF̃|` at fixed Λ grid.
    pub fn estimation_total(&self) -> f64 {
        self.evolution + self.eps_delta + self.eps_qae
    }
}

/// Per-Λ record of the equilibrated state.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaRecord {
    pub lambda: f64,
    /// `⟨H_B − H_A⟩` on the normalized block.
    pub expectation: f64,
    /// `|⟨ρ_dense|ρ̂⟩|²` against a dense evolution of the same block.
    pub block_fidelity: Option<f64>,
    /// `‖ρ̂ − ρ_dense‖` for the projected (unnormalized) block.
    pub block_error: Option<f64>,
}

/// Consistency checks and costs of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    /// `|ΔF̃(t_eq) − ΔF̃(0.9·t_eq)|` from the block expectations.
    pub drift: f64,
    /// `‖L_B − L_A‖·‖H_B − H_A‖·t_eq/N_Λ` with dense norms, when computed.
    pub discretization_bound: Option<f64>,
    pub imaginary_part: f64,
    /// `|P_traced − P_measured|` for the Λ register.
    pub trace_vs_measure: f64,
    pub p_exact: f64,
    pub alpha_delta: f64,
    pub alpha_l: f64,
    pub segments: usize,
    pub degree: usize,
    pub queries: usize,
    pub success_probability: f64,
    pub qae_ancillas: usize,
    pub qae_repetitions: usize,
    pub qae_accesses: usize,
    pub warnings: Vec<String>,
}

/// Output of [`free_energy_difference`].
#[derive(Clone, Debug, PartialEq)]
pub struct ThermoResult {
    pub delta_f: f64,
    pub p_hat: f64,
    pub n_lambda: usize,
    pub t_eq: f64,
    pub ledger: Ledger,
    pub per_lambda: Vec<LambdaRecord>,
    pub diagnostics: Diagnostics,
}

/// Ground-state precision meeting the `ε_Δ` share of the budget with a
/// kickback error `2λ√(2ε_prep)` per system.
pub fn ground_state_precision(eps_delta: f64, lambda: f64) -> f64 {
    let r = eps_delta / (4.0 * lambda.max(1e-300));
    (r * r / 2.0).min(0.5)
}

/// Ground-state settings whose preparation error fits the ΔH share of `eps`.
pub fn ground_state_settings(pair: &AlchemicalPair, eps: f64, seed: u64) -> GroundStateSettings {
    let lambda = [&pair.a, &pair.b]
        .iter()
        .filter_map(|s| {
            s.electronic
                .as_ref()
                .map(|e| e.lambda(&s.phase_space.charges))
        })
        .fold(0.0, f64::max);
    GroundStateSettings {
        eps_prep: ground_state_precision(eps / 6.0, lambda),
        seed,
        ..GroundStateSettings::default()
    }
}

/// Spectral norm of a real diagonal.
fn diag_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `‖L_B − L_A‖·‖H_B − H_A‖·t/N` from dense operators.
pub fn discretization_bound(pair: &PreparedPair, t_eq: f64, n_lambda: usize) -> Result<f64> {
    let dl = pair.b.liouvillian_dense()? - pair.a.liouvillian_dense()?;
    let dh = pair.delta_reference()?;
    Ok(linalg::spectral_norm(&dl) * diag_norm(&dh) * t_eq / n_lambda as f64)
}

/// Full alchemical free-energy pipeline.
pub fn free_energy_difference(
    pair: &AlchemicalPair,
    cfg: &ThermoConfig,
    rho0: &KvNState,
) -> Result<ThermoResult> {
    cfg.validate()?;
    pair.validate()?;
    if rho0.layout != pair.layout() {
        return Err(Error::Dimension(
            "initial state layout differs from the pair layout".into(),
        ));
    }
    let settings = ground_state_settings(pair, cfg.eps, cfg.seed);
    let prepared = pair.prepare(&settings)?;
    run_prepared(&prepared, cfg, rho0)
}

/// Pipeline on an already prepared pair.
pub fn run_prepared(
    pair: &PreparedPair,
    cfg: &ThermoConfig,
    rho0: &KvNState,
) -> Result<ThermoResult> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let delta = delta_hamiltonian_on_copy(pair, cfg.cancel_shared_terms)
        .map_err(|e| e.at_stage("delta_hamiltonian"))?;
    let alpha_delta = delta.alpha;
    let budget = Budget::split(cfg.eps, alpha_delta);
    if delta.epsilon > budget.eps_delta * (1.0 + 1e-9) {
        warnings.push(format!(
            "ΔH encoding error {:.3e} exceeds its budget {:.3e}",
            delta.epsilon, budget.eps_delta
        ));
    }
    let lambdas = cfg.lambdas();
    let start = SuperposedState::uniform(rho0, &lambdas)?;
    let t_early = 0.9 * cfg.t_eq;
    let (early, s1) = equilibrate(
        pair,
        &start,
        t_early,
        0.9 * budget.eps_l,
        cfg.engine,
        cfg.mode,
    )
    .map_err(|e| e.at_stage("equilibrate"))?;
    let (state, s2) = equilibrate(
        pair,
        &early,
        cfg.t_eq - t_early,
        0.1 * budget.eps_l,
        cfg.engine,
        cfg.mode,
    )
    .map_err(|e| e.at_stage("equilibrate"))?;

    let dh = pair.delta_diagonal()?;
    let late_values = state.expectations(&dh);
    let early_values = early.expectations(&dh);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let drift = (mean(&late_values) - mean(&early_values)).abs();

    let mut per_lambda = Vec::with_capacity(lambdas.len());
    let reference_ok =
        cfg.reference && linalg::check_dim(pair.layout.total(), "dense reference").is_ok();
    for (j, &lambda) in lambdas.iter().enumerate() {
        let (fid, err) = if reference_ok {
            let l = pair.interpolated_dense(lambda)?;
            let dense = linalg::expm_hermitian(&l, cfg.t_eq) * &rho0.amplitudes;
            let block = state.block(j);
            let f = dense.dotc(&block).norm_sqr() / block.norm_squared().max(1e-300);
            (Some(f), Some((&block - &dense).norm()))
        } else {
            (None, None)
        };
        per_lambda.push(LambdaRecord {
            lambda,
            expectation: late_values[j],
            block_fidelity: fid,
            block_error: err,
        });
    }

    let dup = duplicate_bath(&state).map_err(|e| e.at_stage("duplicate_bath"))?;
    if let Some(w) = &dup.warning {
        warnings.push(w.clone());
    }
    let test = hadamard_test(&dup.amplitudes, lambdas.len(), &delta)
        .map_err(|e| e.at_stage("hadamard_test"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (p_hat, eps_qae, qae) = match cfg.estimation {
        Estimation::Ideal => (test.p, 0.0, None),
        Estimation::Sampled { shots } => {
            let p = sample_probability(test.p, shots, &mut rng)?;
            let half_width = ((2.0 / cfg.xi).ln() / (2.0 * shots as f64)).sqrt();
            (p, 2.0 * alpha_delta * half_width, None)
        }
        Estimation::Qae => {
            let precision = budget.eps_qae / (2.0 * alpha_delta);
            let q = amplitude_estimate(test.p, precision, cfg.xi, cfg.qae_ancillas, &mut rng)
                .map_err(|e| e.at_stage("amplitude_estimate"))?;
            (q.estimate, budget.eps_qae, Some(q))
        }
    };

    let discretization = if reference_ok {
        Some(discretization_bound(pair, cfg.t_eq, cfg.n_lambda)?)
    } else {
        None
    };
    if let Some(b) = discretization {
        if b > budget.eps_disc {
            warnings.push(format!(
                "Riemann bound {b:.3e} exceeds the discretization budget {:.3e}; increase n_lambda",
                budget.eps_disc
            ));
        }
    }
    if drift > cfg.eps / 10.0 {
        warnings.push(format!("equilibration drift {drift:.3e} exceeds eps/10"));
    }

    let alpha_l = pair.a.liouvillian.be.alpha.max(pair.b.liouvillian.be.alpha);
    let ledger = Ledger {
        eps_l: budget.eps_l,
        evolution: budget.evolution_term(alpha_delta),
        eps_delta: delta.epsilon,
        eps_disc: budget.eps_disc,
        eps_qae,
    };
    Ok(ThermoResult {
        delta_f: alpha_delta * (2.0 * p_hat - 1.0),
        p_hat,
        n_lambda: cfg.n_lambda,
        t_eq: cfg.t_eq,
        ledger,
        per_lambda,
        diagnostics: Diagnostics {
            drift,
            discretization_bound: discretization,
            imaginary_part: test.imaginary,
            trace_vs_measure: (test.p - test.p_measured).abs(),
            p_exact: test.p,
            alpha_delta,
            alpha_l,
            segments: s1.segments + s2.segments,
            degree: s1.degree.max(s2.degree),
            queries: s1.queries + s2.queries,
            success_probability: s1.success_probability * s2.success_probability,
            qae_ancillas: qae.as_ref().map_or(0, |q| q.ancillas),
            qae_repetitions: qae.as_ref().map_or(0, |q| q.repetitions),
            qae_accesses: qae.as_ref().map_or(0, |q| q.accesses),
            warnings,
        },
    })
}

/// Amplitudes `√(e^{−H_N/T}/Z)` of the extended Hamiltonian of the system
/// interpolated at `Λ`, which the continuous Liouville flow leaves invariant.
///
/// The position marginal is the Boltzmann distribution of
/// `(1−Λ)(V_A + E₀,A) + Λ(V_B + E₀,B)`.
pub fn canonical_state(pair: &PreparedPair, lambda: f64) -> Result<KvNState> {
    check_lambda(lambda)?;
    let spec = &pair.a.spec;
    let bath = &spec.bath;
    let ha = pair.a.hamiltonian_reference()?;
    let hb = pair.b.hamiltonian_reference()?;
    let layout = spec.layout();
    let energies: Vec<f64> = (0..layout.total())
        .map(|i| {
            let pt = spec.point(&linalg::unravel(i, &layout.dims));
            let mut e = (1.0 - lambda) * ha[i] + lambda * hb[i];
            if spec.ensemble == Ensemble::Nvt {
                e += pt.ps * pt.ps / (2.0 * bath.q)
                    + bath.n_f * bath.temperature * (pt.s + bath.s_min).ln();
            }
            e
        })
        .collect();
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let amps = CVec::from_iterator(
        energies.len(),
        energies
            .iter()
            .map(|e| c((-(e - e_min) / (2.0 * bath.temperature)).exp())),
    );
    let norm = amps.norm();
    KvNState::new(amps / c(norm), layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bea::verify_contract;
    use crate::electronic::ElectronicMode;
    use crate::linalg::{diag_real, spectral_norm};
    use crate::oracle;
    use crate::phasespace::{GaussianAxis, GridSpec};

    fn nve_spec(charge: f64) -> PhaseSpaceSpec {
        PhaseSpaceSpec::nve(
            1,
            GridSpec::centered(4, 0.5, 1),
            GridSpec::centered(4, 0.5, 1),
            vec![1.0],
            vec![charge],
            1.5,
        )
        .with_fixed_charge(-1.0, vec![0.1])
    }

    fn nvt_spec(charge: f64) -> PhaseSpaceSpec {
        let mut s = nve_spec(charge);
        s.ensemble = Ensemble::Nvt;
        s.s = Some(GridSpec::centered(3, 0.2, 1));
        s.ps = Some(GridSpec::centered(3, 0.5, 1));
        s
    }

    fn espec() -> ElectronicSpec {
        let mut e = ElectronicSpec::new(1, 3, 1.0).with_fixed_charge(-0.5, vec![0.0]);
        e.mode = ElectronicMode::Exact;
        e
    }

    fn pair(nvt: bool, electrons: bool) -> AlchemicalPair {
        let f = if nvt { nvt_spec } else { nve_spec };
        let el = electrons.then(espec);
        AlchemicalPair::new(
            System {
                phase_space: f(1.0),
                electronic: el.clone(),
            },
            System {
                phase_space: f(2.0),
                electronic: el,
            },
        )
        .unwrap()
    }

    fn gaussian(spec: &PhaseSpaceSpec) -> KvNState {
        let n = spec.layout().dims.len();
        let axes: Vec<GaussianAxis> = (0..n)
            .map(|k| GaussianAxis {
                center: if k == 0 { 0.2 } else { 0.0 },
                width: 0.6,
            })
            .collect();
        KvNState::gaussian(spec, &axes).unwrap()
    }

    #[test]
    fn interpolation_end_points_and_midpoint() {
        let p = pair(true, true)
            .prepare(&GroundStateSettings::default())
            .unwrap();
        let la = p.a.liouvillian_dense().unwrap();
        let lb = p.b.liouvillian_dense().unwrap();
        for lambda in [0.0, 0.5, 1.0] {
            let be = interpolated_liouvillian(&p, lambda).unwrap();
            let target = &la * c(1.0 - lambda) + &lb * c(lambda);
            assert!(verify_contract(&be, &target).unwrap() < 1e-10);
            let alpha =
                (1.0 - lambda) * p.a.liouvillian.be.alpha + lambda * p.b.liouvillian.be.alpha;
            assert!((be.alpha - alpha).abs() < 1e-12 * alpha);
        }
        let d0 = interpolated_liouvillian(&p, 0.0).unwrap().ancilla_dim;
        let d1 = interpolated_liouvillian(&p, 1.0).unwrap().ancilla_dim;
        assert_eq!(d0, d1);
        assert!(interpolated_liouvillian(&p, 1.5).is_err());
    }

    #[test]
    fn delta_hamiltonian_contract_and_alpha() {
        let p = pair(true, true)
            .prepare(&GroundStateSettings::default())
            .unwrap();
        let dh = delta_hamiltonian(&p, false).unwrap();
        let ha = nuclear_hamiltonian(&p.a).unwrap();
        let hb = nuclear_hamiltonian(&p.b).unwrap();
        assert!((dh.alpha - ha.alpha - hb.alpha).abs() < 1e-12 * dh.alpha);
        let target = diag_real(&p.delta_diagonal().unwrap());
        assert!(verify_contract(&dh, &target).unwrap() < 1e-10);
        assert!(
            verify_contract(&ha, &diag_real(&p.a.hamiltonian_diagonal().unwrap())).unwrap() < 1e-10
        );
        let cancelled = delta_hamiltonian(&p, true).unwrap();
        assert!(cancelled.alpha < dh.alpha);
        assert!(verify_contract(&cancelled, &target).unwrap() < 1e-10);
    }

    #[test]
    fn identical_systems_have_zero_difference() {
        let base = pair(false, true);
        let same = AlchemicalPair::new(base.a.clone(), base.a.clone()).unwrap();
        let p = same.prepare(&GroundStateSettings::default()).unwrap();
        let dh = delta_hamiltonian(&p, false).unwrap();
        let n = p.layout.total();
        assert!(verify_contract(&dh, &CMat::zeros(n, n)).unwrap() < 1e-10);
        let rho = gaussian(&same.a.phase_space);
        let state = SuperposedState::uniform(&rho, &[0.0, 0.5]).unwrap();
        let out = hadamard_test(&state.amplitudes, 2, &dh).unwrap();
        assert!((out.p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ground_only_pair_difference_is_energy_shift() {
        let mut e2 = espec();
        e2.fixed_charges = vec![-1.0];
        let spec = nve_spec(1.0);
        let pr = AlchemicalPair::new(
            System {
                phase_space: spec.clone(),
                electronic: Some(espec()),
            },
            System {
                phase_space: spec.clone(),
                electronic: Some(e2.clone()),
            },
        )
        .unwrap()
        .prepare(&GroundStateSettings::default())
        .unwrap();
        let ea = oracle::ground_energy_map(&espec(), &spec).unwrap();
        let eb = oracle::ground_energy_map(&e2, &spec).unwrap();
        let dh = pr.delta_diagonal().unwrap();
        let layout = spec.layout();
        for (i, v) in dh.iter().enumerate() {
            let x = linalg::unravel(i, &layout.dims)[0];
            assert!((v - (eb[x] - ea[x])).abs() < 1e-9);
        }
    }

    #[test]
    fn superposed_blocks_match_dense_evolutions() {
        let pr = pair(false, true);
        let p = pr.prepare(&GroundStateSettings::default()).unwrap();
        let rho = gaussian(&pr.a.phase_space);
        let lambdas = lambda_grid(4);
        let start = SuperposedState::uniform(&rho, &lambdas).unwrap();
        let t = 0.7;
        let eps = 1e-6;
        for engine in [Engine::Qsvt, Engine::Angleless] {
            let (out, stats) = equilibrate(&p, &start, t, eps, engine, Mode::Faithful).unwrap();
            assert!(stats.degree > 0);
            for (j, &l) in lambdas.iter().enumerate() {
                let dense =
                    oracle::expm_evolve(&p.interpolated_dense(l).unwrap(), &rho.amplitudes, t)
                        .unwrap();
                let err = (out.block(j) - dense).norm();
                assert!(err <= eps, "{engine:?} Λ={l} error {err}");
            }
        }
        let (single, _) = equilibrate(
            &p,
            &SuperposedState::uniform(&rho, &[0.25]).unwrap(),
            t,
            eps,
            Engine::Qsvt,
            Mode::Faithful,
        )
        .unwrap();
        let direct = liouvillian::evolve(
            &interpolated_liouvillian(&p, 0.25).unwrap(),
            &rho,
            t,
            eps,
            Engine::Qsvt,
            Mode::Faithful,
        )
        .unwrap();
        assert!((single.block(0) - direct.state.amplitudes).norm() < 1e-10);
    }

    #[test]
    fn degenerate_pair_gives_identical_blocks() {
        let base = pair(false, false);
        let same = AlchemicalPair::new(base.a.clone(), base.a.clone()).unwrap();
        let p = same.prepare(&GroundStateSettings::default()).unwrap();
        let rho = gaussian(&same.a.phase_space);
        let start = SuperposedState::uniform(&rho, &lambda_grid(4)).unwrap();
        let (out, _) = equilibrate(&p, &start, 0.5, 1e-6, Engine::Qsvt, Mode::Faithful).unwrap();
        for j in 1..4 {
            assert!((out.block(j) - out.block(0)).norm() < 1e-12);
        }
    }

    #[test]
    fn bath_copy_is_an_entangled_copy() {
        let dims = [2usize, 3];
        let amps = CVec::from_iterator(6, (0..6).map(|k| c(k as f64 + 1.0)));
        let amps = &amps / c(amps.norm());
        let (out, nd) = duplicate_register(&amps, &dims, 1).unwrap();
        assert_eq!(nd, vec![2, 3, 3]);
        assert!((out.norm() - 1.0).abs() < 1e-15);
        for i in 0..6 {
            let s = i % 3;
            assert_eq!(out[i * 3 + s], amps[i]);
        }
        let rho_before: Vec<f64> = (0..3)
            .map(|s| (0..2).map(|a| amps[a * 3 + s].norm_sqr()).sum())
            .collect();
        let psi = CMat::from_row_slice(6, 3, out.as_slice());
        let reduced = psi.transpose() * psi.map(|z| z.conj());
        for s in 0..3 {
            assert!((reduced[(s, s)].re - rho_before[s]).abs() < 1e-14);
            for t in 0..3 {
                if s != t {
                    assert!(reduced[(s, t)].norm() < 1e-14);
                }
            }
        }
        let nve = pair(false, false);
        let rho = gaussian(&nve.a.phase_space);
        let st = SuperposedState::uniform(&rho, &[0.0]).unwrap();
        assert!(duplicate_bath(&st).unwrap().warning.is_some());
    }

    #[test]
    fn hadamard_probability_matches_dense_average() {
        let pr = pair(true, true);
        let p = pr.prepare(&GroundStateSettings::default()).unwrap();
        let rho = gaussian(&pr.a.phase_space);
        let start = SuperposedState::uniform(&rho, &lambda_grid(3)).unwrap();
        let (state, _) = equilibrate(&p, &start, 0.3, 1e-6, Engine::Qsvt, Mode::Faithful).unwrap();
        let dup = duplicate_bath(&state).unwrap();
        let delta = delta_hamiltonian_on_copy(&p, false).unwrap();
        let out = hadamard_test(&dup.amplitudes, 3, &delta).unwrap();
        let dh = p.delta_diagonal().unwrap();
        let norm2 = state.amplitudes.norm_squared();
        let expected: f64 = (0..3)
            .map(|j| {
                let b = state.block(j);
                b.iter()
                    .zip(&dh)
                    .map(|(a, v)| a.norm_sqr() * v)
                    .sum::<f64>()
            })
            .sum::<f64>()
            / (3.0 * norm2)
            / delta.alpha;
        assert!((out.p - 0.5 * (1.0 + expected)).abs() < 1e-12);
        assert!(out.imaginary.abs() < 1e-12);
        assert!((out.p - out.p_measured).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&out.p));

        let prep = bea::make_state_prep(&[1.0, 1.0], 0.0).unwrap();
        let n = delta.target_dim;
        let halved =
            bea::lcu_combine(&prep, &[delta.normalized(), liouvillian::zero_encoding(n)]).unwrap();
        let out_half = hadamard_test(&dup.amplitudes, 3, &halved).unwrap();
        assert!(((out_half.p - 0.5) - 0.5 * (out.p - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn qae_grid_values_are_exact() {
        let m = 5;
        let size = 1usize << m;
        let y = 4;
        let p = (PI * y as f64 / size as f64).sin().powi(2);
        let dist = qae_distribution(p, m).unwrap();
        let mass = dist[y] + dist[size - y];
        assert!((mass - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out =
            amplitude_estimate(p, PI / (1u64 << (m - 2)) as f64, 0.05, Some(m), &mut rng).unwrap();
        assert!((out.estimate - p).abs() < 1e-12);
        let half = amplitude_estimate(0.5, 1e-3, 0.05, None, &mut rng).unwrap();
        assert!((half.estimate - 0.5).abs() < 1e-12);
        let p8 = (PI / 8.0).sin().powi(2);
        assert!(
            (amplitude_estimate(p8, 1e-2, 0.05, None, &mut rng)
                .unwrap()
                .estimate
                - p8)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn qae_rejects_small_register() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = amplitude_estimate(0.3, 1e-3, 0.05, Some(4), &mut rng).unwrap_err();
        let required = required_qae_ancillas(1e-3);
        assert!(format!("{err}").contains(&format!("at least {required}")));
        assert_eq!(required, ((PI / 1e-3).log2().ceil() as usize) + 2);
    }

    #[test]
    fn median_boosting_failure_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let precision = 2e-3;
        let mut failures = 0;
        for trial in 0..200 {
            let p = 0.05 + 0.9 * (trial as f64 / 200.0);
            let out = amplitude_estimate(p, precision, 0.05, None, &mut rng).unwrap();
            if (out.estimate - p).abs() > precision {
                failures += 1;
            }
        }
        assert!(failures <= 10, "{failures} failures");
    }

    #[test]
    fn qae_distribution_sums_to_one_and_peaks_near_truth() {
        let p = 0.3;
        let m = 8;
        let dist = qae_distribution(p, m).unwrap();
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let best = (0..dist.len())
            .max_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap())
            .unwrap();
        let est = (PI * best as f64 / dist.len() as f64).sin().powi(2);
        assert!((est - p).abs() < PI / dist.len() as f64 * 2.0);
    }

    #[test]
    fn sampled_estimate_and_shot_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(sample_probability(0.3, 0, &mut rng).is_err());
        let p = sample_probability(0.3, 20000, &mut rng).unwrap();
        assert!((p - 0.3).abs() < 0.02);
        let cfg = ThermoConfig {
            estimation: Estimation::Sampled { shots: 0 },
            ..ThermoConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn budget_split_adds_up() {
        let b = Budget::split(0.05, 7.0);
        assert!((b.eps_delta + b.evolution_term(7.0) - 0.05 / 3.0).abs() < 1e-15);
        assert!(
            (b.eps_disc + b.eps_qae + b.eps_delta + b.evolution_term(7.0) - 0.05).abs() < 1e-15
        );
    }

    #[test]
    fn pipeline_on_identical_and_reversed_pairs() {
        let base = pair(true, true);
        let cfg = ThermoConfig {
            n_lambda: 2,
            t_eq: 0.4,
            eps: 0.05,
            ..ThermoConfig::default()
        };
        let rho = gaussian(&base.a.phase_space);
        let same = AlchemicalPair::new(base.a.clone(), base.a.clone()).unwrap();
        let zero = free_energy_difference(&same, &cfg, &rho).unwrap();
        assert!(zero.delta_f.abs() <= cfg.eps, "{}", zero.delta_f);
        let fwd = free_energy_difference(&base, &cfg, &rho).unwrap();
        let bwd = free_energy_difference(&base.reversed(), &cfg, &rho).unwrap();
        assert!((fwd.delta_f + bwd.delta_f).abs() <= 2.0 * cfg.eps);
        assert!(fwd.ledger.total() <= cfg.eps * (1.0 + 1e-12));
        assert!(fwd.diagnostics.imaginary_part.abs() < 1e-10);
        assert!(fwd.diagnostics.trace_vs_measure < 1e-10);
        let dh = fwd.diagnostics.p_exact;
        let mean: f64 = fwd.per_lambda.iter().map(|r| r.expectation).sum::<f64>() / 2.0;
        assert!((fwd.diagnostics.alpha_delta * (2.0 * dh - 1.0) - mean).abs() < 1e-6);
        for r in &fwd.per_lambda {
            assert!(r.block_error.unwrap() <= fwd.ledger.eps_l);
        }
    }

    #[test]
    fn canonical_state_marginal_is_boltzmann() {
        let pr = pair(true, true);
        let p = pr.prepare(&GroundStateSettings::default()).unwrap();
        let st = canonical_state(&p, 0.5).unwrap();
        let spec = &pr.a.phase_space;
        let va = oracle::microstate_energies(pr.a.electronic.as_ref(), spec).unwrap();
        let vb = oracle::microstate_energies(pr.b.electronic.as_ref(), &pr.b.phase_space).unwrap();
        let gp = spec.p.g;
        let gx = spec.x.g;
        let weights: Vec<f64> = (0..gx)
            .map(|x| {
                (0..gp)
                    .map(|k| (-(0.5 * va[x * gp + k] + 0.5 * vb[x * gp + k])).exp())
                    .sum()
            })
            .collect();
        let z: f64 = weights.iter().sum();
        let marginal = st.marginal(0);
        for x in 0..gx {
            assert!((marginal[x] - weights[x] / z).abs() < 1e-10);
        }
        let dl =
            spectral_norm(&(p.b.liouvillian_dense().unwrap() - p.a.liouvillian_dense().unwrap()));
        assert!(dl > 0.0);
    }
}
