//! Toy plane-wave electronic structure in first quantization.
//!
//! Each electron lives in `B` plane waves `κ_b = 2πb/L` with `b` in the
//! centered cube `G` and `L = Ω^{1/dim}`. The Hamiltonian at nuclear
//! configuration `x` is kinetic `κ²/2` plus the electron-nucleus term
//! `−(4π/Ω) Z e^{iκ_{c−b}·x}/‖κ_{b−c}‖²` and the two-body exchange of momentum
//! `ν` weighted by `2π/(Ω‖κ_ν‖²)`, dropping transfers that leave `G`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bea::{self, BlockEncoding};
use crate::error::{Error, Result};
use crate::groundstate::{
    prepare_ground_state_superposed, GroundStateConfig, GroundStatePreparation, InitialStateOracle,
};
use crate::linalg::{self, c, check_dim, cis, eigh, CMat, CVec, C64, I};
use crate::ops::{Local, Operator};
use crate::phasespace::PhaseSpaceSpec;
use crate::qsvt::Mode;

/// How ground states are obtained for force and energy encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElectronicMode {
    /// Amplified preparation from a block encoding of `H_el^ctrl`.
    Faithful,
    /// Dense eigenvectors.
    Exact,
}

impl std::str::FromStr for ElectronicMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "faithful" => Ok(ElectronicMode::Faithful),
            "exact" => Ok(ElectronicMode::Exact),
            other => Err(Error::Config(format!("unknown electronic mode '{other}'"))),
        }
    }
}

/// Optional user-supplied gap data; computed from dense spectra when absent.
#[derive(Clone, Debug, PartialEq)]
pub struct GapData {
    pub mu: f64,
    pub gamma: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElectronicSpec {
    pub n_electrons: usize,
    pub n_planewaves: usize,
    pub h_el: f64,
    pub spatial_dim: usize,
    /// Static point charges felt by the electrons only.
    pub fixed_charges: Vec<f64>,
    pub fixed_positions: Vec<Vec<f64>>,
    pub mode: ElectronicMode,
    pub gap: Option<GapData>,
}

impl ElectronicSpec {
    pub fn new(n_electrons: usize, n_planewaves: usize, h_el: f64) -> Self {
        ElectronicSpec {
            n_electrons,
            n_planewaves,
            h_el,
            spatial_dim: 1,
            fixed_charges: vec![],
            fixed_positions: vec![],
            mode: ElectronicMode::Exact,
            gap: None,
        }
    }

    pub fn with_fixed_charge(mut self, z: f64, position: Vec<f64>) -> Self {
        self.fixed_charges.push(z);
        self.fixed_positions.push(position);
        self
    }

    /// Plane waves per axis.
    pub fn side(&self) -> usize {
        (self.n_planewaves as f64)
            .powf(1.0 / self.spatial_dim as f64)
            .round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_electrons == 0 {
            return Err(Error::InvalidArgument(
                "at least one electron is required".into(),
            ));
        }
        if self.spatial_dim != 1 && self.spatial_dim != 3 {
            return Err(Error::InvalidArgument(format!(
                "spatial_dim must be 1 or 3, got {}",
                self.spatial_dim
            )));
        }
        let m = self.side();
        if self.n_planewaves < 3
            || m.pow(self.spatial_dim as u32) != self.n_planewaves
            || m % 2 == 0
        {
            return Err(Error::InvalidArgument(format!(
                "plane-wave count {} must be an odd {}-th power of at least 3",
                self.n_planewaves, self.spatial_dim
            )));
        }
        if !(self.h_el > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "h_el must be positive, got {}",
                self.h_el
            )));
        }
        if self.fixed_charges.len() != self.fixed_positions.len()
            || self
                .fixed_positions
                .iter()
                .any(|p| p.len() != self.spatial_dim)
        {
            return Err(Error::InvalidArgument(
                "fixed charges and positions do not match".into(),
            ));
        }
        check_dim(self.dim(), "electronic register")?;
        Ok(())
    }

    /// Cell volume `Ω = B·h_el^dim`.
    pub fn omega(&self) -> f64 {
        self.n_planewaves as f64 * self.h_el.powi(self.spatial_dim as i32)
    }

    /// Cell side `L = Ω^{1/dim}`.
    pub fn cell_length(&self) -> f64 {
        self.side() as f64 * self.h_el
    }

    /// Single-electron basis dimension.
    pub fn one_body_dim(&self) -> usize {
        self.n_planewaves
    }

    /// Full register dimension `B^Ñ`.
    pub fn dim(&self) -> usize {
        self.n_planewaves.pow(self.n_electrons as u32)
    }

    /// Integer wave vectors of `G`, first component most significant.
    pub fn plane_waves(&self) -> Vec<Vec<i64>> {
        let m = self.side();
        let half = (m as i64 - 1) / 2;
        (0..self.n_planewaves)
            .map(|idx| {
                linalg::unravel(idx, &vec![m; self.spatial_dim])
                    .iter()
                    .map(|&k| k as i64 - half)
                    .collect()
            })
            .collect()
    }

    /// Nonzero momentum transfers `G₀` (differences of two elements of `G`).
    pub fn transfers(&self) -> Vec<Vec<i64>> {
        let m = self.side() as i64;
        let span = 2 * m - 1;
        let count = (span as usize).pow(self.spatial_dim as u32);
        (0..count)
            .map(|idx| {
                linalg::unravel(idx, &vec![span as usize; self.spatial_dim])
                    .iter()
                    .map(|&k| k as i64 - (m - 1))
                    .collect::<Vec<i64>>()
            })
            .filter(|v| v.iter().any(|&k| k != 0))
            .collect()
    }

    pub fn kappa(&self, b: &[i64]) -> Vec<f64> {
        let l = self.cell_length();
        b.iter().map(|&k| 2.0 * PI * k as f64 / l).collect()
    }

    fn kappa2(&self, b: &[i64]) -> f64 {
        self.kappa(b).iter().map(|k| k * k).sum()
    }

    fn index_of(&self, b: &[i64]) -> Option<usize> {
        let m = self.side() as i64;
        let half = (m - 1) / 2;
        let mut idx = 0usize;
        for &k in b {
            if k < -half || k > half {
                return None;
            }
            idx = idx * m as usize + (k + half) as usize;
        }
        Some(idx)
    }

    /// All point charges felt by the electrons: nuclei then fixed charges.
    fn sources(&self, charges: &[f64], positions: &[Vec<f64>]) -> Vec<(f64, Vec<f64>)> {
        charges
            .iter()
            .cloned()
            .zip(positions.iter().cloned())
            .chain(
                self.fixed_charges
                    .iter()
                    .cloned()
                    .zip(self.fixed_positions.iter().cloned()),
            )
            .collect()
    }

    /// Exact ℓ1 normalization `λ = λ_T + λ_U + λ_V`.
    pub fn lambda(&self, charges: &[f64]) -> f64 {
        let ne = self.n_electrons as f64;
        let om = self.omega();
        let lt = ne
            * self
                .plane_waves()
                .iter()
                .map(|b| self.kappa2(b) / 2.0)
                .fold(0.0, f64::max);
        let inv: f64 = self.transfers().iter().map(|v| 1.0 / self.kappa2(v)).sum();
        let zsum: f64 = charges
            .iter()
            .chain(self.fixed_charges.iter())
            .map(|z| z.abs())
            .sum();
        let lu = ne * zsum * 4.0 * PI / om * inv;
        let lv = ne * (ne - 1.0) * 2.0 * PI / om * inv;
        lt + lu + lv
    }

    /// Asymptotic scaling expression `Ñ/h² + NÑZ_max/h + Ñ²/h` with unit constants.
    pub fn lambda_scaling(&self, charges: &[f64]) -> f64 {
        let ne = self.n_electrons as f64;
        let zmax = charges.iter().map(|z| z.abs()).fold(0.0, f64::max);
        ne / (self.h_el * self.h_el)
            + charges.len() as f64 * ne * zmax / self.h_el
            + ne * ne / self.h_el
    }

    /// Force normalization `τ_n = Ñ Σ_ν 4π|Z_n||κ_{ν,j}| / (Ω‖κ_ν‖²)`.
    pub fn tau(&self, charge: f64, j: usize) -> f64 {
        let s: f64 = self
            .transfers()
            .iter()
            .map(|v| self.kappa(v)[j].abs() / self.kappa2(v))
            .sum();
        self.n_electrons as f64 * 4.0 * PI * charge.abs() / self.omega() * s
    }
}

fn one_body(espec: &ElectronicSpec, charges: &[f64], positions: &[Vec<f64>]) -> CMat {
    let waves = espec.plane_waves();
    let b = waves.len();
    let om = espec.omega();
    let sources = espec.sources(charges, positions);
    let mut h = CMat::zeros(b, b);
    for (r, br) in waves.iter().enumerate() {
        h[(r, r)] = c(espec.kappa2(br) / 2.0);
        for (col, bc) in waves.iter().enumerate() {
            if r == col {
                continue;
            }
            let cmb: Vec<i64> = bc.iter().zip(br).map(|(x, y)| x - y).collect();
            let k = espec.kappa(&cmb);
            let k2 = espec.kappa2(&cmb);
            for (z, x) in &sources {
                let phase: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
                h[(r, col)] += cis(phase) * (-4.0 * PI / om * z / k2);
            }
        }
    }
    h
}

fn one_body_force(espec: &ElectronicSpec, charge: f64, position: &[f64], j: usize) -> CMat {
    let waves = espec.plane_waves();
    let b = waves.len();
    let om = espec.omega();
    let mut f = CMat::zeros(b, b);
    for (r, br) in waves.iter().enumerate() {
        for (col, bc) in waves.iter().enumerate() {
            if r == col {
                continue;
            }
            let cmb: Vec<i64> = bc.iter().zip(br).map(|(x, y)| x - y).collect();
            let k = espec.kappa(&cmb);
            let k2 = espec.kappa2(&cmb);
            let phase: f64 = k.iter().zip(position).map(|(a, b)| a * b).sum();
            f[(r, col)] = I * k[j] * cis(phase) * (-4.0 * PI / om * charge / k2);
        }
    }
    f
}

fn embed_electron(ne: usize, b: usize, i: usize, m: &CMat) -> CMat {
    let left = b.pow(i as u32);
    let right = b.pow((ne - i - 1) as u32);
    linalg::kron(
        &linalg::kron(&CMat::identity(left, left), m),
        &CMat::identity(right, right),
    )
}

fn two_body(espec: &ElectronicSpec) -> CMat {
    let ne = espec.n_electrons;
    let b = espec.one_body_dim();
    let n = espec.dim();
    let mut v = CMat::zeros(n, n);
    if ne < 2 {
        return v;
    }
    let waves = espec.plane_waves();
    let om = espec.omega();
    let dims = vec![b; ne];
    for nu in espec.transfers() {
        let w = 2.0 * PI / (om * espec.kappa2(&nu));
        for col in 0..n {
            let digits = linalg::unravel(col, &dims);
            for i in 0..ne {
                for j in 0..ne {
                    if i == j {
                        continue;
                    }
                    let up: Vec<i64> = waves[digits[i]]
                        .iter()
                        .zip(&nu)
                        .map(|(a, d)| a + d)
                        .collect();
                    let down: Vec<i64> = waves[digits[j]]
                        .iter()
                        .zip(&nu)
                        .map(|(a, d)| a - d)
                        .collect();
                    if let (Some(bi), Some(bj)) = (espec.index_of(&up), espec.index_of(&down)) {
                        let mut out = digits.clone();
                        out[i] = bi;
                        out[j] = bj;
                        v[(linalg::ravel(&out, &dims), col)] += c(w);
                    }
                }
            }
        }
    }
    v
}

/// Dense `H_el(x)` for nuclear charges and positions `[n][j]`.
pub fn electronic_hamiltonian(
    espec: &ElectronicSpec,
    charges: &[f64],
    positions: &[Vec<f64>],
) -> Result<CMat> {
    espec.validate()?;
    if charges.len() != positions.len() || positions.iter().any(|p| p.len() != espec.spatial_dim) {
        return Err(Error::Dimension(
            "charges and positions do not match".into(),
        ));
    }
    let h1 = one_body(espec, charges, positions);
    let ne = espec.n_electrons;
    let b = espec.one_body_dim();
    let mut h = two_body(espec);
    for i in 0..ne {
        h += embed_electron(ne, b, i, &h1);
    }
    Ok(h)
}

/// Dilation of `H_el(x)` with `α = λ`.
pub fn electronic_encoding(
    espec: &ElectronicSpec,
    charges: &[f64],
    positions: &[Vec<f64>],
) -> Result<BlockEncoding> {
    let h = electronic_hamiltonian(espec, charges, positions)?;
    bea::dilate(&h, espec.lambda(charges))
}

/// `∂H_el/∂x_{n,j}` at the given configuration.
pub fn force_operator(
    espec: &ElectronicSpec,
    charges: &[f64],
    positions: &[Vec<f64>],
    n: usize,
    j: usize,
) -> Result<CMat> {
    espec.validate()?;
    if n >= charges.len() || j >= espec.spatial_dim {
        return Err(Error::InvalidArgument(format!(
            "force component ({n}, {j}) out of range"
        )));
    }
    let f1 = one_body_force(espec, charges[n], &positions[n], j);
    let ne = espec.n_electrons;
    let b = espec.one_body_dim();
    let mut f = CMat::zeros(espec.dim(), espec.dim());
    for i in 0..ne {
        f += embed_electron(ne, b, i, &f1);
    }
    Ok(f)
}

fn block_diagonal(blocks: &[CMat]) -> CMat {
    let b = blocks[0].nrows();
    let mut m = CMat::zeros(b * blocks.len(), b * blocks.len());
    for (x, blk) in blocks.iter().enumerate() {
        m.view_mut((x * b, x * b), (b, b)).copy_from(blk);
    }
    m
}

/// Per-position Hamiltonians `H_el(x)` over the joint nuclear position grid.
pub fn position_hamiltonians(espec: &ElectronicSpec, pspec: &PhaseSpaceSpec) -> Result<Vec<CMat>> {
    if espec.spatial_dim != pspec.spatial_dim {
        return Err(Error::Dimension(
            "electronic and nuclear spatial dimensions differ".into(),
        ));
    }
    check_dim(
        pspec.position_count() * espec.dim(),
        "controlled electronic Hamiltonian",
    )?;
    (0..pspec.position_count())
        .map(|x| electronic_hamiltonian(espec, &pspec.charges, &pspec.positions(x)))
        .collect()
}

/// `Σ_x |x̄⟩⟨x̄| ⊗ H_el(x)` and its dilation with `α = λ`.
pub fn controlled_electronic_hamiltonian(
    espec: &ElectronicSpec,
    pspec: &PhaseSpaceSpec,
) -> Result<(CMat, BlockEncoding)> {
    let blocks = position_hamiltonians(espec, pspec)?;
    let m = block_diagonal(&blocks);
    let be = bea::dilate(&m, espec.lambda(&pspec.charges))?;
    Ok((m, be))
}

/// `Σ_x |x̄⟩⟨x̄| ⊗ ∂H_el/∂x_{n,j}(x)`.
pub fn controlled_force(
    espec: &ElectronicSpec,
    pspec: &PhaseSpaceSpec,
    n: usize,
    j: usize,
) -> Result<CMat> {
    let blocks: Vec<CMat> = (0..pspec.position_count())
        .map(|x| force_operator(espec, &pspec.charges, &pspec.positions(x), n, j))
        .collect::<Result<_>>()?;
    Ok(block_diagonal(&blocks))
}

/// Ground states of `H_el(x)` for every position, from dense or amplified preparation.
pub struct GroundStateSource {
    pub energies: Vec<f64>,
    pub spectra: Vec<Vec<f64>>,
    pub exact_states: Vec<CVec>,
    pub config: GroundStateConfig,
    pub preparation: Option<GroundStatePreparation>,
    pub lambda: f64,
}

/// Settings for ground-state sourcing.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundStateSettings {
    pub eps_prep: f64,
    pub delta: f64,
    pub seed: u64,
    pub qsvt_mode: Mode,
}

impl Default for GroundStateSettings {
    fn default() -> Self {
        GroundStateSettings {
            eps_prep: 1e-4,
            delta: 0.6,
            seed: 7,
            qsvt_mode: Mode::Faithful,
        }
    }
}

pub fn ground_state_source(
    espec: &ElectronicSpec,
    pspec: &PhaseSpaceSpec,
    settings: &GroundStateSettings,
) -> Result<GroundStateSource> {
    let blocks = position_hamiltonians(espec, pspec)?;
    let mut energies = Vec::new();
    let mut spectra = Vec::new();
    let mut states = Vec::new();
    for h in &blocks {
        let (e, v) = eigh(h);
        energies.push(e[0]);
        states.push(linalg::first_column(&v));
        spectra.push(e);
    }
    let config = match &espec.gap {
        Some(g) => GroundStateConfig {
            mu: g.mu,
            gamma: g.gamma,
            delta: g.delta,
            eps_prep: settings.eps_prep,
        },
        None => GroundStateConfig::from_spectra(&spectra, settings.delta, settings.eps_prep)?,
    };
    let lambda = espec.lambda(&pspec.charges);
    let preparation = match espec.mode {
        ElectronicMode::Exact => None,
        ElectronicMode::Faithful => {
            let be = bea::dilate(&block_diagonal(&blocks), lambda)?;
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            let oracle = InitialStateOracle::planted(&states, config.delta, &mut rng)?;
            Some(prepare_ground_state_superposed(
                &be,
                blocks.len(),
                &config,
                &oracle,
                settings.qsvt_mode,
            )?)
        }
    };
    Ok(GroundStateSource {
        energies,
        spectra,
        exact_states: states,
        config,
        preparation,
        lambda,
    })
}

/// `⟨0|G† (U_O) G|0⟩` over the position register for an operator `O^ctrl` with scaling `alpha`.
fn kickback_block(prep: &GroundStatePreparation, o_ctrl: &CMat, alpha: f64) -> Result<CMat> {
    let u_o = bea::dilate(o_ctrl, alpha)?;
    let [e, r, xd, el] = prep.dims;
    let cols = prep.output_columns();
    let g = prep.dim();
    let dims = [2usize, e, r, xd, el];
    let local = Local::new(&dims, &[0, 3, 4], u_o.op.clone());
    let mut input = CMat::zeros(2 * g, xd);
    input.rows_mut(0, g).copy_from(&cols);
    let out = local.apply(&input);
    let projected = out.rows(0, g).into_owned();
    let m = cols.adjoint() * projected * c(alpha);
    Ok(m)
}

/// Diagonal encoding over the joint position register, with its exact reference values.
pub struct DiagonalKickback {
    pub be: BlockEncoding,
    pub values: Vec<f64>,
    pub reference: Vec<f64>,
}

fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5)
}

/// Encoding of `D^el_{n,j} = Σ_x ⟨ψ₀(x)|∂H_el/∂x_{n,j}|ψ₀(x)⟩ |x̄⟩⟨x̄|` with `α = τ_n`.
pub fn d_el(
    espec: &ElectronicSpec,
    pspec: &PhaseSpaceSpec,
    n: usize,
    j: usize,
    gs: &GroundStateSource,
) -> Result<DiagonalKickback> {
    let fctrl = controlled_force(espec, pspec, n, j)?;
    let tau = espec.tau(pspec.charges[n], j);
    let el = espec.dim();
    let reference: Vec<f64> = gs
        .exact_states
        .iter()
        .enumerate()
        .map(|(x, psi)| {
            let blk = fctrl.view((x * el, x * el), (el, el)).into_owned();
            psi.dotc(&(blk * psi)).re
        })
        .collect();
    if tau == 0.0 {
        let xd = reference.len();
        let be = bea::dilate(&CMat::zeros(xd, xd), 1.0)?;
        return Ok(DiagonalKickback {
            be,
            values: vec![0.0; xd],
            reference,
        });
    }
    match &gs.preparation {
        None => {
            let be = bea::dilate(&linalg::diag_real(&reference), tau)?;
            Ok(DiagonalKickback {
                be,
                values: reference.clone(),
                reference,
            })
        }
        Some(prep) => {
            let m = hermitian_part(&kickback_block(prep, &fctrl, tau)?);
            let values: Vec<f64> = (0..m.nrows()).map(|x| m[(x, x)].re).collect();
            let mut be = bea::dilate(&m, tau)?;
            be.epsilon = 2.0 * tau * (2.0 * gs.config.eps_prep).sqrt();
            be.queries = 2 * prep.queries_h + 1;
            Ok(DiagonalKickback {
                be,
                values,
                reference,
            })
        }
    }
}

/// Encoding of `H_gse = Σ_x E₀(x)|x̄⟩⟨x̄|` with `α = λ`.
pub fn h_gse(
    espec: &ElectronicSpec,
    pspec: &PhaseSpaceSpec,
    gs: &GroundStateSource,
) -> Result<DiagonalKickback> {
    let reference = gs.energies.clone();
    match &gs.preparation {
        None => {
            let be = bea::dilate(&linalg::diag_real(&reference), gs.lambda)?;
            Ok(DiagonalKickback {
                be,
                values: reference.clone(),
                reference,
            })
        }
        Some(prep) => {
            let blocks = position_hamiltonians(espec, pspec)?;
            let m = hermitian_part(&kickback_block(prep, &block_diagonal(&blocks), gs.lambda)?);
            let values: Vec<f64> = (0..m.nrows()).map(|x| m[(x, x)].re).collect();
            let mut be = bea::dilate(&m, gs.lambda)?;
            be.epsilon = 2.0 * gs.lambda * (2.0 * gs.config.eps_prep).sqrt();
            be.queries = 2 * prep.queries_h + 1;
            Ok(DiagonalKickback {
                be,
                values,
                reference,
            })
        }
    }
}

/// Largest off-diagonal magnitude of a square matrix.
pub fn off_diagonal_mass(m: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

/// `e^{iκ_b·a}` phases conjugating `H_el(x)` into `H_el(x + a)` for one electron.
pub fn translation_phases(espec: &ElectronicSpec, shift: &[f64]) -> Vec<C64> {
    espec
        .plane_waves()
        .iter()
        .map(|b| {
            let k = espec.kappa(b);
            cis(-k.iter().zip(shift).map(|(a, s)| a * s).sum::<f64>())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_error, spectral_norm};
    use crate::phasespace::GridSpec;

    fn toy_pspec(g: usize) -> PhaseSpaceSpec {
        PhaseSpaceSpec::nve(
            1,
            GridSpec::centered(g, 0.5, 1),
            GridSpec::centered(4, 1.0, 1),
            vec![1.0],
            vec![1.0],
            1.0,
        )
    }

    #[test]
    fn no_nuclei_is_kinetic() {
        let e = ElectronicSpec::new(1, 5, 1.0);
        let h = electronic_hamiltonian(&e, &[], &[]).unwrap();
        for (i, b) in e.plane_waves().iter().enumerate() {
            let k = 2.0 * PI * b[0] as f64 / 5.0;
            assert!((h[(i, i)].re - k * k / 2.0).abs() < 1e-14);
        }
        assert!(off_diagonal_mass(&h) == 0.0);
    }

    #[test]
    fn three_wave_entries() {
        let e = ElectronicSpec::new(1, 3, 1.0);
        let h = electronic_hamiltonian(&e, &[1.0], &[vec![0.0]]).unwrap();
        let k1 = 2.0 * PI / 3.0;
        let u1 = -4.0 * PI / 3.0 / (k1 * k1);
        let u2 = -4.0 * PI / 3.0 / (4.0 * k1 * k1);
        let want = [
            [k1 * k1 / 2.0, u1, u2],
            [u1, 0.0, u1],
            [u2, u1, k1 * k1 / 2.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[(i, j)] - c(want[i][j])).norm() < 1e-13);
            }
        }
        assert!(hermiticity_error(&h) < 1e-12);
        assert!(spectral_norm(&h) <= e.lambda(&[1.0]));
    }

    #[test]
    fn translation_covariance() {
        let e = ElectronicSpec::new(1, 5, 1.0);
        let h0 = electronic_hamiltonian(&e, &[1.5], &[vec![0.3]]).unwrap();
        let h1 = electronic_hamiltonian(&e, &[1.5], &[vec![0.8]]).unwrap();
        let d = linalg::diag(&translation_phases(&e, &[0.5]));
        assert!(spectral_norm(&(&d * &h0 * d.adjoint() - &h1)) < 1e-12);
        let (a, _) = eigh(&h0);
        let (b, _) = eigh(&h1);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn force_matches_finite_difference() {
        let e = ElectronicSpec::new(1, 3, 1.0);
        let step = 1e-4;
        let x = 0.37;
        let hp = electronic_hamiltonian(&e, &[1.0], &[vec![x + step]]).unwrap();
        let hm = electronic_hamiltonian(&e, &[1.0], &[vec![x - step]]).unwrap();
        let fd = (hp - hm) / c(2.0 * step);
        let f = force_operator(&e, &[1.0], &[vec![x]], 0, 0).unwrap();
        assert!(spectral_norm(&(fd - &f)) < 1e-6);
        assert!(hermiticity_error(&f) < 1e-12);
        assert!(spectral_norm(&f) <= e.tau(1.0, 0) + 1e-12);
        let zero = force_operator(&e, &[0.0], &[vec![x]], 0, 0).unwrap();
        assert_eq!(spectral_norm(&zero), 0.0);
    }

    #[test]
    fn two_electrons_hermitian_and_bounded() {
        let e = ElectronicSpec::new(2, 3, 1.0);
        let h = electronic_hamiltonian(&e, &[1.0], &[vec![0.2]]).unwrap();
        assert_eq!(h.nrows(), 9);
        assert!(hermiticity_error(&h) < 1e-12);
        assert!(spectral_norm(&h) <= e.lambda(&[1.0]));
    }

    #[test]
    fn controlled_hamiltonian_is_block_diagonal() {
        let e = ElectronicSpec::new(1, 3, 1.0).with_fixed_charge(1.0, vec![0.0]);
        let p = toy_pspec(4);
        let (m, be) = controlled_electronic_hamiltonian(&e, &p).unwrap();
        assert!(bea::verify_contract(&be, &m).unwrap() < 1e-10);
        for x in 0..4 {
            let h = electronic_hamiltonian(&e, &p.charges, &p.positions(x)).unwrap();
            let blk = m.view((3 * x, 3 * x), (3, 3)).into_owned();
            assert!(spectral_norm(&(blk - h)) < 1e-14);
            for y in 0..4 {
                if y != x {
                    assert_eq!(m.view((3 * x, 3 * y), (3, 3)).norm(), 0.0);
                }
            }
        }
        let single = toy_pspec(3);
        let (m1, _) = controlled_electronic_hamiltonian(&e, &single).unwrap();
        assert_eq!(m1.nrows(), 9);
    }

    #[test]
    fn faithful_force_and_energy_match_dense_ground_states() {
        let mut e = ElectronicSpec::new(1, 3, 1.0).with_fixed_charge(1.0, vec![0.0]);
        e.mode = ElectronicMode::Faithful;
        let p = toy_pspec(4);
        let settings = GroundStateSettings::default();
        let gs = ground_state_source(&e, &p, &settings).unwrap();
        let del = d_el(&e, &p, 0, 0, &gs).unwrap();
        for (v, r) in del.values.iter().zip(&del.reference) {
            assert!((v - r).abs() <= del.be.epsilon, "{v} vs {r}");
        }
        let blk = del.be.block();
        assert!(off_diagonal_mass(&blk) < 1e-10);
        let en = h_gse(&e, &p, &gs).unwrap();
        for (v, r) in en.values.iter().zip(&en.reference) {
            assert!((v - r).abs() <= en.be.epsilon);
        }
    }

    #[test]
    fn symmetric_point_has_zero_force() {
        let e = ElectronicSpec::new(1, 5, 1.0).with_fixed_charge(1.0, vec![0.0]);
        let p = PhaseSpaceSpec::nve(
            1,
            GridSpec::centered(5, 0.4, 1),
            GridSpec::centered(4, 1.0, 1),
            vec![1.0],
            vec![1.0],
            1.0,
        );
        let gs = ground_state_source(&e, &p, &GroundStateSettings::default()).unwrap();
        let del = d_el(&e, &p, 0, 0, &gs).unwrap();
        assert!(del.values[2].abs() < 1e-12);
        assert!((del.values[1] + del.values[3]).abs() < 1e-12);
    }
}
