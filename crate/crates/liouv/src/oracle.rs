//! Classical brute-force references.
//!
//! Everything here is assembled from the raw specifications with its own
//! loops: stencil coefficients come from a closed form, the Liouvillian is
//! filled entry by entry, and the electronic Hamiltonian uses matrix-element
//! rules between plane-wave product states. Nothing reuses the
//! block-encoding pipeline.

use std::f64::consts::PI;

use crate::electronic::ElectronicSpec;
use crate::error::{Error, Result};
use crate::linalg::{self, c, check_dim, cis, CMat, CVec, C64, I, ZERO};
use crate::phasespace::{Ensemble, PhaseSpaceSpec};

/// Numerical route for a dense matrix exponential.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpmMethod {
    /// Hermitian eigendecomposition.
    Eigen,
    /// Padé scaling and squaring of `−iLt`.
    ScalingSquaring,
    /// Truncated Taylor series applied to the vector in short steps.
    Taylor,
}

fn hermitian_check(l: &CMat) -> Result<()> {
    if !l.is_square() {
        return Err(Error::Dimension(format!(
            "generator is {}x{}",
            l.nrows(),
            l.ncols()
        )));
    }
    let scale = l.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let err = linalg::hermiticity_error(l);
    if err > 1e-9 * scale {
        return Err(Error::InvalidArgument(format!(
            "generator is not Hermitian: {err:.3e}"
        )));
    }
    Ok(())
}

/// `e^{−iLt}ρ₀` by eigendecomposition.
pub fn expm_evolve(l: &CMat, rho0: &CVec, t: f64) -> Result<CVec> {
    expm_evolve_with(l, rho0, t, ExpmMethod::Eigen)
}

pub fn expm_evolve_with(l: &CMat, rho0: &CVec, t: f64, method: ExpmMethod) -> Result<CVec> {
    hermitian_check(l)?;
    if rho0.len() != l.nrows() {
        return Err(Error::Dimension(format!(
            "state of length {} for a generator of dimension {}",
            rho0.len(),
            l.nrows()
        )));
    }
    check_dim(l.nrows(), "oracle exponential")?;
    match method {
        ExpmMethod::Eigen => Ok(Propagator::new(l)?.apply(rho0, t)),
        ExpmMethod::ScalingSquaring => {
            let m = l.map(|z| -I * z * t);
            Ok(linalg::expm(&m) * rho0)
        }
        ExpmMethod::Taylor => Ok(taylor_apply(l, rho0, t)),
    }
}

fn taylor_apply(l: &CMat, rho0: &CVec, t: f64) -> CVec {
    let bound: f64 = (0..l.ncols())
        .map(|j| l.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let steps = ((bound * t.abs()).ceil() as usize).max(1);
    let dt = t / steps as f64;
    let mut v = rho0.clone();
    for _ in 0..steps {
        let mut term = v.clone();
        let mut acc = v.clone();
        for k in 1..=60 {
            term = (l * &term).map(|z| -I * z * dt / k as f64);
            acc += &term;
            if term.norm() < 1e-18 * acc.norm() {
                break;
            }
        }
        v = acc;
    }
    v
}

/// Cached eigendecomposition for evolving the same generator to many times.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub energies: Vec<f64>,
    pub vectors: CMat,
}

impl Propagator {
    pub fn new(l: &CMat) -> Result<Self> {
        hermitian_check(l)?;
        let (energies, vectors) = linalg::eigh(l);
        Ok(Propagator { energies, vectors })
    }

    pub fn apply(&self, rho0: &CVec, t: f64) -> CVec {
        let coeffs = self.vectors.adjoint() * rho0;
        let rotated = CVec::from_iterator(
            coeffs.len(),
            coeffs
                .iter()
                .zip(&self.energies)
                .map(|(a, e)| a * cis(-e * t)),
        );
        &self.vectors * rotated
    }
}

/// Ascending spectrum with eigenvectors in the columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    pub vectors: CMat,
}

impl Spectrum {
    pub fn ground_state(&self) -> CVec {
        self.vectors.column(0).into_owned()
    }

    /// `E₁ − E₀`, or infinity for a one-dimensional space.
    pub fn gap(&self) -> f64 {
        if self.energies.len() < 2 {
            f64::INFINITY
        } else {
            self.energies[1] - self.energies[0]
        }
    }

    /// `max_k ‖Hψ_k − E_kψ_k‖`.
    pub fn residual(&self, h: &CMat) -> f64 {
        (0..self.energies.len())
            .map(|k| {
                let v = self.vectors.column(k);
                (h * v - v * c(self.energies[k])).norm()
            })
            .fold(0.0, f64::max)
    }
}

pub fn ground_truth_spectrum(h: &CMat) -> Result<Spectrum> {
    hermitian_check(h)?;
    check_dim(h.nrows(), "oracle eigensolver")?;
    let (energies, vectors) = linalg::eigh(h);
    Ok(Spectrum { energies, vectors })
}

/// Central difference `(f(x+s) − f(x−s))/(2s)`.
pub fn fd_gradient<F: Fn(f64) -> f64>(f: F, x: f64, step: f64) -> f64 {
    (f(x + step) - f(x - step)) / (2.0 * step)
}

/// Central differences at `step` and `step/2` and their Richardson extrapolation.
pub fn richardson<F: Fn(f64) -> f64>(f: F, x: f64, step: f64) -> (f64, f64, f64) {
    let coarse = fd_gradient(&f, x, step);
    let fine = fd_gradient(&f, x, step / 2.0);
    (coarse, fine, (4.0 * fine - coarse) / 3.0)
}

/// `ln Σ e^{−E/T}` evaluated stably.
fn log_partition(energies: &[f64], temperature: f64) -> f64 {
    let emin = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let s: f64 = energies
        .iter()
        .map(|e| (-(e - emin) / temperature).exp())
        .sum();
    s.ln() - emin / temperature
}

fn check_microstates(ea: &[f64], eb: &[f64], temperature: f64) -> Result<()> {
    if ea.len() != eb.len() || ea.is_empty() {
        return Err(Error::Dimension(format!(
            "microstate lists of lengths {} and {}",
            ea.len(),
            eb.len()
        )));
    }
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    Ok(())
}

/// Boltzmann average of `E_B − E_A` under `E(Λ) = (1−Λ)E_A + ΛE_B`.
pub fn boltzmann_average(ea: &[f64], eb: &[f64], lambda: f64, temperature: f64) -> Result<f64> {
    check_microstates(ea, eb, temperature)?;
    let el: Vec<f64> = ea
        .iter()
        .zip(eb)
        .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
        .collect();
    let lz = log_partition(&el, temperature);
    Ok(ea
        .iter()
        .zip(eb)
        .zip(&el)
        .map(|((a, b), e)| (b - a) * (-e / temperature - lz).exp())
        .sum())
}

/// Left Riemann sum `(1/N_Λ)Σ_k ⟨E_B − E_A⟩_{k/N_Λ}` over microstate energies.
pub fn boltzmann_delta_f(ea: &[f64], eb: &[f64], n_lambda: usize, temperature: f64) -> Result<f64> {
    if n_lambda == 0 {
        return Err(Error::InvalidArgument("n_lambda must be at least 1".into()));
    }
    let mut s = 0.0;
    for k in 0..n_lambda {
        s += boltzmann_average(ea, eb, k as f64 / n_lambda as f64, temperature)?;
    }
    Ok(s / n_lambda as f64)
}

/// `−T ln(Z_B/Z_A)`.
pub fn exact_delta_f(ea: &[f64], eb: &[f64], temperature: f64) -> Result<f64> {
    check_microstates(ea, eb, temperature)?;
    Ok(-temperature * (log_partition(eb, temperature) - log_partition(ea, temperature)))
}

/// Left Riemann sum of `f` over `[0, 1)` with `n` points.
pub fn riemann<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    (0..n).map(|k| f(k as f64 / n as f64)).sum::<f64>() / n as f64
}

/// Closed-form central stencil `c_{d,k} = (−1)^{k+1}(d!)² / (k (d−k)! (d+k)!)`.
pub fn stencil_coefficient(d: usize, k: isize) -> f64 {
    if k == 0 || k.unsigned_abs() > d {
        return 0.0;
    }
    let kk = k.unsigned_abs();
    let mut ratio = 1.0;
    for i in 1..=kk {
        ratio *= (d + 1 - i) as f64 / (d + i) as f64;
    }
    let sign = if kk % 2 == 1 { 1.0 } else { -1.0 };
    let v = sign * ratio / kk as f64;
    if k > 0 {
        v
    } else {
        -v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    X(usize, usize),
    P(usize, usize),
    S,
    Ps,
}

struct Grid {
    axes: Vec<Axis>,
    dims: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
    order: Vec<usize>,
}

impl Grid {
    fn from_spec(spec: &PhaseSpaceSpec) -> Result<Self> {
        let mut g = Grid {
            axes: Vec::new(),
            dims: Vec::new(),
            spacing: Vec::new(),
            origin: Vec::new(),
            order: Vec::new(),
        };
        let nd = spec.n_nuclei * spec.spatial_dim;
        for i in 0..nd {
            g.push(
                Axis::X(i / spec.spatial_dim, i % spec.spatial_dim),
                spec.x.g,
                spec.x.h,
                spec.x.origin,
                spec.x.d,
            );
        }
        for i in 0..nd {
            g.push(
                Axis::P(i / spec.spatial_dim, i % spec.spatial_dim),
                spec.p.g,
                spec.p.h,
                spec.p.origin,
                spec.p.d,
            );
        }
        if spec.ensemble == Ensemble::Nvt {
            let s = spec.s_grid()?;
            let ps = spec.ps_grid()?;
            g.push(Axis::S, s.g, s.h, s.origin, s.d);
            g.push(Axis::Ps, ps.g, ps.h, ps.origin, ps.d);
        }
        Ok(g)
    }

    fn push(&mut self, a: Axis, n: usize, h: f64, origin: f64, d: usize) {
        self.axes.push(a);
        self.dims.push(n);
        self.spacing.push(h);
        self.origin.push(origin);
        self.order.push(d);
    }

    fn total(&self) -> usize {
        self.dims.iter().product()
    }

    fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for a in (0..self.dims.len()).rev() {
            out[a] = index % self.dims[a];
            index /= self.dims[a];
        }
        out
    }

    fn index(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (d, n)| acc * n + d)
    }

    fn coordinate(&self, a: usize, k: usize) -> f64 {
        (k as f64 - self.origin[a]) * self.spacing[a]
    }
}

struct Point {
    x: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
    s: f64,
    ps: f64,
}

fn point(spec: &PhaseSpaceSpec, grid: &Grid, digits: &[usize]) -> Point {
    let mut pt = Point {
        x: vec![vec![0.0; spec.spatial_dim]; spec.n_nuclei],
        p: vec![vec![0.0; spec.spatial_dim]; spec.n_nuclei],
        s: 0.0,
        ps: 0.0,
    };
    for (a, axis) in grid.axes.iter().enumerate() {
        let v = grid.coordinate(a, digits[a]);
        match *axis {
            Axis::X(n, j) => pt.x[n][j] = v,
            Axis::P(n, j) => pt.p[n][j] = v,
            Axis::S => pt.s = v,
            Axis::Ps => pt.ps = v,
        }
    }
    pt
}

/// Generalized velocity `∂H/∂(conjugate of axis)` paired with the derivative on `axis`, with its sign.
fn flow(spec: &PhaseSpaceSpec, pt: &Point, axis: Axis) -> f64 {
    let nvt = spec.ensemble == Ensemble::Nvt;
    let sf = if nvt { pt.s + spec.bath.s_min } else { 1.0 };
    let soft2 = spec.softening * spec.softening;
    match axis {
        Axis::X(n, j) => pt.p[n][j] / (spec.masses[n] * sf * sf),
        Axis::P(n, j) => {
            let mut force = 0.0;
            for m in 0..spec.n_nuclei {
                if m == n {
                    continue;
                }
                let mut r2 = 0.0;
                for k in 0..spec.spatial_dim {
                    r2 += (pt.x[n][k] - pt.x[m][k]).powi(2);
                }
                force += spec.charges[n] * spec.charges[m] * (pt.x[n][j] - pt.x[m][j])
                    / (r2 + soft2).powf(1.5);
            }
            for (z, pos) in spec.fixed_charges.iter().zip(&spec.fixed_positions) {
                let mut r2 = 0.0;
                for k in 0..spec.spatial_dim {
                    r2 += (pt.x[n][k] - pos[k]).powi(2);
                }
                force += spec.charges[n] * z * (pt.x[n][j] - pos[j]) / (r2 + soft2).powf(1.5);
            }
            force
        }
        Axis::S => pt.ps / spec.bath.q,
        Axis::Ps => {
            let mut kin2 = 0.0;
            for n in 0..spec.n_nuclei {
                for j in 0..spec.spatial_dim {
                    kin2 += pt.p[n][j] * pt.p[n][j] / spec.masses[n];
                }
            }
            kin2 / sf.powi(3) - spec.bath.n_f * spec.bath.temperature / sf
        }
    }
}

/// Dense classical Liouvillian filled entry by entry.
///
/// `L[r, col] = Σ_axes (−i c_{d,k}/h) · v_axis(col)` where `r` differs from
/// `col` only on `axis` by `k` (mod g) and `v_axis` is the flow velocity of
/// that coordinate.
pub fn classical_liouvillian(spec: &PhaseSpaceSpec) -> Result<CMat> {
    spec.validate()?;
    let grid = Grid::from_spec(spec)?;
    let n = grid.total();
    check_dim(n, "oracle Liouvillian")?;
    let mut l = CMat::zeros(n, n);
    for col in 0..n {
        let digits = grid.digits(col);
        let pt = point(spec, &grid, &digits);
        for (a, &axis) in grid.axes.iter().enumerate() {
            let v = flow(spec, &pt, axis);
            if v == 0.0 {
                continue;
            }
            let g = grid.dims[a] as isize;
            let d = grid.order[a] as isize;
            for k in -d..=d {
                if k == 0 {
                    continue;
                }
                // D[r, r+k] = c_k/h, so the column digit equals the row digit shifted by k.
                let mut row = digits.clone();
                row[a] = (digits[a] as isize - k).rem_euclid(g) as usize;
                let r = grid.index(&row);
                l[(r, col)] += -I * c(stencil_coefficient(grid.order[a], k) / grid.spacing[a] * v);
            }
        }
    }
    Ok(l)
}

/// Nuclear energy `Σ p²/2m + Σ_{n<m} Z_nZ_m/√(r²+Δ²)` plus fixed-charge terms at a phase point with `s + s_min = 1`.
fn classical_energy(spec: &PhaseSpaceSpec, pt: &Point) -> f64 {
    let mut e = 0.0;
    for n in 0..spec.n_nuclei {
        for j in 0..spec.spatial_dim {
            e += pt.p[n][j] * pt.p[n][j] / (2.0 * spec.masses[n]);
        }
        for m in (n + 1)..spec.n_nuclei {
            let r2: f64 = (0..spec.spatial_dim)
                .map(|k| (pt.x[n][k] - pt.x[m][k]).powi(2))
                .sum();
            e += spec.charges[n] * spec.charges[m] / (r2 + spec.softening * spec.softening).sqrt();
        }
        for (z, pos) in spec.fixed_charges.iter().zip(&spec.fixed_positions) {
            let r2: f64 = (0..spec.spatial_dim)
                .map(|k| (pt.x[n][k] - pos[k]).powi(2))
                .sum();
            e += spec.charges[n] * z / (r2 + spec.softening * spec.softening).sqrt();
        }
    }
    e
}

fn wave(espec: &ElectronicSpec, idx: usize) -> Vec<i64> {
    let m = espec.side();
    let half = (m as i64 - 1) / 2;
    let mut out = vec![0i64; espec.spatial_dim];
    let mut rest = idx;
    for j in (0..espec.spatial_dim).rev() {
        out[j] = (rest % m) as i64 - half;
        rest /= m;
    }
    out
}

/// Dense `H_el(x)` from plane-wave matrix-element rules between product states.
///
/// Diagonal: `Σ_i ‖κ_{b_i}‖²/2`. One electron moved by `q = b' − b`:
/// `−(4π/Ω)Σ_sources Z e^{−iκ_q·R}/‖κ_q‖²`. Two electrons moved by `ν` and
/// `−ν`: `4π/(Ω‖κ_ν‖²)`.
pub fn electronic_hamiltonian(
    espec: &ElectronicSpec,
    charges: &[f64],
    positions: &[Vec<f64>],
) -> Result<CMat> {
    espec.validate()?;
    if charges.len() != positions.len() {
        return Err(Error::Dimension(
            "charges and positions do not match".into(),
        ));
    }
    let ne = espec.n_electrons;
    let b = espec.n_planewaves;
    let dim = b.pow(ne as u32);
    check_dim(dim, "oracle electronic Hamiltonian")?;
    let len = espec.side() as f64 * espec.h_el;
    let omega = len.powi(espec.spatial_dim as i32);
    let kappa = |v: &[i64]| -> Vec<f64> { v.iter().map(|&k| 2.0 * PI * k as f64 / len).collect() };
    let mut sources: Vec<(f64, Vec<f64>)> = charges
        .iter()
        .cloned()
        .zip(positions.iter().cloned())
        .collect();
    sources.extend(
        espec
            .fixed_charges
            .iter()
            .cloned()
            .zip(espec.fixed_positions.iter().cloned()),
    );
    let occupation = |index: usize| -> Vec<usize> {
        let mut out = vec![0; ne];
        let mut rest = index;
        for i in (0..ne).rev() {
            out[i] = rest % b;
            rest /= b;
        }
        out
    };
    let mut h = CMat::zeros(dim, dim);
    for r in 0..dim {
        let ro = occupation(r);
        for col in 0..dim {
            let co = occupation(col);
            let moved: Vec<usize> = (0..ne).filter(|&i| ro[i] != co[i]).collect();
            let shift = |i: usize| -> Vec<i64> {
                wave(espec, ro[i])
                    .iter()
                    .zip(wave(espec, co[i]))
                    .map(|(a, b)| a - b)
                    .collect()
            };
            let entry = match moved.len() {
                0 => c(ro
                    .iter()
                    .map(|&w| kappa(&wave(espec, w)).iter().map(|k| k * k).sum::<f64>() / 2.0)
                    .sum()),
                1 => {
                    let q = shift(moved[0]);
                    let kq = kappa(&q);
                    let k2: f64 = kq.iter().map(|k| k * k).sum();
                    let mut acc = ZERO;
                    for (z, pos) in &sources {
                        let phase: f64 = kq.iter().zip(pos).map(|(k, x)| k * x).sum();
                        acc += cis(-phase) * (-4.0 * PI * z / (omega * k2));
                    }
                    acc
                }
                2 => {
                    let a = shift(moved[0]);
                    let bb = shift(moved[1]);
                    if a.iter().zip(&bb).all(|(u, v)| u + v == 0) {
                        let k2: f64 = kappa(&a).iter().map(|k| k * k).sum();
                        c(4.0 * PI / (omega * k2))
                    } else {
                        ZERO
                    }
                }
                _ => ZERO,
            };
            h[(r, col)] = entry;
        }
    }
    Ok(h)
}

/// Ground energy `E₀(x)` from [`electronic_hamiltonian`].
pub fn ground_energy(
    espec: &ElectronicSpec,
    charges: &[f64],
    positions: &[Vec<f64>],
) -> Result<f64> {
    let h = electronic_hamiltonian(espec, charges, positions)?;
    Ok(ground_truth_spectrum(&h)?.energies[0])
}

/// Central difference of `E₀` in the coordinate `(n, j)`.
pub fn ground_energy_gradient(
    espec: &ElectronicSpec,
    charges: &[f64],
    positions: &[Vec<f64>],
    n: usize,
    j: usize,
    step: f64,
) -> Result<f64> {
    let eval = |shift: f64| -> Result<f64> {
        let mut pos = positions.to_vec();
        pos[n][j] += shift;
        ground_energy(espec, charges, &pos)
    };
    Ok((eval(step)? - eval(-step)?) / (2.0 * step))
}

/// Central difference of the matrix `H_el` in the coordinate `(n, j)`.
pub fn force_fd(
    espec: &ElectronicSpec,
    charges: &[f64],
    positions: &[Vec<f64>],
    n: usize,
    j: usize,
    step: f64,
) -> Result<CMat> {
    let mut plus = positions.to_vec();
    let mut minus = positions.to_vec();
    plus[n][j] += step;
    minus[n][j] -= step;
    let hp = electronic_hamiltonian(espec, charges, &plus)?;
    let hm = electronic_hamiltonian(espec, charges, &minus)?;
    Ok((hp - hm) / c(2.0 * step))
}

/// Per-position `E₀(x)` over the joint position grid, first nucleus most significant.
pub fn ground_energy_map(espec: &ElectronicSpec, pspec: &PhaseSpaceSpec) -> Result<Vec<f64>> {
    let grid = Grid::from_spec(pspec)?;
    let nd = pspec.n_nuclei * pspec.spatial_dim;
    let count = pspec.x.g.pow(nd as u32);
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let mut digits = vec![0; grid.dims.len()];
        let mut rest = idx;
        for a in (0..nd).rev() {
            digits[a] = rest % pspec.x.g;
            rest /= pspec.x.g;
        }
        let pt = point(pspec, &grid, &digits);
        out.push(ground_energy(espec, &pspec.charges, &pt.x)?);
    }
    Ok(out)
}

/// Microstate energies `E_S` over every nuclear grid point `(x, p′)`.
///
/// Each microstate carries `Σp′²/2m + V_nuc(x) + E₀(x)` with the thermostat
/// scale set to one.
pub fn microstate_energies(
    espec: Option<&ElectronicSpec>,
    pspec: &PhaseSpaceSpec,
) -> Result<Vec<f64>> {
    let grid = Grid::from_spec(pspec)?;
    let nd = pspec.n_nuclei * pspec.spatial_dim;
    let e0 = match espec {
        Some(e) => ground_energy_map(e, pspec)?,
        None => vec![0.0; pspec.x.g.pow(nd as u32)],
    };
    let count = pspec.x.g.pow(nd as u32) * pspec.p.g.pow(nd as u32);
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let mut digits = vec![0; grid.dims.len()];
        let mut rest = idx;
        for a in (0..2 * nd).rev() {
            digits[a] = rest % grid.dims[a];
            rest /= grid.dims[a];
        }
        let pt = point(pspec, &grid, &digits);
        out.push(classical_energy(pspec, &pt) + e0[idx / pspec.p.g.pow(nd as u32)]);
    }
    Ok(out)
}

/// Step of the central differences behind [`full_liouvillian`].
pub const FORCE_STEP: f64 = 1e-4;

/// Dense `L_cl + L_el` with the electronic forces taken as Richardson-extrapolated
/// central differences of the dense ground energy (error ~`FORCE_STEP⁴`).
pub fn full_liouvillian(espec: Option<&ElectronicSpec>, pspec: &PhaseSpaceSpec) -> Result<CMat> {
    let mut l = classical_liouvillian(pspec)?;
    let Some(espec) = espec else {
        return Ok(l);
    };
    let grid = Grid::from_spec(pspec)?;
    let n = grid.total();
    let nd = pspec.n_nuclei * pspec.spatial_dim;
    let count = pspec.x.g.pow(nd as u32);
    let mut gradients = vec![vec![0.0; nd]; count];
    for (idx, g) in gradients.iter_mut().enumerate() {
        let mut digits = vec![0; grid.dims.len()];
        let mut rest = idx;
        for a in (0..nd).rev() {
            digits[a] = rest % pspec.x.g;
            rest /= pspec.x.g;
        }
        let pt = point(pspec, &grid, &digits);
        for (k, gk) in g.iter_mut().enumerate() {
            let (nuc, j) = (k / pspec.spatial_dim, k % pspec.spatial_dim);
            let e = |shift: f64| {
                let mut pos = pt.x.clone();
                pos[nuc][j] += shift;
                ground_energy(espec, &pspec.charges, &pos).unwrap_or(f64::NAN)
            };
            *gk = richardson(|x| e(x), 0.0, FORCE_STEP).2;
            if !gk.is_finite() {
                return Err(Error::InvalidArgument(
                    "ground energy evaluation failed".into(),
                ));
            }
        }
    }
    for col in 0..n {
        let digits = grid.digits(col);
        let xi = digits[..nd].iter().fold(0, |acc, &d| acc * pspec.x.g + d);
        for k in 0..nd {
            let a = nd + k;
            let v = -gradients[xi][k];
            let g = grid.dims[a] as isize;
            let d = grid.order[a] as isize;
            for off in -d..=d {
                if off == 0 {
                    continue;
                }
                let mut row = digits.clone();
                row[a] = (digits[a] as isize - off).rem_euclid(g) as usize;
                let r = grid.index(&row);
                l[(r, col)] +=
                    -I * c(stencil_coefficient(grid.order[a], off) / grid.spacing[a] * v);
            }
        }
    }
    Ok(l)
}

/// Nuclear Hamiltonian `Σp′²/(2m(s+s_min)²) + V_nuc(x) + E₀(x)` over the full phase-space layout.
pub fn nuclear_hamiltonian_diagonal(
    espec: Option<&ElectronicSpec>,
    pspec: &PhaseSpaceSpec,
) -> Result<Vec<f64>> {
    let grid = Grid::from_spec(pspec)?;
    let nd = pspec.n_nuclei * pspec.spatial_dim;
    let e0 = match espec {
        Some(e) => ground_energy_map(e, pspec)?,
        None => vec![0.0; pspec.x.g.pow(nd as u32)],
    };
    let nvt = pspec.ensemble == Ensemble::Nvt;
    Ok((0..grid.total())
        .map(|idx| {
            let digits = grid.digits(idx);
            let pt = point(pspec, &grid, &digits);
            let sf = if nvt { pt.s + pspec.bath.s_min } else { 1.0 };
            let mut kin = 0.0;
            for nuc in 0..pspec.n_nuclei {
                for j in 0..pspec.spatial_dim {
                    kin += pt.p[nuc][j] * pt.p[nuc][j] / (2.0 * pspec.masses[nuc] * sf * sf);
                }
            }
            let xi = digits[..nd].iter().fold(0, |acc, &d| acc * pspec.x.g + d);
            kin + classical_energy(pspec, &pt.at_rest()) + e0[xi]
        })
        .collect())
}

impl Point {
    fn at_rest(&self) -> Point {
        Point {
            x: self.x.clone(),
            p: vec![vec![0.0; self.p.first().map_or(0, |v| v.len())]; self.p.len()],
            s: self.s,
            ps: self.ps,
        }
    }
}

/// Time-evolved thermodynamic-integration estimate
/// `(1/N)Σ_Λ ⟨ΔH⟩` over `e^{−i((1−Λ)L_A + ΛL_B)t}ρ₀`, one entry per Λ.
pub fn evolved_expectations(
    la: &CMat,
    lb: &CMat,
    delta_h: &[f64],
    rho0: &CVec,
    t: f64,
    lambdas: &[f64],
    method: ExpmMethod,
) -> Result<Vec<f64>> {
    lambdas
        .iter()
        .map(|&lam| {
            let l = la * c(1.0 - lam) + lb * c(lam);
            let psi = expm_evolve_with(&l, rho0, t, method)?;
            let w = psi.norm_squared();
            Ok(psi
                .iter()
                .zip(delta_h)
                .map(|(a, v)| a.norm_sqr() * v)
                .sum::<f64>()
                / w)
        })
        .collect()
}

/// `‖a − b‖` minimized over a global phase: `√(2 − 2|⟨a|b⟩|)` for unit vectors.
pub fn phase_free_distance(a: &CVec, b: &CVec) -> f64 {
    let ov = a.dotc(b).norm();
    (a.norm_squared() + b.norm_squared() - 2.0 * ov)
        .max(0.0)
        .sqrt()
}

/// First time in `(t_min, t_max]` on a uniform scan where `‖ρ_t − ρ₀‖` is
/// smallest, refined by golden-section search around the best scan point.
pub fn recurrence_time(
    prop: &Propagator,
    rho0: &CVec,
    t_min: f64,
    t_max: f64,
    samples: usize,
) -> (f64, f64) {
    let dist = |t: f64| (prop.apply(rho0, t) - rho0).norm();
    let step = (t_max - t_min) / samples as f64;
    let mut best = (t_min + step, f64::INFINITY);
    for k in 1..=samples {
        let t = t_min + step * k as f64;
        let d = dist(t);
        if d < best.1 {
            best = (t, d);
        }
    }
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let m1 = b - g * (b - a);
        let m2 = a + g * (b - a);
        if dist(m1) < dist(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let t = 0.5 * (a + b);
    let d = dist(t);
    if d < best.1 {
        (t, d)
    } else {
        best
    }
}

/// Density `|ρ|²` as a real vector.
pub fn density(v: &CVec) -> Vec<f64> {
    v.iter().map(|z| z.norm_sqr()).collect()
}

/// Complex inner product helper kept local to the oracle.
pub fn overlap(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::electronic::{self, ElectronicSpec};
    use crate::linalg::{diag_real, random_hermitian, random_unit_vector};
    use crate::phasespace::{self, Bath, GridSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn expm_zero_time_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = random_hermitian(&mut rng, 6, 2.0);
        let v = random_unit_vector(&mut rng, 6);
        for m in [
            ExpmMethod::Eigen,
            ExpmMethod::ScalingSquaring,
            ExpmMethod::Taylor,
        ] {
            assert!((expm_evolve_with(&l, &v, 0.0, m).unwrap() - &v).norm() < 1e-14);
        }
    }

    #[test]
    fn expm_diagonal_phase_rotation() {
        let l = diag_real(&[1.0, -2.0]);
        let v = CVec::from_vec(vec![c(0.6), c(0.8)]);
        let out = expm_evolve(&l, &v, 0.3).unwrap();
        assert!((out[0] - cis(-0.3) * 0.6).norm() < 1e-14);
        assert!((out[1] - cis(0.6) * 0.8).norm() < 1e-14);
    }

    #[test]
    fn expm_methods_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [3, 8, 20] {
            let l = random_hermitian(&mut rng, n, 3.0);
            let v = random_unit_vector(&mut rng, n);
            let a = expm_evolve_with(&l, &v, 1.7, ExpmMethod::Eigen).unwrap();
            let b = expm_evolve_with(&l, &v, 1.7, ExpmMethod::ScalingSquaring).unwrap();
            let t = expm_evolve_with(&l, &v, 1.7, ExpmMethod::Taylor).unwrap();
            assert!((&a - &b).norm() < 1e-10);
            assert!((&a - &t).norm() < 1e-10);
        }
    }

    #[test]
    fn spectrum_two_by_two() {
        let h = CMat::from_row_slice(2, 2, &[c(1.0), c(2.0), c(2.0), c(-2.0)]);
        let s = ground_truth_spectrum(&h).unwrap();
        assert!((s.energies[0] + 3.0).abs() < 1e-12);
        assert!((s.energies[1] - 2.0).abs() < 1e-12);
        assert!(s.residual(&h) < 1e-10);
        assert!((s.gap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn fd_quadratic_exact_and_richardson() {
        let q = |x: f64| 3.0 * x * x - x + 2.0;
        for step in [1e-1, 1.0, 3.0] {
            assert!((fd_gradient(q, 0.7, step) - 3.2).abs() < 1e-10);
        }
        let f = |x: f64| x.sin();
        let exact = 0.4f64.cos();
        let (coarse, fine, extra) = richardson(f, 0.4, 0.1);
        let ratio = (coarse - exact).abs() / (fine - exact).abs();
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
        assert!((extra - exact).abs() < (fine - exact).abs() / 100.0);
    }

    #[test]
    fn two_microstate_free_energy() {
        let ea = [0.0, 1.0];
        let eb = [0.0, 2.0];
        let exact = -((1.0 + (-2.0f64).exp()) / (1.0 + (-1.0f64).exp())).ln();
        assert!((exact_delta_f(&ea, &eb, 1.0).unwrap() - exact).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for n in [1, 4, 16, 64, 256, 4096] {
            let err = (boltzmann_delta_f(&ea, &eb, n, 1.0).unwrap() - exact).abs();
            assert!(err <= prev);
            prev = err;
        }
        assert!(prev < 1e-4);
        assert_eq!(boltzmann_delta_f(&ea, &ea, 7, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_stencil_matches_vandermonde() {
        for d in 1..=6 {
            let st = phasespace::stencil(d).unwrap();
            for k in -(d as isize)..=(d as isize) {
                assert!(
                    (st.coeff(k) - stencil_coefficient(d, k)).abs() < 1e-12,
                    "d={d} k={k}"
                );
            }
        }
        assert!((stencil_coefficient(2, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((stencil_coefficient(2, 2) + 1.0 / 12.0).abs() < 1e-15);
    }

    fn nvt_spec() -> PhaseSpaceSpec {
        PhaseSpaceSpec {
            n_nuclei: 2,
            spatial_dim: 1,
            x: GridSpec::centered(3, 0.7, 1),
            p: GridSpec::centered(3, 0.5, 1),
            s: Some(GridSpec::new(3, 0.3, 1)),
            ps: Some(GridSpec::centered(3, 0.4, 1)),
            masses: vec![1.0, 2.0],
            charges: vec![1.0, -1.5],
            softening: 0.8,
            fixed_charges: vec![-0.9],
            fixed_positions: vec![vec![0.3]],
            bath: Bath {
                q: 1.3,
                temperature: 0.9,
                n_f: 2.0,
                s_min: 0.6,
            },
            ensemble: Ensemble::Nvt,
        }
    }

    #[test]
    fn liouvillian_oracle_matches_kronecker_assembly() {
        let nve = PhaseSpaceSpec::nve(
            2,
            GridSpec::centered(4, 0.6, 1),
            GridSpec::centered(5, 0.5, 2),
            vec![1.0, 1.5],
            vec![1.0, 1.0],
            0.5,
        );
        for spec in [nve, nvt_spec()] {
            let a = classical_liouvillian(&spec).unwrap();
            let b = phasespace::classical_liouvillian_dense(&spec).unwrap();
            assert!(linalg::spectral_norm(&(&a - &b)) < 1e-10);
            assert!(linalg::hermiticity_error(&a) < 1e-12);
        }
    }

    #[test]
    fn electronic_oracle_matches_operator_assembly() {
        let one = ElectronicSpec::new(1, 5, 0.9).with_fixed_charge(0.5, vec![0.3]);
        let two = ElectronicSpec::new(2, 3, 1.1);
        for (espec, charges, pos) in [
            (one, vec![1.0, 2.0], vec![vec![0.2], vec![-0.4]]),
            (two, vec![1.5], vec![vec![0.35]]),
        ] {
            let a = electronic_hamiltonian(&espec, &charges, &pos).unwrap();
            let b = electronic::electronic_hamiltonian(&espec, &charges, &pos).unwrap();
            assert!(linalg::spectral_norm(&(&a - &b)) < 1e-12);
        }
    }

    #[test]
    fn force_oracle_matches_analytic_operator() {
        let espec = ElectronicSpec::new(1, 3, 1.0);
        let pos = vec![vec![0.3]];
        let fd = force_fd(&espec, &[1.0], &pos, 0, 0, 1e-4).unwrap();
        let an = electronic::force_operator(&espec, &[1.0], &pos, 0, 0).unwrap();
        assert!(linalg::spectral_norm(&(fd - an)) < 1e-6);
    }

    #[test]
    fn microstates_cover_the_nuclear_grid() {
        let spec = PhaseSpaceSpec::nve(
            1,
            GridSpec::centered(3, 1.0, 1),
            GridSpec::centered(4, 0.5, 1),
            vec![2.0],
            vec![1.0],
            0.5,
        );
        let e = microstate_energies(None, &spec).unwrap();
        assert_eq!(e.len(), 12);
        assert!((e[0] - 0.75f64.powi(2) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn recurrence_of_a_two_level_rotation() {
        let l = diag_real(&[0.0, 1.0]);
        let v = CVec::from_vec(vec![c(0.6), c(0.8)]);
        let prop = Propagator::new(&l).unwrap();
        let (t, d) = recurrence_time(&prop, &v, 1.0, 8.0, 200);
        assert!((t - 2.0 * PI).abs() < 1e-6);
        assert!(d < 1e-6);
    }

    #[test]
    fn full_liouvillian_matches_hellmann_feynman_assembly() {
        use crate::electronic::{ground_state_source, ElectronicMode, GroundStateSettings};
        use crate::liouvillian::full_liouvillian as assembled;
        let pspec = PhaseSpaceSpec::nve(
            1,
            GridSpec::centered(4, 0.4, 1),
            GridSpec::centered(3, 0.5, 1),
            vec![1.0],
            vec![1.5],
            1.0,
        )
        .with_fixed_charge(-1.0, vec![0.2]);
        let mut espec = ElectronicSpec::new(1, 3, 1.0).with_fixed_charge(-0.7, vec![0.1]);
        espec.mode = ElectronicMode::Exact;
        let gs = ground_state_source(&espec, &pspec, &GroundStateSettings::default()).unwrap();
        let full = assembled(&espec, &pspec, &gs).unwrap();
        let reference = full.dense_reference(&pspec).unwrap();
        let oracle = full_liouvillian(Some(&espec), &pspec).unwrap();
        assert!(linalg::spectral_norm(&(reference - oracle)) < 1e-7);
    }

    #[test]
    fn nuclear_hamiltonian_includes_thermostat_scale() {
        let spec = nvt_spec();
        let h = nuclear_hamiltonian_diagonal(None, &spec).unwrap();
        let layout = spec.layout();
        for (i, v) in h.iter().enumerate() {
            let pt = spec.point(&linalg::unravel(i, &layout.dims));
            assert!((v - spec.kinetic(&pt) - spec.potential(&pt)).abs() < 1e-12);
        }
    }
}
