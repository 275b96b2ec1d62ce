//! Discretized nuclear phase space: grids, finite-difference stencils,
//! Nosé extended-Hamiltonian terms and the classical Liouvillian.
//!
//! The register layout is `[x_{n,j} ... | p'_{n,j} ... | s | p_s]` with the
//! first register most significant. Grid value `k` on an axis maps to the
//! physical value `(k − origin)·h`.

use nalgebra::{DMatrix, DVector};

use crate::bea::{self, BlockEncoding};
use crate::error::{Error, Result};
use crate::linalg::{c, check_dim, kron, ravel, unravel, CMat, CVec, C64, I, ZERO};

/// Uniform periodic grid for one phase-space variable.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub g: usize,
    pub h: f64,
    pub d: usize,
    pub origin: f64,
}

impl GridSpec {
    pub fn new(g: usize, h: f64, d: usize) -> Self {
        GridSpec {
            g,
            h,
            d,
            origin: 0.0,
        }
    }

    /// Grid symmetric about zero.
    pub fn centered(g: usize, h: f64, d: usize) -> Self {
        GridSpec {
            g,
            h,
            d,
            origin: (g as f64 - 1.0) / 2.0,
        }
    }

    pub fn value(&self, k: usize) -> f64 {
        (k as f64 - self.origin) * self.h
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.g).map(|k| self.value(k)).collect()
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.g < 3 {
            return Err(Error::InvalidArgument(format!(
                "{name}: grid size {} below 3",
                self.g
            )));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "{name}: spacing {} must be positive",
                self.h
            )));
        }
        if self.d < 1 || 2 * self.d + 1 > self.g {
            return Err(Error::InvalidArgument(format!(
                "{name}: stencil order {} outside 1..=(g-1)/2 for g = {}",
                self.d, self.g
            )));
        }
        if !self.origin.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "{name}: origin must be finite"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ensemble {
    Nvt,
    Nve,
}

impl std::str::FromStr for Ensemble {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nvt" => Ok(Ensemble::Nvt),
            "nve" => Ok(Ensemble::Nve),
            other => Err(Error::Config(format!("unknown ensemble '{other}'"))),
        }
    }
}

/// Nosé bath parameters in atomic units with `k_B = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bath {
    pub q: f64,
    pub temperature: f64,
    pub n_f: f64,
    pub s_min: f64,
}

impl Default for Bath {
    fn default() -> Self {
        Bath {
            q: 1.0,
            temperature: 1.0,
            n_f: 1.0,
            s_min: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceSpec {
    pub n_nuclei: usize,
    pub spatial_dim: usize,
    pub x: GridSpec,
    pub p: GridSpec,
    pub s: Option<GridSpec>,
    pub ps: Option<GridSpec>,
    pub masses: Vec<f64>,
    pub charges: Vec<f64>,
    pub softening: f64,
    /// Immobile classical point charges acting on every nucleus.
    pub fixed_charges: Vec<f64>,
    pub fixed_positions: Vec<Vec<f64>>,
    pub bath: Bath,
    pub ensemble: Ensemble,
}

/// One phase-space coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variable {
    X { n: usize, j: usize },
    P { n: usize, j: usize },
    S,
    Ps,
}

/// Register order and sizes of a phase-space state.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub axes: Vec<Variable>,
    pub dims: Vec<usize>,
}

impl Layout {
    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn axis(&self, v: Variable) -> Result<usize> {
        self.axes.iter().position(|&a| a == v).ok_or_else(|| {
            Error::InvalidArgument(format!("variable {v:?} is not part of the layout"))
        })
    }
}

/// Physical coordinates of one grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub s: f64,
    pub ps: f64,
}

impl PhaseSpaceSpec {
    /// Single-species NVE system with centered grids and unit bath defaults.
    pub fn nve(
        n_nuclei: usize,
        x: GridSpec,
        p: GridSpec,
        masses: Vec<f64>,
        charges: Vec<f64>,
        softening: f64,
    ) -> Self {
        PhaseSpaceSpec {
            n_nuclei,
            spatial_dim: 1,
            x,
            p,
            s: None,
            ps: None,
            masses,
            charges,
            softening,
            fixed_charges: Vec::new(),
            fixed_positions: Vec::new(),
            bath: Bath {
                n_f: n_nuclei as f64,
                ..Bath::default()
            },
            ensemble: Ensemble::Nve,
        }
    }

    /// Adds an immobile classical charge at `position`.
    pub fn with_fixed_charge(mut self, z: f64, position: Vec<f64>) -> Self {
        self.fixed_charges.push(z);
        self.fixed_positions.push(position);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nuclei == 0 {
            return Err(Error::InvalidArgument(
                "at least one nucleus is required".into(),
            ));
        }
        if self.spatial_dim != 1 && self.spatial_dim != 3 {
            return Err(Error::InvalidArgument(format!(
                "spatial_dim must be 1 or 3, got {}",
                self.spatial_dim
            )));
        }
        self.x.validate("x grid")?;
        self.p.validate("p grid")?;
        if self.masses.len() != self.n_nuclei || self.charges.len() != self.n_nuclei {
            return Err(Error::InvalidArgument(format!(
                "{} nuclei but {} masses and {} charges",
                self.n_nuclei,
                self.masses.len(),
                self.charges.len()
            )));
        }
        if self.masses.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidArgument("masses must be positive".into()));
        }
        if self.charges.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidArgument("charges must be finite".into()));
        }
        if self.fixed_charges.len() != self.fixed_positions.len()
            || self
                .fixed_positions
                .iter()
                .any(|p| p.len() != self.spatial_dim)
            || self.fixed_charges.iter().any(|z| !z.is_finite())
        {
            return Err(Error::InvalidArgument(
                "fixed charges and positions do not match".into(),
            ));
        }
        if !(self.softening > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "softening must be positive, got {}",
                self.softening
            )));
        }
        if self.ensemble == Ensemble::Nvt {
            let s = self.s_grid()?;
            s.validate("s grid")?;
            self.ps_grid()?.validate("p_s grid")?;
            if !(self.bath.q > 0.0) || !(self.bath.temperature > 0.0) || !(self.bath.n_f > 0.0) {
                return Err(Error::InvalidArgument(
                    "bath Q, T and N_f must be positive".into(),
                ));
            }
            let lowest = (0..s.g)
                .map(|k| s.value(k) + self.bath.s_min)
                .fold(f64::INFINITY, f64::min);
            if !(lowest > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "shifted thermostat grid reaches {lowest}; s + s_min must stay positive"
                )));
            }
        }
        check_dim(self.layout().total(), "phase-space register")?;
        Ok(())
    }

    pub fn s_grid(&self) -> Result<&GridSpec> {
        self.s
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("NVT mode needs an s grid".into()))
    }

    pub fn ps_grid(&self) -> Result<&GridSpec> {
        self.ps
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("NVT mode needs a p_s grid".into()))
    }

    pub fn layout(&self) -> Layout {
        let mut axes = Vec::new();
        let mut dims = Vec::new();
        for n in 0..self.n_nuclei {
            for j in 0..self.spatial_dim {
                axes.push(Variable::X { n, j });
                dims.push(self.x.g);
            }
        }
        for n in 0..self.n_nuclei {
            for j in 0..self.spatial_dim {
                axes.push(Variable::P { n, j });
                dims.push(self.p.g);
            }
        }
        if self.ensemble == Ensemble::Nvt {
            if let (Some(s), Some(ps)) = (&self.s, &self.ps) {
                axes.push(Variable::S);
                dims.push(s.g);
                axes.push(Variable::Ps);
                dims.push(ps.g);
            }
        }
        Layout { axes, dims }
    }

    pub fn grid(&self, v: Variable) -> Result<&GridSpec> {
        match v {
            Variable::X { .. } => Ok(&self.x),
            Variable::P { .. } => Ok(&self.p),
            Variable::S => self.s_grid(),
            Variable::Ps => self.ps_grid(),
        }
    }

    /// Physical coordinates of the grid point with the given register digits.
    pub fn point(&self, digits: &[usize]) -> PhasePoint {
        let layout = self.layout();
        let mut pt = PhasePoint {
            x: vec![vec![0.0; self.spatial_dim]; self.n_nuclei],
            p: vec![vec![0.0; self.spatial_dim]; self.n_nuclei],
            s: 0.0,
            ps: 0.0,
        };
        for (a, &v) in layout.axes.iter().enumerate() {
            let k = digits[a];
            match v {
                Variable::X { n, j } => pt.x[n][j] = self.x.value(k),
                Variable::P { n, j } => pt.p[n][j] = self.p.value(k),
                Variable::S => pt.s = self.s.as_ref().map_or(0.0, |g| g.value(k)),
                Variable::Ps => pt.ps = self.ps.as_ref().map_or(0.0, |g| g.value(k)),
            }
        }
        pt
    }

    /// `s + s_min` in NVT mode and 1 in NVE mode.
    pub fn scale_factor(&self, pt: &PhasePoint) -> f64 {
        match self.ensemble {
            Ensemble::Nvt => pt.s + self.bath.s_min,
            Ensemble::Nve => 1.0,
        }
    }

    fn separation2(&self, pt: &PhasePoint, n: usize, m: usize) -> f64 {
        (0..self.spatial_dim)
            .map(|j| (pt.x[n][j] - pt.x[m][j]).powi(2))
            .sum()
    }

    /// `∂H/∂x_{n,j} = Σ_{n'≠n} −Z_n Z_{n'} (x_{n,j} − x_{n',j}) / (r² + Δ²)^{3/2}` plus the same
    /// law for every fixed charge.
    pub fn dh_dx(&self, pt: &PhasePoint, n: usize, j: usize) -> f64 {
        let d2 = self.softening * self.softening;
        let mobile: f64 = (0..self.n_nuclei)
            .filter(|&m| m != n)
            .map(|m| {
                let r2 = self.separation2(pt, n, m);
                -self.charges[n] * self.charges[m] * (pt.x[n][j] - pt.x[m][j]) / (r2 + d2).powf(1.5)
            })
            .sum();
        let fixed: f64 = self
            .fixed_charges
            .iter()
            .zip(&self.fixed_positions)
            .map(|(z, pos)| {
                let r2 = fixed_separation2(&pt.x[n], pos);
                -self.charges[n] * z * (pt.x[n][j] - pos[j]) / (r2 + d2).powf(1.5)
            })
            .sum();
        mobile + fixed
    }

    /// `∂H/∂p'_{n,j} = p'_{n,j} / (m_n (s + s_min)²)`.
    pub fn dh_dp(&self, pt: &PhasePoint, n: usize, j: usize) -> f64 {
        let sf = self.scale_factor(pt);
        pt.p[n][j] / (self.masses[n] * sf * sf)
    }

    /// `∂H/∂s = −Σ p'² / (m (s + s_min)³) + N_f T / (s + s_min)`.
    pub fn dh_ds(&self, pt: &PhasePoint) -> f64 {
        let sf = pt.s + self.bath.s_min;
        let kin: f64 = (0..self.n_nuclei)
            .map(|n| pt.p[n].iter().map(|p| p * p).sum::<f64>() / self.masses[n])
            .sum();
        -kin / sf.powi(3) + self.bath.n_f * self.bath.temperature / sf
    }

    /// `∂H/∂p_s = p_s / Q`.
    pub fn dh_dps(&self, pt: &PhasePoint) -> f64 {
        pt.ps / self.bath.q
    }

    /// `Σ p'² / (2 m (s + s_min)²)`.
    pub fn kinetic(&self, pt: &PhasePoint) -> f64 {
        let sf = self.scale_factor(pt);
        (0..self.n_nuclei)
            .map(|n| pt.p[n].iter().map(|p| p * p).sum::<f64>() / (2.0 * self.masses[n] * sf * sf))
            .sum()
    }

    /// `Σ_{n<n'} Z_n Z_{n'} / √(r² + Δ²)` plus `Σ_{n,f} Z_n Z_f / √(r² + Δ²)` over fixed charges.
    pub fn potential(&self, pt: &PhasePoint) -> f64 {
        let d2 = self.softening * self.softening;
        let mut v = 0.0;
        for n in 0..self.n_nuclei {
            for m in (n + 1)..self.n_nuclei {
                v += self.charges[n] * self.charges[m] / (self.separation2(pt, n, m) + d2).sqrt();
            }
            for (z, pos) in self.fixed_charges.iter().zip(&self.fixed_positions) {
                v += self.charges[n] * z / (fixed_separation2(&pt.x[n], pos) + d2).sqrt();
            }
        }
        v
    }

    /// Nuclear positions `[n][j]` for a joint index of the x registers.
    pub fn positions(&self, x_index: usize) -> Vec<Vec<f64>> {
        let dims = vec![self.x.g; self.n_nuclei * self.spatial_dim];
        let digits = unravel(x_index, &dims);
        (0..self.n_nuclei)
            .map(|n| {
                (0..self.spatial_dim)
                    .map(|j| self.x.value(digits[n * self.spatial_dim + j]))
                    .collect()
            })
            .collect()
    }

    /// Number of joint position configurations.
    pub fn position_count(&self) -> usize {
        self.x.g.pow((self.n_nuclei * self.spatial_dim) as u32)
    }

    /// Registers holding the nuclear positions.
    pub fn position_axes(&self) -> Vec<usize> {
        (0..self.n_nuclei * self.spatial_dim).collect()
    }

    /// Total number of grid points.
    pub fn eta(&self) -> usize {
        self.layout().total()
    }
}

fn fixed_separation2(x: &[f64], pos: &[f64]) -> f64 {
    x.iter().zip(pos).map(|(a, b)| (a - b).powi(2)).sum()
}

/// Central finite-difference stencil `c_{d,k}`, `k = −d..=d`.
#[derive(Clone, Debug, PartialEq)]
pub struct FdStencil {
    pub order: usize,
    pub coefficients: Vec<f64>,
}

impl FdStencil {
    pub fn coeff(&self, k: isize) -> f64 {
        self.coefficients[(k + self.order as isize) as usize]
    }

    /// `Σ_k |c_{d,k}|`, the operator-norm bound of `h·D`.
    pub fn l1(&self) -> f64 {
        self.coefficients.iter().map(|c| c.abs()).sum()
    }

    /// Largest `|Σ_k c_k k^m − [m = 1]|` over `m = 0..=2d`.
    pub fn exactness_defect(&self) -> f64 {
        let d = self.order as isize;
        (0..=2 * self.order as i32)
            .map(|m| {
                let s: f64 = (-d..=d).map(|k| self.coeff(k) * (k as f64).powi(m)).sum();
                (s - if m == 1 { 1.0 } else { 0.0 }).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Stencil of order `d` from the antisymmetric Vandermonde system
/// `Σ_{k=1}^{d} 2 k^{2i−1} c_k = [i = 1]`.
pub fn stencil(d: usize) -> Result<FdStencil> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "stencil order must be at least 1".into(),
        ));
    }
    let a = DMatrix::<f64>::from_fn(d, d, |i, k| 2.0 * ((k + 1) as f64).powi(2 * i as i32 + 1));
    let mut rhs = DVector::<f64>::zeros(d);
    rhs[0] = 1.0;
    let half = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidArgument(format!("singular stencil system at order {d}")))?;
    let mut coefficients = vec![0.0; 2 * d + 1];
    for k in 1..=d {
        coefficients[d + k] = half[k - 1];
        coefficients[d - k] = -half[k - 1];
    }
    let st = FdStencil {
        order: d,
        coefficients,
    };
    let defect = st.exactness_defect();
    if defect > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "stencil of order {d} fails polynomial exactness by {defect:e}"
        )));
    }
    Ok(st)
}

/// Periodic circulant `D[i, (i+k) mod g] = c_{d,k}/h`.
pub fn derivative_matrix(grid: &GridSpec) -> Result<DMatrix<f64>> {
    grid.validate("derivative grid")?;
    let st = stencil(grid.d)?;
    let g = grid.g as isize;
    let d = grid.d as isize;
    let mut m = DMatrix::<f64>::zeros(grid.g, grid.g);
    for i in 0..g {
        for k in -d..=d {
            if k != 0 {
                m[(i as usize, (i + k).rem_euclid(g) as usize)] += st.coeff(k) / grid.h;
            }
        }
    }
    Ok(m)
}

/// Hermitian generator `K = −iD` on a single register.
pub fn momentum_matrix(grid: &GridSpec) -> Result<CMat> {
    Ok(derivative_matrix(grid)?.map(|v| -I * v))
}

fn embed_single(dims: &[usize], axis: usize, m: &CMat) -> CMat {
    let left: usize = dims[..axis].iter().product();
    let right: usize = dims[axis + 1..].iter().product();
    kron(
        &kron(&CMat::identity(left, left), m),
        &CMat::identity(right, right),
    )
}

/// Dense `D` on the register holding `v`, identity elsewhere.
pub fn derivative_operator(spec: &PhaseSpaceSpec, v: Variable) -> Result<CMat> {
    let layout = spec.layout();
    let axis = layout.axis(v)?;
    check_dim(layout.total(), "dense derivative operator")?;
    let d = derivative_matrix(spec.grid(v)?)?.map(c);
    Ok(embed_single(&layout.dims, axis, &d))
}

/// Full-layout diagonal of a pointwise function.
pub fn diagonal<F: Fn(&PhasePoint) -> f64>(spec: &PhaseSpaceSpec, f: F) -> Vec<f64> {
    let layout = spec.layout();
    (0..layout.total())
        .map(|i| f(&spec.point(&unravel(i, &layout.dims))))
        .collect()
}

/// Values of `f` over the registers `axes` (in the listed order), other
/// registers held at digit zero. Valid only when `f` ignores those registers.
pub fn reduced_diagonal<F: Fn(&PhasePoint) -> f64>(
    spec: &PhaseSpaceSpec,
    axes: &[usize],
    f: F,
) -> Vec<f64> {
    let layout = spec.layout();
    let dims: Vec<usize> = axes.iter().map(|&a| layout.dims[a]).collect();
    let count: usize = dims.iter().product();
    let mut digits = vec![0usize; layout.dims.len()];
    (0..count)
        .map(|i| {
            for (&a, &k) in axes.iter().zip(unravel(i, &dims).iter()) {
                digits[a] = k;
            }
            f(&spec.point(&digits))
        })
        .collect()
}

/// Diagonals of the classical partial derivatives over the full layout.
#[derive(Clone, Debug)]
pub struct ClassicalPartials {
    pub dx: Vec<(Variable, Vec<f64>)>,
    pub dp: Vec<(Variable, Vec<f64>)>,
    pub ds: Option<Vec<f64>>,
    pub dps: Option<Vec<f64>>,
}

pub fn classical_partials(spec: &PhaseSpaceSpec) -> Result<ClassicalPartials> {
    spec.validate()?;
    let mut dx = Vec::new();
    let mut dp = Vec::new();
    for n in 0..spec.n_nuclei {
        for j in 0..spec.spatial_dim {
            dx.push((
                Variable::X { n, j },
                diagonal(spec, |pt| spec.dh_dx(pt, n, j)),
            ));
            dp.push((
                Variable::P { n, j },
                diagonal(spec, |pt| spec.dh_dp(pt, n, j)),
            ));
        }
    }
    let (ds, dps) = match spec.ensemble {
        Ensemble::Nvt => (
            Some(diagonal(spec, |pt| spec.dh_ds(pt))),
            Some(diagonal(spec, |pt| spec.dh_dps(pt))),
        ),
        Ensemble::Nve => (None, None),
    };
    Ok(ClassicalPartials { dx, dp, ds, dps })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Exact dilation of a real diagonal with `α = max|v|`.
pub fn diagonal_encoding(values: &[f64]) -> Result<BlockEncoding> {
    let alpha = max_abs(values);
    if alpha == 0.0 {
        return Err(Error::InvalidArgument(
            "cannot encode an identically zero diagonal".into(),
        ));
    }
    let m = CMat::from_diagonal(&CVec::from_iterator(
        values.len(),
        values.iter().map(|&v| c(v)),
    ));
    bea::dilate(&m, alpha)
}

/// Exact dilation of `K = −iD` with `α = Σ|c|/h`.
pub fn momentum_encoding(grid: &GridSpec) -> Result<BlockEncoding> {
    let k = momentum_matrix(grid)?;
    bea::dilate(&k, stencil(grid.d)?.l1() / grid.h)
}

/// One Liouvillian term `sign · K_{axis} ⊗ V(deps)`.
pub struct LiouvillianTerm {
    pub sign: f64,
    pub derivative_axis: usize,
    pub diagonal_axes: Vec<usize>,
    pub values: Vec<f64>,
}

impl LiouvillianTerm {
    pub fn encode(&self, spec: &PhaseSpaceSpec, dims: &[usize]) -> Result<BlockEncoding> {
        let layout = spec.layout();
        let grid = spec.grid(layout.axes[self.derivative_axis])?;
        let kb = momentum_encoding(grid)?;
        let vb = diagonal_encoding(&self.values)?;
        bea::disjoint_product(
            dims,
            &[(&kb, &[self.derivative_axis]), (&vb, &self.diagonal_axes)],
        )
    }

    pub fn dense(&self, spec: &PhaseSpaceSpec, dims: &[usize]) -> Result<CMat> {
        let layout = spec.layout();
        let k = momentum_matrix(spec.grid(layout.axes[self.derivative_axis])?)?;
        let total: usize = dims.iter().product();
        let kfull = embed_single(dims, self.derivative_axis, &k);
        let sub: Vec<usize> = self.diagonal_axes.iter().map(|&a| dims[a]).collect();
        let diag: Vec<C64> = (0..total)
            .map(|i| {
                let digits = unravel(i, dims);
                let local: Vec<usize> = self.diagonal_axes.iter().map(|&a| digits[a]).collect();
                c(self.sign * self.values[ravel(&local, &sub)])
            })
            .collect();
        let mut out = kfull;
        for (r, mut row) in out.row_iter_mut().enumerate() {
            row *= diag[r];
        }
        Ok(out)
    }
}

/// Terms of `L_cl = Σ K_x ⊗ ∂H/∂p' − ∂H/∂x ⊗ K_p + K_s ⊗ ∂H/∂p_s − ∂H/∂s ⊗ K_{p_s}`,
/// skipping identically vanishing diagonals.
pub fn classical_terms(spec: &PhaseSpaceSpec) -> Result<Vec<LiouvillianTerm>> {
    spec.validate()?;
    let layout = spec.layout();
    let x_axes = spec.position_axes();
    let nvt = spec.ensemble == Ensemble::Nvt;
    let s_axis = if nvt {
        Some(layout.axis(Variable::S)?)
    } else {
        None
    };
    let ps_axis = if nvt {
        Some(layout.axis(Variable::Ps)?)
    } else {
        None
    };
    let mut terms = Vec::new();
    for n in 0..spec.n_nuclei {
        for j in 0..spec.spatial_dim {
            let xa = layout.axis(Variable::X { n, j })?;
            let pa = layout.axis(Variable::P { n, j })?;
            let mut deps = vec![pa];
            deps.extend(s_axis);
            terms.push(LiouvillianTerm {
                sign: 1.0,
                derivative_axis: xa,
                values: reduced_diagonal(spec, &deps, |pt| spec.dh_dp(pt, n, j)),
                diagonal_axes: deps,
            });
            terms.push(LiouvillianTerm {
                sign: -1.0,
                derivative_axis: pa,
                values: reduced_diagonal(spec, &x_axes, |pt| spec.dh_dx(pt, n, j)),
                diagonal_axes: x_axes.clone(),
            });
        }
    }
    if let (Some(sa), Some(psa)) = (s_axis, ps_axis) {
        terms.push(LiouvillianTerm {
            sign: 1.0,
            derivative_axis: sa,
            values: reduced_diagonal(spec, &[psa], |pt| spec.dh_dps(pt)),
            diagonal_axes: vec![psa],
        });
        let mut deps: Vec<usize> = (0..spec.n_nuclei * spec.spatial_dim)
            .map(|k| {
                layout.axis(Variable::P {
                    n: k / spec.spatial_dim,
                    j: k % spec.spatial_dim,
                })
            })
            .collect::<Result<_>>()?;
        deps.push(sa);
        terms.push(LiouvillianTerm {
            sign: -1.0,
            derivative_axis: psa,
            values: reduced_diagonal(spec, &deps, |pt| spec.dh_ds(pt)),
            diagonal_axes: deps,
        });
    }
    terms.retain(|t| max_abs(&t.values) > 0.0);
    Ok(terms)
}

/// Block encoding of the classical Liouvillian as an LCU of Hermitian
/// products on disjoint registers. The result is a Hermitian unitary.
pub fn classical_liouvillian(spec: &PhaseSpaceSpec) -> Result<BlockEncoding> {
    let terms = classical_terms(spec)?;
    let dims = spec.layout().dims;
    if terms.is_empty() {
        let n: usize = dims.iter().product();
        let mut z = bea::dilate(&CMat::zeros(n, n), 1.0)?;
        z.alpha = 1.0;
        return Ok(z);
    }
    let encs: Vec<BlockEncoding> = terms
        .iter()
        .map(|t| t.encode(spec, &dims))
        .collect::<Result<_>>()?;
    let coeffs: Vec<C64> = terms.iter().map(|t| c(t.sign)).collect();
    bea::lcu_weighted(&coeffs, &encs)
}

/// Dense `L_cl` from the same terms, for verification.
pub fn classical_liouvillian_dense(spec: &PhaseSpaceSpec) -> Result<CMat> {
    let dims = spec.layout().dims;
    let n: usize = dims.iter().product();
    check_dim(n, "dense Liouvillian")?;
    let mut l = CMat::zeros(n, n);
    for t in classical_terms(spec)? {
        l += t.dense(spec, &dims)?;
    }
    Ok(l)
}

/// Diagonal encoding of a function of the registers `axes`, embedded in the full layout.
pub fn embedded_diagonal(
    spec: &PhaseSpaceSpec,
    axes: &[usize],
    values: &[f64],
) -> Result<BlockEncoding> {
    let dims = spec.layout().dims;
    if max_abs(values) == 0.0 {
        let n: usize = dims.iter().product();
        return bea::dilate(&CMat::zeros(n, n), 1.0);
    }
    diagonal_encoding(values)?.embed(&dims, axes)
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

/// Diagonal encoding of `H_kin`.
pub fn kinetic_hamiltonian(spec: &PhaseSpaceSpec) -> Result<BlockEncoding> {
    spec.validate()?;
    let axes = kinetic_axes(spec)?;
    let values = reduced_diagonal(spec, &axes, |pt| spec.kinetic(pt));
    embedded_diagonal(spec, &axes, &values)
}

/// Diagonal encoding of `H_pot`.
pub fn potential_hamiltonian(spec: &PhaseSpaceSpec) -> Result<BlockEncoding> {
    spec.validate()?;
    let axes = spec.position_axes();
    let values = reduced_diagonal(spec, &axes, |pt| spec.potential(pt));
    embedded_diagonal(spec, &axes, &values)
}

/// Per-axis parameters of a Gaussian phase-space density.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianAxis {
    pub center: f64,
    pub width: f64,
}

/// Normalized amplitude vector over a phase-space layout.
#[derive(Clone, Debug)]
pub struct KvNState {
    pub amplitudes: CVec,
    pub layout: Layout,
}

impl KvNState {
    pub fn new(amplitudes: CVec, layout: Layout) -> Result<Self> {
        if amplitudes.len() != layout.total() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for a layout of size {}",
                amplitudes.len(),
                layout.total()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "state norm {norm} differs from 1"
            )));
        }
        Ok(KvNState { amplitudes, layout })
    }

    /// Computational basis state at the given register digits.
    pub fn basis(spec: &PhaseSpaceSpec, digits: &[usize]) -> Result<Self> {
        let layout = spec.layout();
        if digits.len() != layout.dims.len() || digits.iter().zip(&layout.dims).any(|(d, g)| d >= g)
        {
            return Err(Error::InvalidArgument(format!(
                "digits {digits:?} outside layout {:?}",
                layout.dims
            )));
        }
        let mut v = CVec::zeros(layout.total());
        v[ravel(digits, &layout.dims)] = c(1.0);
        KvNState::new(v, layout)
    }

    /// Amplitudes `√ρ` of the product Gaussian density `ρ ∝ Π exp(−(v−c)²/(2w²))`,
    /// with one axis entry per layout register.
    pub fn gaussian(spec: &PhaseSpaceSpec, axes: &[GaussianAxis]) -> Result<Self> {
        let layout = spec.layout();
        if axes.len() != layout.axes.len() {
            return Err(Error::Dimension(format!(
                "{} Gaussian axes for {} registers",
                axes.len(),
                layout.axes.len()
            )));
        }
        if axes.iter().any(|a| !(a.width > 0.0)) {
            return Err(Error::InvalidArgument(
                "Gaussian widths must be positive".into(),
            ));
        }
        let factors: Vec<Vec<f64>> = layout
            .axes
            .iter()
            .zip(axes)
            .map(|(&v, a)| {
                let g = spec.grid(v)?;
                Ok(g.values()
                    .iter()
                    .map(|&x| (-(x - a.center).powi(2) / (4.0 * a.width * a.width)).exp())
                    .collect())
            })
            .collect::<Result<_>>()?;
        let mut v = CVec::zeros(layout.total());
        for i in 0..layout.total() {
            let digits = unravel(i, &layout.dims);
            v[i] = c(digits
                .iter()
                .enumerate()
                .map(|(a, &k)| factors[a][k])
                .product());
        }
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument(
                "Gaussian density vanishes on the grid".into(),
            ));
        }
        KvNState::new(v / c(norm), layout)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Probability of each digit on one register.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.layout.dims[axis]];
        for (i, a) in self.amplitudes.iter().enumerate() {
            m[unravel(i, &self.layout.dims)[axis]] += a.norm_sqr();
        }
        m
    }

    /// `Σ ρ·value` on one register, normalized by the total probability.
    pub fn expectation(&self, spec: &PhaseSpaceSpec, axis: usize) -> Result<f64> {
        let grid = spec.grid(self.layout.axes[axis])?;
        let m = self.marginal(axis);
        let total: f64 = m.iter().sum();
        Ok(m.iter()
            .enumerate()
            .map(|(k, p)| p * grid.value(k))
            .sum::<f64>()
            / total)
    }

    pub fn distance(&self, other: &KvNState) -> f64 {
        (&self.amplitudes - &other.amplitudes).norm()
    }
}

/// Inner product helper over amplitude vectors.
pub fn overlap(a: &KvNState, b: &KvNState) -> C64 {
    a.amplitudes
        .iter()
        .zip(b.amplitudes.iter())
        .fold(ZERO, |s, (x, y)| s + x.conj() * y)
}

/// One row of a finite-difference convergence scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub g: usize,
    pub h: f64,
    pub d: usize,
    /// Max-norm error of the sampled periodic derivative of `sin(kx)`.
    pub error: f64,
    /// Error model `k^{2d+1}·(e h/2)^{2d}`.
    pub model: f64,
}

/// Sampled derivative error of `sin(kx)` on periodic grids `h = 2π/g`.
pub fn derivative_scan(grid_points: &[usize], orders: &[usize], k: usize) -> Result<Vec<ScanRow>> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "scan frequency must be at least 1".into(),
        ));
    }
    let kf = k as f64;
    let mut rows = Vec::new();
    for &g in grid_points {
        let h = 2.0 * std::f64::consts::PI / g as f64;
        let xs: Vec<f64> = (0..g).map(|m| m as f64 * h).collect();
        let f = DVector::from_iterator(g, xs.iter().map(|&x| (kf * x).sin()));
        for &d in orders {
            let dm = derivative_matrix(&GridSpec::new(g, h, d))?;
            let df = &dm * &f;
            let error = xs
                .iter()
                .zip(df.iter())
                .map(|(&x, &v)| (v - kf * (kf * x).cos()).abs())
                .fold(0.0, f64::max);
            let model =
                kf.powi(2 * d as i32 + 1) * (std::f64::consts::E * h / 2.0).powi(2 * d as i32);
            rows.push(ScanRow {
                g,
                h,
                d,
                error,
                model,
            });
        }
    }
    Ok(rows)
}

/// Least-squares slope of `ys` against `xs`.
pub fn fitted_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Slope of `ln(error)` against `d` at one grid, next to the model slope `−2 ln(2/(e k h))`.
pub fn order_slope(rows: &[ScanRow], g: usize, k: usize) -> Option<(f64, f64)> {
    let sel: Vec<&ScanRow> = rows.iter().filter(|r| r.g == g).collect();
    if sel.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = sel.iter().map(|r| r.d as f64).collect();
    let ys: Vec<f64> = sel.iter().map(|r| r.error.ln()).collect();
    let h = sel[0].h;
    let model = -2.0 * (2.0 / (std::f64::consts::E * k as f64 * h)).ln();
    Some((fitted_slope(&xs, &ys), model))
}

/// Slope of `ln(error)` against `ln(h)` at one order; the model exponent is `2d`.
pub fn step_slope(rows: &[ScanRow], d: usize) -> Option<f64> {
    let sel: Vec<&ScanRow> = rows.iter().filter(|r| r.d == d).collect();
    if sel.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = sel.iter().map(|r| r.h.ln()).collect();
    let ys: Vec<f64> = sel.iter().map(|r| r.error.ln()).collect();
    Some(fitted_slope(&xs, &ys))
}
