//! Classical QSP phase finding.
//!
//! Convention: `W(x) = e^{i·arccos(x)·X}`, `U_Φ(x) = e^{iφ₀Z} Π_j W(x) e^{iφ_jZ}`
//! with symmetric phases, so that `Im⟨0|U_Φ(x)|0⟩` equals a real target
//! polynomial of definite parity. Phases are found by Newton iteration on
//! the `⌈(d+1)/2⌉` free phases at the positive Chebyshev nodes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::qsvt::poly::{clenshaw, Parity};

pub const MAX_DEGREE: usize = 512;
pub const PHASE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy)]
struct M2([Complex64; 4]);

impl M2 {
    fn identity() -> Self {
        M2([
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ])
    }
    fn mul(&self, o: &M2) -> M2 {
        let a = &self.0;
        let b = &o.0;
        M2([
            a[0] * b[0] + a[1] * b[2],
            a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3],
        ])
    }
    fn w(x: f64) -> M2 {
        let s = (1.0 - x * x).max(0.0).sqrt();
        M2([
            Complex64::new(x, 0.0),
            Complex64::new(0.0, s),
            Complex64::new(0.0, s),
            Complex64::new(x, 0.0),
        ])
    }
    fn e(phi: f64) -> M2 {
        M2([
            Complex64::new(phi.cos(), phi.sin()),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(phi.cos(), -phi.sin()),
        ])
    }
}

/// `⟨0|U_Φ(x)|0⟩` for a full phase list.
pub fn qsp_response(phases: &[f64], x: f64) -> Complex64 {
    let w = M2::w(x);
    let mut u = M2::e(phases[0]);
    for &p in &phases[1..] {
        u = u.mul(&w).mul(&M2::e(p));
    }
    u.0[0]
}

fn expand(free: &[f64], d: usize) -> Vec<f64> {
    let mut phi = vec![0.0; d + 1];
    for (j, &p) in free.iter().enumerate() {
        phi[j] = p;
        phi[d - j] = p;
    }
    phi
}

/// Residuals `Im P(x_k) − f(x_k)` and the Jacobian with respect to the free phases.
fn residual_and_jacobian(
    free: &[f64],
    d: usize,
    nodes: &[f64],
    targets: &[f64],
) -> (Vec<f64>, DMatrix<f64>) {
    let phi = expand(free, d);
    let m = free.len();
    let mut res = vec![0.0; nodes.len()];
    let mut jac = DMatrix::<f64>::zeros(nodes.len(), m);
    let mut prefix = vec![M2::identity(); d + 1];
    let mut suffix = vec![M2::identity(); d + 1];
    for (k, &x) in nodes.iter().enumerate() {
        let w = M2::w(x);
        for j in 0..d {
            prefix[j + 1] = prefix[j].mul(&M2::e(phi[j])).mul(&w);
        }
        for j in (0..d).rev() {
            suffix[j] = w.mul(&M2::e(phi[j + 1])).mul(&suffix[j + 1]);
        }
        let full = prefix[d].mul(&M2::e(phi[d]));
        res[k] = full.0[0].im - targets[k];
        for j in 0..=d {
            let l = &prefix[j].0;
            let r = &suffix[j].0;
            let e0 = Complex64::new(0.0, 1.0) * Complex64::new(phi[j].cos(), phi[j].sin());
            let e1 = Complex64::new(0.0, -1.0) * Complex64::new(phi[j].cos(), -phi[j].sin());
            let dv = l[0] * e0 * r[0] + l[1] * e1 * r[2];
            let col = if j < m { j } else { d - j };
            jac[(k, col)] += dv.im;
        }
    }
    (res, jac)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Result of phase finding.
#[derive(Clone, Debug)]
pub struct QspPhases {
    pub phases: Vec<f64>,
    pub degree: usize,
    pub residual: f64,
}

/// Symmetric W-convention phases with `Im⟨0|U_Φ(x)|0⟩ = Σ c_k T_k(x)`.
pub fn find_phases(coeffs: &[f64]) -> Result<QspPhases> {
    let d = coeffs.len().saturating_sub(1);
    if d > MAX_DEGREE {
        return Err(Error::PhaseFinding(format!(
            "degree {d} exceeds the cap {MAX_DEGREE}"
        )));
    }
    let parity = if d % 2 == 0 {
        Parity::Even
    } else {
        Parity::Odd
    };
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    for (k, c) in coeffs.iter().enumerate() {
        if k % 2 != d % 2 && c.abs() > 1e-14 * scale.max(1.0) {
            return Err(Error::PhaseFinding(format!(
                "coefficient list of degree {d} is not of {parity:?} parity"
            )));
        }
    }
    if d == 0 {
        let c0 = coeffs.first().cloned().unwrap_or(0.0);
        if c0.abs() > 1.0 {
            return Err(Error::PhaseFinding(format!(
                "constant {c0} exceeds 1 in magnitude"
            )));
        }
        return Ok(QspPhases {
            phases: vec![c0.asin()],
            degree: 0,
            residual: 0.0,
        });
    }
    let leading = coeffs[d];
    if (leading.abs() - 1.0).abs() < 1e-14 && coeffs[..d].iter().all(|c| c.abs() < 1e-15) {
        let edge = leading.signum() * PI / 4.0;
        let mut phases = vec![0.0; d + 1];
        phases[0] = edge;
        phases[d] = edge;
        return Ok(QspPhases {
            phases,
            degree: d,
            residual: 0.0,
        });
    }
    let m = (d + 2) / 2;
    let nodes: Vec<f64> = (1..=m)
        .map(|k| ((2 * k - 1) as f64 * PI / (4 * m) as f64).cos())
        .collect();
    let targets: Vec<f64> = nodes.iter().map(|&x| clenshaw(coeffs, x)).collect();
    let mut free: Vec<f64> = (0..m)
        .map(|j| {
            let idx = d - 2 * j;
            if idx == 0 {
                coeffs[0]
            } else {
                coeffs[idx] / 2.0
            }
        })
        .collect();
    let (mut res, mut jac) = residual_and_jacobian(&free, d, &nodes, &targets);
    let mut err = max_abs(&res);
    let mut iterations = 0;
    while err > 1e-14 && iterations < 200 {
        iterations += 1;
        let rhs = DVector::from_iterator(m, res.iter().map(|r| -r));
        let step = match jac.clone().lu().solve(&rhs) {
            Some(s) => s,
            None => return Err(Error::PhaseFinding("singular Jacobian".into())),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = free
                .iter()
                .zip(step.iter())
                .map(|(f, s)| f + t * s)
                .collect();
            let (r2, j2) = residual_and_jacobian(&trial, d, &nodes, &targets);
            let e2 = max_abs(&r2);
            if e2 < err || e2 < 1e-14 {
                free = trial;
                res = r2;
                jac = j2;
                err = e2;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let phases = expand(&free, d);
    let check = (0..(4 * d + 16))
        .map(|k| -1.0 + 2.0 * k as f64 / (4 * d + 15) as f64)
        .chain(nodes.iter().cloned())
        .map(|x| (qsp_response(&phases, x).im - clenshaw(coeffs, x)).abs())
        .fold(0.0, f64::max);
    if check > PHASE_TOLERANCE {
        return Err(Error::PhaseFinding(format!(
            "reconstruction error {check:.3e} above tolerance after {iterations} iterations (degree {d})"
        )));
    }
    Ok(QspPhases {
        phases,
        degree: d,
        residual: check,
    })
}

/// Convert W-convention phases to the reflection convention used by the circuit:
/// `P_W = i^d · p_R` with `R(x) = −i e^{iπ/4 Z} W(x) e^{iπ/4 Z}`.
pub fn to_reflection_convention(phases: &[f64]) -> Vec<f64> {
    let d = phases.len() - 1;
    if d == 0 {
        return phases.to_vec();
    }
    phases
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            if j == 0 || j == d {
                p - PI / 4.0
            } else {
                p - PI / 2.0
            }
        })
        .collect()
}
