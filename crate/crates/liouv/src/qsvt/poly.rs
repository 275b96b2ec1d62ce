//! Chebyshev-basis polynomials and the approximations used by QSVT.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use statrs::function::erf::{erf, erfc_inv};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    None,
}

#[derive(Clone, Debug)]
pub struct ChebyshevPolynomial {
    pub coefficients: Vec<f64>,
    pub degree: usize,
    pub parity: Parity,
    pub sup_bound: f64,
}

/// Clenshaw evaluation of `Σ c_k T_k(x)`.
pub fn clenshaw(coeffs: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    coeffs.first().cloned().unwrap_or(0.0) + x * b1 - b2
}

/// Chebyshev points of the first kind, `n` of them.
pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| (PI * (j as f64 + 0.5) / n as f64).cos())
        .collect()
}

/// Interpolation coefficients of `f` at `n` first-kind Chebyshev nodes (degree `n−1`).
pub fn interpolate<F: Fn(f64) -> f64>(f: F, n: usize) -> Vec<f64> {
    let nodes = chebyshev_nodes(n);
    let values: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
    let mut coeffs = vec![0.0; n];
    for (&x, &v) in nodes.iter().zip(&values) {
        let mut t_prev = 1.0;
        let mut t_cur = x;
        coeffs[0] += v;
        if n > 1 {
            coeffs[1] += v * x;
        }
        for ck in coeffs.iter_mut().skip(2) {
            let t_next = 2.0 * x * t_cur - t_prev;
            *ck += v * t_next;
            t_prev = t_cur;
            t_cur = t_next;
        }
    }
    for (k, ck) in coeffs.iter_mut().enumerate() {
        *ck *= if k == 0 { 1.0 } else { 2.0 } / n as f64;
    }
    coeffs
}

fn detect_parity(coeffs: &[f64]) -> Parity {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-15 * scale;
    let odd_zero = coeffs.iter().skip(1).step_by(2).all(|c| c.abs() <= tol);
    let even_zero = coeffs.iter().step_by(2).all(|c| c.abs() <= tol);
    if odd_zero {
        Parity::Even
    } else if even_zero {
        Parity::Odd
    } else {
        Parity::None
    }
}

impl ChebyshevPolynomial {
    pub fn new(mut coefficients: Vec<f64>) -> Self {
        while coefficients.len() > 1 && *coefficients.last().unwrap() == 0.0 {
            coefficients.pop();
        }
        if coefficients.is_empty() {
            coefficients.push(0.0);
        }
        let parity = detect_parity(&coefficients);
        match parity {
            Parity::Even => coefficients
                .iter_mut()
                .skip(1)
                .step_by(2)
                .for_each(|c| *c = 0.0),
            Parity::Odd => coefficients.iter_mut().step_by(2).for_each(|c| *c = 0.0),
            Parity::None => {}
        }
        let degree = coefficients.len() - 1;
        let mut p = ChebyshevPolynomial {
            coefficients,
            degree,
            parity,
            sup_bound: 0.0,
        };
        p.sup_bound = p.sampled_sup();
        p
    }

    /// `T_k`.
    pub fn chebyshev_t(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Self::new(c)
    }

    pub fn from_function<F: Fn(f64) -> f64>(f: F, degree: usize) -> Self {
        Self::new(interpolate(f, degree + 1))
    }

    pub fn eval(&self, x: f64) -> f64 {
        clenshaw(&self.coefficients, x)
    }

    /// Maximum of `|p|` on a Chebyshev grid of `10·D` points plus the endpoints.
    pub fn sampled_sup(&self) -> f64 {
        let n = (10 * self.degree).max(64);
        chebyshev_nodes(n)
            .into_iter()
            .chain([-1.0, 1.0, 0.0])
            .map(|x| self.eval(x).abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.coefficients.iter().map(|c| c * s).collect())
    }

    pub fn even_part(&self) -> Self {
        Self::new(
            self.coefficients
                .iter()
                .enumerate()
                .map(|(k, &c)| if k % 2 == 0 { c } else { 0.0 })
                .collect(),
        )
    }

    pub fn odd_part(&self) -> Self {
        Self::new(
            self.coefficients
                .iter()
                .enumerate()
                .map(|(k, &c)| if k % 2 == 1 { c } else { 0.0 })
                .collect(),
        )
    }

    /// Coefficients padded with zeros to the requested degree.
    pub fn padded(&self, degree: usize) -> Vec<f64> {
        let mut c = self.coefficients.clone();
        c.resize(degree.max(self.degree) + 1, 0.0);
        c
    }

    /// Sum of the absolute coefficients beyond index `r`.
    pub fn tail(coeffs: &[f64], r: usize) -> f64 {
        coeffs.iter().skip(r + 1).map(|c| c.abs()).sum()
    }
}

/// Chebyshev approximations of `cos(τx)` and `−sin(τx)` with
/// `|e^{−iτx} − (cos_part + i·sin_part)| ≤ eps` on `[−1, 1]`.
#[derive(Clone, Debug)]
pub struct ExpApproximation {
    pub cos_part: ChebyshevPolynomial,
    pub sin_part: ChebyshevPolynomial,
    pub degree: usize,
    pub sampled_error: f64,
}

impl ExpApproximation {
    pub fn eval(&self, x: f64) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.cos_part.eval(x), self.sin_part.eval(x))
    }
}

/// Printed Jacobi–Anger degree bound `2·αt + 3·ln(48(1+√2)/ε)`.
pub fn exp_degree_bound(alpha_t: f64, eps: f64) -> usize {
    (2.0 * alpha_t.abs() + 3.0 * (48.0 * (1.0 + 2f64.sqrt()) / eps).ln()).ceil() as usize
}

pub fn approx_exp(alpha_t: f64, eps: f64) -> Result<ExpApproximation> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    if !(alpha_t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha_t must be non-negative, got {alpha_t}"
        )));
    }
    if alpha_t == 0.0 {
        return Ok(ExpApproximation {
            cos_part: ChebyshevPolynomial::new(vec![1.0]),
            sin_part: ChebyshevPolynomial::new(vec![0.0]),
            degree: 0,
            sampled_error: 0.0,
        });
    }
    let bound = exp_degree_bound(alpha_t, eps);
    let n = 2 * bound + 64;
    let mut cos_c = interpolate(|x| (alpha_t * x).cos(), n);
    let mut sin_c = interpolate(|x| -(alpha_t * x).sin(), n);
    for k in (1..n).step_by(2) {
        cos_c[k] = 0.0;
    }
    for k in (0..n).step_by(2) {
        sin_c[k] = 0.0;
    }
    let mut r = 0;
    while r < n - 1
        && ChebyshevPolynomial::tail(&cos_c, r) + ChebyshevPolynomial::tail(&sin_c, r) > eps
    {
        r += 1;
    }
    loop {
        let cp = ChebyshevPolynomial::new(cos_c[..=r.min(n - 1)].to_vec());
        let sp = ChebyshevPolynomial::new(sin_c[..=r.min(n - 1)].to_vec());
        let grid = (0..1000)
            .map(|k| -1.0 + 2.0 * k as f64 / 999.0)
            .chain(chebyshev_nodes(10 * r.max(10)));
        let err = grid
            .map(|x| {
                let e = num_complex::Complex64::new((alpha_t * x).cos(), -(alpha_t * x).sin());
                (e - num_complex::Complex64::new(cp.eval(x), sp.eval(x))).norm()
            })
            .fold(0.0, f64::max);
        if err <= eps || r + 1 >= n {
            return Ok(ExpApproximation {
                degree: cp.degree.max(sp.degree),
                cos_part: cp,
                sin_part: sp,
                sampled_error: err,
            });
        }
        r += 1;
    }
}

fn sign_grid(gamma: f64, degree: usize) -> (Vec<f64>, Vec<f64>) {
    let n = (10 * degree).max(200);
    let outer: Vec<f64> = (0..=n)
        .map(|k| gamma + (1.0 - gamma) * (1.0 - (PI * k as f64 / n as f64).cos()) / 2.0)
        .collect();
    let inner: Vec<f64> = (0..=n / 2)
        .map(|k| gamma * k as f64 / (n / 2) as f64)
        .collect();
    (outer, inner)
}

/// Both sign-approximation clauses on sampled grids; returns the worst slack
/// (non-positive when both hold).
fn sign_violation(coeffs: &[f64], gamma: f64, xi: f64) -> f64 {
    let d = coeffs.len().saturating_sub(1);
    let (outer, inner) = sign_grid(gamma, d);
    let mut worst = f64::NEG_INFINITY;
    for &x in &outer {
        let v = clenshaw(coeffs, x);
        worst = worst.max((v - 1.0).abs() - xi).max(v.abs() - 1.0);
    }
    for &x in &inner {
        worst = worst.max(clenshaw(coeffs, x).abs() - 1.0);
    }
    worst
}

/// Truncated, rescaled Chebyshev series of `erf(kx)` at odd degree `d`.
fn erf_candidate(k: f64, d: usize, xi: f64) -> Vec<f64> {
    let n = (2 * d + 64).max((8.0 * k) as usize + 64);
    let mut c = interpolate(|x| erf(k * x), n);
    c.truncate(d + 1);
    for (j, cj) in c.iter_mut().enumerate() {
        if j % 2 == 0 {
            *cj = 0.0;
        }
    }
    let p = ChebyshevPolynomial::new(c.clone());
    let s = p.sampled_sup();
    let cap = 1.0 - xi / 4.0;
    if s > cap {
        c.iter_mut().for_each(|x| *x *= cap / s);
    }
    c
}

fn sign_degree_passes(gamma: f64, xi: f64, d: usize, k0: f64) -> Option<Vec<f64>> {
    let ks: Vec<f64> = (0..16)
        .map(|i| k0 * (0.25f64).powf(1.0 - i as f64 / 12.0))
        .collect();
    for &k in &ks {
        let c = erf_candidate(k, d, xi);
        if sign_violation(&c, gamma, xi) <= 0.0 {
            return Some(c);
        }
    }
    None
}

static SIGN_CACHE: Mutex<Option<HashMap<(u64, u64), Vec<f64>>>> = Mutex::new(None);

/// Odd polynomial with `|S| ≤ 1` on `[−1, 1]` and `|S − sign| ≤ ξ` on `|x| ≥ γ`,
/// built from a truncated `erf(kx)` series with the smallest passing degree.
pub fn approx_sign(gamma: f64, xi: f64) -> Result<ChebyshevPolynomial> {
    if !(gamma > 0.0 && gamma < 1.0) || !(xi > 0.0 && xi < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "approx_sign needs 0<gamma<1 and 0<xi<1, got gamma={gamma}, xi={xi}"
        )));
    }
    let key = (gamma.to_bits(), xi.to_bits());
    if let Some(c) = SIGN_CACHE
        .lock()
        .unwrap()
        .as_ref()
        .and_then(|m| m.get(&key).cloned())
    {
        return Ok(ChebyshevPolynomial::new(c));
    }
    if sign_violation(&[0.0, 1.0], gamma, xi) <= 0.0 {
        return Ok(store_sign(key, vec![0.0, 1.0]));
    }
    let k0 = erfc_inv(xi / 2.0) / gamma;
    let mut hi = 1usize;
    let mut best = None;
    while hi <= 4097 {
        if let Some(c) = sign_degree_passes(gamma, xi, hi, k0) {
            best = Some(c);
            break;
        }
        hi = 2 * hi + 1;
    }
    let mut best = best.ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no sign polynomial found for gamma={gamma}, xi={xi}"
        ))
    })?;
    let mut lo = hi / 2;
    while hi - lo > 2 {
        let mid = {
            let m = (lo + hi) / 2;
            if m % 2 == 0 {
                m + 1
            } else {
                m
            }
        };
        if mid >= hi {
            break;
        }
        match sign_degree_passes(gamma, xi, mid, k0) {
            Some(c) => {
                hi = mid;
                best = c;
            }
            None => lo = mid,
        }
    }
    Ok(store_sign(key, best))
}

fn store_sign(key: (u64, u64), c: Vec<f64>) -> ChebyshevPolynomial {
    let mut guard = SIGN_CACHE.lock().unwrap();
    guard
        .get_or_insert_with(HashMap::new)
        .insert(key, c.clone());
    ChebyshevPolynomial::new(c)
}

/// Sampled check of both sign clauses; true when they hold.
pub fn sign_clauses_hold(p: &ChebyshevPolynomial, gamma: f64, xi: f64) -> bool {
    let grid: Vec<f64> = (0..=20000)
        .map(|k| -1.0 + 2.0 * k as f64 / 20000.0)
        .collect();
    grid.iter().all(|&x| {
        let v = p.eval(x);
        v.abs() <= 1.0 + 1e-12 && (x.abs() < gamma || (v - x.signum()).abs() <= xi + 1e-12)
    })
}
