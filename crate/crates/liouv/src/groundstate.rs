//! Ground-state preparation with a sign-polynomial reflector and amplitude
//! amplification, optionally controlled on a position register.
//!
//! The controlled form acts on `[extra | reflector ancilla | x | el]` where
//! `x` selects a block `H(x)` of a block-diagonal Hamiltonian.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;

use crate::bea::{self, BlockEncoding};
use crate::error::{Error, Result};
use crate::linalg::{
    self, c, eigh, random_unit_vector, unitary_with_first_column, CMat, CVec, C64, ONE, ZERO,
};
use crate::ops::{self, BlockDiag, Dense, Diagonal, Local, OpRef, Phased, Sequence};
use crate::qsvt::{approx_sign, eigen_transform, ChebyshevPolynomial, Mode};

#[derive(Clone, Debug, PartialEq)]
pub struct GroundStateConfig {
    pub mu: f64,
    pub gamma: f64,
    pub delta: f64,
    pub eps_prep: f64,
}

impl GroundStateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gap gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "overlap delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if !(self.eps_prep > 0.0 && self.eps_prep < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "eps_prep must lie in (0, 1), got {}",
                self.eps_prep
            )));
        }
        Ok(())
    }

    /// Check `E₀ ≤ μ − γ/2` and `E₁ ≥ μ + γ/2` against a dense spectrum.
    pub fn check_gap(&self, h: &CMat) -> Result<()> {
        let (e, _) = eigh(h);
        if e.len() < 2 {
            return Ok(());
        }
        if e[0] > self.mu - self.gamma / 2.0 + 1e-12 || e[1] < self.mu + self.gamma / 2.0 - 1e-12 {
            return Err(Error::Hypothesis(format!(
                "spectrum E0 = {}, E1 = {} does not bracket mu = {} with gap {}",
                e[0], e[1], self.mu, self.gamma
            )));
        }
        Ok(())
    }

    /// `(μ, γ)` from a set of spectra: μ mid-gap of the worst case, γ half the smallest gap.
    pub fn from_spectra(spectra: &[Vec<f64>], delta: f64, eps_prep: f64) -> Result<Self> {
        let e0 = spectra
            .iter()
            .map(|e| e[0])
            .fold(f64::NEG_INFINITY, f64::max);
        let e1 = spectra.iter().map(|e| e[1]).fold(f64::INFINITY, f64::min);
        if !(e1 > e0) {
            return Err(Error::Hypothesis(format!(
                "no common gap: largest ground energy {e0} vs smallest first excited {e1}"
            )));
        }
        Ok(GroundStateConfig {
            mu: 0.5 * (e0 + e1),
            gamma: 0.5 * (e1 - e0),
            delta,
            eps_prep,
        })
    }
}

/// Threshold of the sign polynomial in units of the shifted normalization `λ + |μ|`.
pub fn sign_threshold(lambda: f64, cfg: &GroundStateConfig) -> f64 {
    cfg.gamma / (4.0 * (lambda + cfg.mu.abs()))
}

/// Encoding of `Σ_{E≤μ}|ψ⟩⟨ψ| − Σ_{E>μ}|ψ⟩⟨ψ|` from an encoding of `H`.
pub fn reflector(
    be_h: &BlockEncoding,
    cfg: &GroundStateConfig,
    xi: f64,
    mode: Mode,
) -> Result<BlockEncoding> {
    cfg.validate()?;
    if be_h.epsilon > cfg.gamma / 4.0 {
        return Err(Error::Hypothesis(format!(
            "encoding error {} exceeds gamma/4 = {}",
            be_h.epsilon,
            cfg.gamma / 4.0
        )));
    }
    let n = be_h.target_dim;
    let shifted = if cfg.mu == 0.0 {
        be_h.clone()
    } else {
        bea::lcu_weighted(
            &[ONE, c(-cfg.mu)],
            &[be_h.clone(), BlockEncoding::identity(n)],
        )?
    };
    let gs = sign_threshold(be_h.alpha, cfg);
    if !(gs < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sign threshold {gs} must be below 1"
        )));
    }
    let sign = approx_sign(gs, xi)?;
    let neg = ChebyshevPolynomial::new(sign.coefficients.iter().map(|v| -v).collect());
    let out = eigen_transform(&shifted, &neg, mode)?;
    let transfer = 4.0 * neg.degree as f64 * (shifted.epsilon / shifted.alpha).sqrt();
    let residual = (out.epsilon - transfer).max(0.0);
    let eps = transfer + xi + residual;
    Ok(out.with_epsilon(eps))
}

/// Per-control-index initial states `|φ_init(x)⟩` on the electronic register.
#[derive(Clone, Debug)]
pub struct InitialStateOracle {
    pub states: Vec<CVec>,
}

impl InitialStateOracle {
    pub fn new(states: Vec<CVec>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidArgument(
                "initial-state oracle needs at least one state".into(),
            ));
        }
        let n = states[0].len();
        for (x, s) in states.iter().enumerate() {
            if s.len() != n {
                return Err(Error::Dimension(format!(
                    "state {x} has length {} instead of {n}",
                    s.len()
                )));
            }
            if (s.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "state {x} has norm {}",
                    s.norm()
                )));
            }
        }
        Ok(InitialStateOracle { states })
    }

    /// `δ·ψ₀ + √(1−δ²)·ψ⊥` with a random `ψ⊥` orthogonal to each ground state.
    pub fn planted<R: Rng>(ground: &[CVec], delta: f64, rng: &mut R) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "overlap {delta} outside (0, 1]"
            )));
        }
        let states = ground
            .iter()
            .map(|g| {
                let mut perp = random_unit_vector(rng, g.len());
                let proj = g.dotc(&perp);
                perp -= g * proj;
                let nrm = perp.norm();
                let perp = if nrm > 1e-12 {
                    perp / c(nrm)
                } else {
                    CVec::zeros(g.len())
                };
                let v = g * c(delta) + perp * c((1.0 - delta * delta).max(0.0).sqrt());
                let vn = v.norm();
                v / c(vn)
            })
            .collect();
        InitialStateOracle::new(states)
    }

    pub fn control_dim(&self) -> usize {
        self.states.len()
    }

    pub fn target_dim(&self) -> usize {
        self.states[0].len()
    }

    /// `|⟨ψ₀(x)|φ_init(x)⟩|` for each control index.
    pub fn overlaps(&self, ground: &[CVec]) -> Vec<f64> {
        self.states
            .iter()
            .zip(ground)
            .map(|(s, g)| g.dotc(s).norm())
            .collect()
    }

    /// Unitary on `[extra, el]` mapping `|0,0⟩ ↦ (cos β|0⟩ + sin β|1⟩) ⊗ |φ(x)⟩`.
    fn prep_block(&self, x: usize, beta: f64) -> CMat {
        let ry = CMat::from_row_slice(
            2,
            2,
            &[c(beta.cos()), c(-beta.sin()), c(beta.sin()), c(beta.cos())],
        );
        linalg::kron(&ry, &unitary_with_first_column(&self.states[x]))
    }
}

/// Amplified preparation `G` on `[extra | reflector ancilla | x | el]`.
pub struct GroundStatePreparation {
    pub op: OpRef,
    pub dims: [usize; 4],
    pub rounds: usize,
    pub estimated_overlaps: Vec<f64>,
    pub reflector_epsilon: f64,
    pub reflector_degree: usize,
    /// Queries to the Hamiltonian encoding made by one application of `G`.
    pub queries_h: usize,
    /// Queries to the initial-state oracle made by one application of `G`.
    pub queries_i: usize,
    /// Declared bound on the per-block infidelity.
    pub epsilon: f64,
}

impl GroundStatePreparation {
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Columns `G|0,0,x,0⟩` for every control index.
    pub fn output_columns(&self) -> CMat {
        let [_, _, xd, el] = self.dims;
        let mut input = CMat::zeros(self.dim(), xd);
        for x in 0..xd {
            input[(x * el, x)] = ONE;
        }
        self.op.apply(&input)
    }

    /// Electronic-register component with `extra = 0` and reflector ancilla `0`, per control index.
    pub fn prepared_states(&self) -> Vec<CVec> {
        let cols = self.output_columns();
        let [_, _, xd, el] = self.dims;
        (0..xd)
            .map(|x| CVec::from_iterator(el, (0..el).map(|e| cols[(x * el + e, x)])))
            .collect()
    }

    /// `|⟨ψ₀(x)|prepared(x)⟩|²` per control index.
    pub fn fidelities(&self, ground: &[CVec]) -> Vec<f64> {
        self.prepared_states()
            .iter()
            .zip(ground)
            .map(|(p, g)| g.dotc(p).norm_sqr())
            .collect()
    }
}

/// Round count that maps overlap `o` exactly onto the good subspace.
pub fn rounds_for_overlap(o: f64) -> usize {
    if o >= 1.0 - 1e-12 {
        return 0;
    }
    (PI / (4.0 * o.asin()) - 0.5).ceil().max(0.0) as usize
}

/// Round budget `ceil(π/(4·asin δ)) + 1`.
pub fn round_budget(delta: f64) -> usize {
    (PI / (4.0 * delta.asin())).ceil() as usize + 1
}

/// Ground-state preparation controlled on the leading `x_dim` factor of the target.
pub fn prepare_ground_state_superposed(
    be_hctrl: &BlockEncoding,
    x_dim: usize,
    cfg: &GroundStateConfig,
    oracle: &InitialStateOracle,
    mode: Mode,
) -> Result<GroundStatePreparation> {
    cfg.validate()?;
    if oracle.control_dim() != x_dim || x_dim * oracle.target_dim() != be_hctrl.target_dim {
        return Err(Error::Dimension(format!(
            "oracle has {} blocks of size {}, encoding target is {} with {x_dim} control values",
            oracle.control_dim(),
            oracle.target_dim(),
            be_hctrl.target_dim
        )));
    }
    let el = oracle.target_dim();
    let xi = cfg.delta * cfg.eps_prep / 2.0;
    let refl = reflector(be_hctrl, cfg, xi, mode)?;
    let r = refl.ancilla_dim;
    let degree = refl.queries / be_hctrl.queries.max(1);

    let mut probe = CMat::zeros(refl.dim(), x_dim);
    for x in 0..x_dim {
        for e in 0..el {
            probe[(x * el + e, x)] = oracle.states[x][e];
        }
    }
    let reflected = refl.op.apply(&probe);
    let estimated: Vec<f64> = (0..x_dim)
        .map(|x| {
            let mut ev = ZERO;
            for e in 0..el {
                ev += oracle.states[x][e].conj() * reflected[(x * el + e, x)];
            }
            ((1.0 + ev.re) / 2.0).clamp(0.0, 1.0).sqrt()
        })
        .collect();
    let worst = estimated.iter().cloned().fold(1.0, f64::min);
    if worst < cfg.delta - xi && cfg!(debug_assertions) {
        return Err(Error::GroundState(format!(
            "estimated overlap {worst:.6} is below the promised delta = {}",
            cfg.delta
        )));
    }
    if worst <= 0.0 {
        return Err(Error::GroundState(
            "initial state has no ground-state overlap".into(),
        ));
    }
    let k = if worst >= 1.0 - xi {
        0
    } else {
        rounds_for_overlap(worst)
    };
    let budget = round_budget(cfg.delta);
    if k > budget {
        return Err(Error::GroundState(format!(
            "amplification needs {k} rounds, above the budget {budget} for delta = {}",
            cfg.delta
        )));
    }
    let theta = PI / (2.0 * (2 * k + 1) as f64);
    let blocks: Vec<OpRef> = (0..x_dim)
        .map(|x| {
            let cb = (theta.sin() / estimated[x]).min(1.0);
            Dense::arc(oracle.prep_block(x, cb.acos()))
        })
        .collect();
    let dims = [2usize, r, x_dim, el];
    let prep_inner = BlockDiag::arc(blocks);
    let p = Local::arc(&dims, &[2, 0, 3], prep_inner);
    let p_adj: OpRef = Arc::new(ops::Adjoint(p.clone()));
    let total: usize = dims.iter().product();
    let inner = r * x_dim * el;
    let s_good = BlockDiag::arc(vec![
        Phased::arc(refl.op.clone(), c(-1.0)),
        Arc::new(ops::Identity(inner)),
    ]);
    let z0 = Diagonal::arc(
        (0..total)
            .map(|i| {
                let digits = linalg::unravel(i, &dims);
                if digits[0] == 0 && digits[1] == 0 && digits[3] == 0 {
                    ONE
                } else {
                    c(-1.0)
                }
            })
            .collect(),
    );
    let mut seq: Vec<OpRef> = vec![p.clone()];
    for _ in 0..k {
        seq.push(s_good.clone());
        seq.push(p_adj.clone());
        seq.push(z0.clone());
        seq.push(p.clone());
    }
    let op = Sequence::arc(seq);
    let state_err = k as f64 * 2.0 * refl.epsilon + xi;
    Ok(GroundStatePreparation {
        op,
        dims,
        rounds: k,
        estimated_overlaps: estimated,
        reflector_epsilon: refl.epsilon,
        reflector_degree: degree,
        queries_h: k * refl.queries,
        queries_i: 2 * k + 1,
        epsilon: (state_err * state_err).min(1.0),
    })
}

/// Uncontrolled preparation; returns the normalized prepared state and the circuit.
pub fn prepare_ground_state(
    be_h: &BlockEncoding,
    cfg: &GroundStateConfig,
    oracle: &InitialStateOracle,
    mode: Mode,
) -> Result<(CVec, GroundStatePreparation)> {
    let g = prepare_ground_state_superposed(be_h, 1, cfg, oracle, mode)?;
    let s = g.prepared_states().remove(0);
    let n = s.norm();
    Ok((s / C64::new(n, 0.0), g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, random_hermitian, spectral_norm};
    use crate::ops::Counting;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ground(h: &CMat) -> CVec {
        let (_, v) = eigh(h);
        linalg::first_column(&v)
    }

    #[test]
    fn two_level_reflector() {
        let h = diag_real(&[-1.0, 1.0]);
        let be = bea::dilate(&h, 1.0).unwrap();
        let cfg = GroundStateConfig {
            mu: 0.0,
            gamma: 2.0,
            delta: 0.5,
            eps_prep: 1e-3,
        };
        let r = reflector(&be, &cfg, 1e-6, Mode::Faithful).unwrap();
        assert!(spectral_norm(&(r.block() - diag_real(&[1.0, -1.0]))) < 1e-6);
    }

    #[test]
    fn three_level_reflector_in_eigenbasis() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = linalg::random_unitary(&mut rng, 3);
        let h = &u * diag_real(&[-0.9, -0.1, 0.5]) * u.adjoint();
        let be = bea::dilate(&h, 1.0).unwrap();
        let cfg = GroundStateConfig {
            mu: -0.5,
            gamma: 0.8,
            delta: 0.5,
            eps_prep: 1e-3,
        };
        cfg.check_gap(&h).unwrap();
        let xi = 1e-5;
        let r = reflector(&be, &cfg, xi, Mode::Faithful).unwrap();
        let want = &u * diag_real(&[1.0, -1.0, -1.0]) * u.adjoint();
        assert!(spectral_norm(&(r.block() - want)) <= r.epsilon + 1e-9);
    }

    #[test]
    fn reflector_rejects_large_encoding_error() {
        let h = diag_real(&[-1.0, 1.0]);
        let be = bea::dilate(&h, 1.0).unwrap().with_epsilon(0.6);
        let cfg = GroundStateConfig {
            mu: 0.0,
            gamma: 2.0,
            delta: 0.5,
            eps_prep: 1e-3,
        };
        assert!(matches!(
            reflector(&be, &cfg, 1e-3, Mode::Faithful),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn exact_oracle_needs_no_rounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_hermitian(&mut rng, 4, 1.0);
        let (e, _) = eigh(&h);
        let cfg = GroundStateConfig::from_spectra(&[e], 1.0, 1e-4).unwrap();
        let g0 = ground(&h);
        let oracle = InitialStateOracle::new(vec![g0.clone()]).unwrap();
        let be = bea::dilate(&h, 1.0).unwrap();
        let (s, prep) = prepare_ground_state(&be, &cfg, &oracle, Mode::Faithful).unwrap();
        assert_eq!(prep.rounds, 0);
        assert!(g0.dotc(&s).norm_sqr() > 1.0 - 1e-8);
    }

    #[test]
    fn two_level_planted_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = CMat::from_row_slice(2, 2, &[c(0.2), c(0.5), c(0.5), c(-0.3)]);
        let (e, _) = eigh(&h);
        let cfg = GroundStateConfig::from_spectra(&[e], 0.6, 1e-4).unwrap();
        let g0 = ground(&h);
        let oracle = InitialStateOracle::planted(&[g0.clone()], 0.6, &mut rng).unwrap();
        assert!((oracle.overlaps(&[g0.clone()])[0] - 0.6).abs() < 1e-12);
        let be = bea::dilate(&h, 1.0).unwrap();
        let (s, prep) = prepare_ground_state(&be, &cfg, &oracle, Mode::Faithful).unwrap();
        assert!(g0.dotc(&s).norm_sqr() >= 1.0 - 1e-4);
        assert!(prep.fidelities(&[g0])[0] >= 1.0 - 1e-4);
        assert!(prep.rounds <= round_budget(0.6));
    }

    #[test]
    fn superposed_blocks_with_distinct_hamiltonians() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let hs: Vec<CMat> = (0..4)
            .map(|x| {
                let u = linalg::random_unitary(&mut rng, 3);
                let shift = 0.1 * x as f64;
                &u * diag_real(&[-0.7 + shift, 0.2 + shift, 0.6]) * u.adjoint()
            })
            .collect();
        let spectra: Vec<Vec<f64>> = hs.iter().map(|h| eigh(h).0).collect();
        let mut hctrl = CMat::zeros(12, 12);
        for (x, h) in hs.iter().enumerate() {
            hctrl.view_mut((3 * x, 3 * x), (3, 3)).copy_from(h);
        }
        let cfg = GroundStateConfig::from_spectra(&spectra, 0.3, 1e-4).unwrap();
        let grounds: Vec<CVec> = hs.iter().map(ground).collect();
        let oracle = InitialStateOracle::planted(&grounds, 0.3, &mut rng).unwrap();
        let be = bea::dilate(&hctrl, 1.0).unwrap();
        let prep = prepare_ground_state_superposed(&be, 4, &cfg, &oracle, Mode::Faithful).unwrap();
        for f in prep.fidelities(&grounds) {
            assert!(f >= 1.0 - 1e-4, "fidelity {f}");
        }
    }

    #[test]
    fn eigenvalue_perturbation_within_weyl_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = linalg::random_unitary(&mut rng, 3);
        let vals = [-0.8, 0.2, 0.6];
        let h = &u * diag_real(&vals) * u.adjoint();
        let cfg = GroundStateConfig {
            mu: -0.3,
            gamma: 0.9,
            delta: 0.6,
            eps_prep: 1e-4,
        };
        let eh = cfg.gamma / 8.0;
        let pert = &u * diag_real(&[vals[0] + eh, vals[1] - eh, vals[2] + eh]) * u.adjoint();
        let be = bea::dilate_approx(&h, &pert, 1.0).unwrap();
        assert!((be.epsilon - eh).abs() < 1e-10);
        let g0 = ground(&h);
        let oracle = InitialStateOracle::planted(&[g0.clone()], 0.6, &mut rng).unwrap();
        let (s, _) = prepare_ground_state(&be, &cfg, &oracle, Mode::Faithful).unwrap();
        assert!(g0.dotc(&s).norm_sqr() >= 1.0 - 1e-4);
    }

    #[test]
    fn insufficient_overlap_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = diag_real(&[-1.0, 1.0, 1.2]);
        let g0 = ground(&h);
        let oracle = InitialStateOracle::planted(&[g0], 0.1, &mut rng).unwrap();
        let cfg = GroundStateConfig {
            mu: 0.0,
            gamma: 1.5,
            delta: 0.5,
            eps_prep: 1e-3,
        };
        let be = bea::dilate(&h, 1.2).unwrap();
        assert!(matches!(
            prepare_ground_state(&be, &cfg, &oracle, Mode::Faithful),
            Err(Error::GroundState(_))
        ));
    }

    #[test]
    fn measured_queries_match_report() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = diag_real(&[-1.0, 0.5]);
        let g0 = ground(&h);
        let oracle = InitialStateOracle::planted(&[g0], 0.3, &mut rng).unwrap();
        let cfg = GroundStateConfig {
            mu: -0.25,
            gamma: 1.5,
            delta: 0.3,
            eps_prep: 1e-3,
        };
        let counted = Counting::new(bea::dilate(&h, 1.0).unwrap().op);
        let mut be = bea::dilate(&h, 1.0).unwrap();
        be.op = counted.clone();
        let prep = prepare_ground_state_superposed(&be, 1, &cfg, &oracle, Mode::Faithful).unwrap();
        counted.reset();
        let _ = prep.output_columns();
        assert!(prep.rounds >= 1);
        assert_eq!(counted.calls(), 2 * prep.queries_h);
        assert_eq!(prep.queries_i, 2 * prep.rounds + 1);
    }
}
