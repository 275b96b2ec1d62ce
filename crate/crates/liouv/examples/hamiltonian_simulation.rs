//! Simulate `e^{-iHt}` with the phase-based and the angle-free engines and
//! compare against the dense exponential and the query formulas.

use liouv::bea;
use liouv::cost;
use liouv::linalg::{expm_hermitian, random_hermitian};
use liouv::qsvt::{self, Mode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> liouv::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = random_hermitian(&mut rng, 8, 1.0);
    let be = bea::dilate(&h, 1.0)?;
    let (t, eps) = (2.0, 1e-6);
    let exact = expm_hermitian(&h, t);

    let sim = qsvt::ham_sim(&be, t, eps, Mode::Faithful)?;
    println!(
        "qsvt:       error {:.2e}, queries {} (formula {})",
        bea::verify_contract(&sim, &exact)?,
        sim.queries,
        cost::hamsim_cost(1.0, t, eps)?
    );

    let sim = qsvt::angleless_ham_sim(&be, t, eps, Mode::Faithful)?;
    println!(
        "angle-free: error {:.2e}, queries {} (formula {})",
        bea::verify_contract(&sim, &exact)?,
        sim.queries,
        cost::angleless_hamsim_cost(1.0, t, eps)?
    );
    Ok(())
}
