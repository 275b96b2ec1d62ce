//! Prepare electronic ground states for every nuclear grid position at once
//! from a planted initial state with overlap delta.

use liouv::electronic::{self, ElectronicSpec};
use liouv::groundstate::{prepare_ground_state_superposed, GroundStateConfig, InitialStateOracle};
use liouv::linalg::{eigh, first_column, CMat};
use liouv::phasespace::{GridSpec, PhaseSpaceSpec};
use liouv::qsvt::Mode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> liouv::Result<()> {
    let nuclei = PhaseSpaceSpec::nve(
        1,
        GridSpec::centered(4, 0.5, 1),
        GridSpec::centered(4, 1.0, 1),
        vec![1.0],
        vec![1.0],
        1.0,
    );
    let electrons = ElectronicSpec::new(1, 3, 1.0).with_fixed_charge(1.0, vec![0.0]);
    let blocks = electronic::position_hamiltonians(&electrons, &nuclei)?;
    let (hctrl, be) = electronic::controlled_electronic_hamiltonian(&electrons, &nuclei)?;
    println!(
        "controlled Hamiltonian of size {}, lambda = {:.3}",
        hctrl.nrows(),
        be.alpha
    );

    let spectra: Vec<Vec<f64>> = blocks.iter().map(|h| eigh(h).0).collect();
    let grounds: Vec<_> = blocks
        .iter()
        .map(|h: &CMat| first_column(&eigh(h).1))
        .collect();
    let delta = 0.3;
    let cfg = GroundStateConfig::from_spectra(&spectra, delta, 1e-4)?;
    println!("mu = {:.4}, gamma = {:.4}", cfg.mu, cfg.gamma);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let oracle = InitialStateOracle::planted(&grounds, delta, &mut rng)?;
    let prep = prepare_ground_state_superposed(&be, blocks.len(), &cfg, &oracle, Mode::Faithful)?;
    println!(
        "{} amplification rounds, reflector degree {}",
        prep.rounds, prep.reflector_degree
    );
    for (x, f) in prep.fidelities(&grounds).iter().enumerate() {
        println!("position {x}: fidelity 1 - {:.2e}", 1.0 - f);
    }
    Ok(())
}
