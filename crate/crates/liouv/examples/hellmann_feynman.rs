//! Read out the ground-state force on a nucleus by kickback through the
//! prepared ground state, and compare with finite differences of E0(x).

use liouv::electronic::{self, ElectronicMode, ElectronicSpec, GroundStateSettings};
use liouv::oracle;
use liouv::phasespace::{GridSpec, PhaseSpaceSpec};

fn main() -> liouv::Result<()> {
    let nuclei = PhaseSpaceSpec::nve(
        1,
        GridSpec::centered(4, 0.5, 1),
        GridSpec::centered(4, 1.0, 1),
        vec![1.0],
        vec![2.0],
        1.0,
    );
    let mut electrons = ElectronicSpec::new(1, 3, 1.0).with_fixed_charge(1.0, vec![0.0]);
    electrons.mode = ElectronicMode::Faithful;
    let gs = electronic::ground_state_source(&electrons, &nuclei, &GroundStateSettings::default())?;
    let force = electronic::d_el(&electrons, &nuclei, 0, 0, &gs)?;
    println!("declared error {:.3e}", force.be.epsilon);
    println!(
        "{:>8} {:>14} {:>14} {:>14}",
        "x", "kickback", "expectation", "finite diff"
    );
    for x in 0..nuclei.position_count() {
        let pos = nuclei.positions(x);
        let fd = oracle::ground_energy_gradient(&electrons, &nuclei.charges, &pos, 0, 0, 1e-4)?;
        println!(
            "{:>8.3} {:>14.8} {:>14.8} {:>14.8}",
            pos[0][0], force.values[x], force.reference[x], fd
        );
    }
    Ok(())
}
