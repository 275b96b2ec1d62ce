//! Alchemical free-energy difference between two one-nucleus systems that
//! differ only in nuclear charge, compared with the partition-function value.
//!
//! Pass `faithful` to run the full circuit emulation (about half a minute).

use liouv::electronic::{ElectronicMode, ElectronicSpec, GroundStateSettings};
use liouv::oracle;
use liouv::phasespace::{Ensemble, GridSpec, PhaseSpaceSpec};
use liouv::qsvt::Mode;
use liouv::thermo::{canonical_state, run_prepared, AlchemicalPair, System, ThermoConfig};

fn system(charge: f64) -> System {
    let mut spec = PhaseSpaceSpec::nve(
        1,
        GridSpec::centered(6, 0.3, 2),
        GridSpec::centered(6, 0.6, 2),
        vec![1.0],
        vec![charge],
        1.5,
    )
    .with_fixed_charge(-1.0, vec![0.0]);
    spec.ensemble = Ensemble::Nvt;
    spec.s = Some(GridSpec::centered(4, 0.15, 1));
    spec.ps = Some(GridSpec::centered(4, 0.5, 1));
    let mut electrons = ElectronicSpec::new(1, 3, 1.0).with_fixed_charge(-1.0, vec![0.0]);
    electrons.mode = ElectronicMode::Exact;
    System {
        phase_space: spec,
        electronic: Some(electrons),
    }
}

fn main() -> liouv::Result<()> {
    let faithful = std::env::args().any(|a| a == "faithful");
    let pair = AlchemicalPair::new(system(1.0), system(2.0))?;
    let prepared = pair.prepare(&GroundStateSettings::default())?;
    let rho = canonical_state(&prepared, 0.5)?;
    let cfg = ThermoConfig {
        mode: if faithful {
            Mode::Faithful
        } else {
            Mode::Semantic
        },
        ..ThermoConfig::default()
    };
    let result = run_prepared(&prepared, &cfg, &rho)?;

    let e = pair.a.electronic.as_ref();
    let ea = oracle::microstate_energies(e, &pair.a.phase_space)?;
    let eb = oracle::microstate_energies(e, &pair.b.phase_space)?;
    let temperature = pair.a.phase_space.bath.temperature;
    let riemann = oracle::boltzmann_delta_f(&ea, &eb, cfg.n_lambda, temperature)?;
    let exact = oracle::exact_delta_f(&ea, &eb, temperature)?;

    println!("estimate        {:+.5}", result.delta_f);
    println!("Boltzmann (N={}) {:+.5}", cfg.n_lambda, riemann);
    println!("-T ln(Zb/Za)    {:+.5}", exact);
    println!("ledger total    {:.5}", result.ledger.total());
    println!("drift           {:.2e}", result.diagnostics.drift);
    for w in &result.diagnostics.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
