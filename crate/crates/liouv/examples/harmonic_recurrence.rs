//! Evolve a Koopman-von Neumann density in a softened attractive well and
//! watch it return near its starting point after the recurrence time.

use liouv::liouvillian::{evolve, Engine};
use liouv::oracle::{self, Propagator};
use liouv::phasespace::{self, GaussianAxis, GridSpec, KvNState, PhaseSpaceSpec};
use liouv::qsvt::Mode;

fn main() -> liouv::Result<()> {
    let h = 0.125;
    let spec = PhaseSpaceSpec::nve(
        1,
        GridSpec::centered(8, h, 3),
        GridSpec::centered(8, h, 3),
        vec![1.0],
        vec![1.0],
        2.0,
    )
    .with_fixed_charge(-8.0, vec![0.0]);
    let rho = KvNState::gaussian(
        &spec,
        &[
            GaussianAxis {
                center: 0.5 * h,
                width: h,
            },
            GaussianAxis {
                center: 0.0,
                width: h,
            },
        ],
    )?;
    let l = phasespace::classical_liouvillian(&spec)?;
    println!("Liouvillian alpha = {:.3}", l.alpha);

    let prop = Propagator::new(&oracle::classical_liouvillian(&spec)?)?;
    let (t_rec, _) = oracle::recurrence_time(&prop, &rho.amplitudes, 3.0, 9.0, 600);
    for frac in [0.25, 0.5, 0.75, 1.0] {
        let t = frac * t_rec;
        let ev = evolve(&l, &rho, t, 1e-3, Engine::Qsvt, Mode::Faithful)?;
        println!(
            "t = {t:6.3}: <x> = {:+.4}, <p> = {:+.4}, distance to start {:.4}, norm {:.6}",
            ev.state.expectation(&spec, 0)?,
            ev.state.expectation(&spec, 1)?,
            ev.state.distance(&rho),
            ev.norm
        );
    }
    Ok(())
}
