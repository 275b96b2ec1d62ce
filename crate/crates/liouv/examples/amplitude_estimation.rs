//! Phase-estimation readout of a success probability with median boosting.

use liouv::thermo::{
    amplitude_estimate, median_repetitions, qae_distribution, required_qae_ancillas,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> liouv::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (p, precision, xi) = (0.3, 1e-3, 0.05);
    let m = required_qae_ancillas(precision);
    println!(
        "{m} phase qubits, {} repetitions for xi = {xi}",
        median_repetitions(xi)
    );
    let dist = qae_distribution(p, m)?;
    let peak = dist.iter().cloned().fold(0.0, f64::max);
    println!("largest single-outcome probability {peak:.3}");
    let out = amplitude_estimate(p, precision, xi, None, &mut rng)?;
    println!(
        "estimate {:.6} (true {p}), {} oracle accesses",
        out.estimate, out.accesses
    );
    Ok(())
}
