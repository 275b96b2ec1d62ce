//! Build block encodings by dilation, LCU and product, and check each
//! against its dense target.

use liouv::bea;
use liouv::linalg::{c, random_hermitian, spectral_norm, CMat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> liouv::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_hermitian(&mut rng, 4, 0.8);
    let b = random_hermitian(&mut rng, 4, 0.5);

    let ua = bea::dilate(&a, 1.0)?;
    let ub = bea::dilate(&b, 1.0)?;
    println!(
        "dilation of A: alpha {}, error {:.2e}",
        ua.alpha,
        bea::verify_contract(&ua, &a)?
    );

    let weights = [0.7, 0.3];
    let pair = bea::make_state_prep(&weights, 0.0)?;
    let lcu = bea::lcu_combine(&pair, &[ua.clone(), ub.clone()])?;
    let target: CMat = &a * c(0.7) + &b * c(0.3);
    println!(
        "LCU 0.7A + 0.3B: alpha {}, declared eps {:.1e}, error {:.2e}",
        lcu.alpha,
        lcu.epsilon,
        bea::verify_contract(&lcu, &target)?
    );

    let noisy = &b + random_hermitian(&mut rng, 4, 1e-3);
    let ub_noisy = bea::dilate_approx(&b, &noisy, spectral_norm(&noisy).max(1.0))?;
    let prod = bea::product(&ua, &ub_noisy)?;
    println!(
        "product A*B with a perturbed factor: declared eps {:.3e}, error {:.3e}",
        prod.epsilon,
        bea::verify_contract(&prod, &(&a * &b))?
    );
    Ok(())
}
