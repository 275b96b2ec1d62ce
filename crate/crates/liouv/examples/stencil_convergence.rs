//! Error of the centered finite-difference derivative on sin(x) as the
//! stencil order and grid spacing change, next to the truncation model.

use liouv::phasespace::{derivative_scan, order_slope, step_slope};

fn main() -> liouv::Result<()> {
    let rows = derivative_scan(&[16, 32, 64, 128], &[1, 2, 3], 1)?;
    println!(
        "{:>5} {:>10} {:>3} {:>12} {:>12}",
        "g", "h", "d", "error", "model"
    );
    for r in &rows {
        println!(
            "{:>5} {:>10.5} {:>3} {:>12.3e} {:>12.3e}",
            r.g, r.h, r.d, r.error, r.model
        );
    }
    for g in [16, 32, 64, 128] {
        if let Some((slope, model)) = order_slope(&rows, g, 1) {
            println!("g = {g:>3}: log-error slope over d {slope:+.3}, model {model:+.3}");
        }
    }
    for d in [1, 2, 3] {
        println!(
            "d = {d}: error ~ h^{:.3}",
            step_slope(&rows, d).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
