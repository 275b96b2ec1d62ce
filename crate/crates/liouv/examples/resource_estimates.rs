//! Query counts for one parameter point and the asymptotic comparison at
//! molecular scale.

use liouv::cost::{cost_report, CostParams};

fn main() -> liouv::Result<()> {
    let report = cost_report(&CostParams::default())?;
    println!(
        "U_H {}  U_I {}  U_force {}  U_f4D {}",
        report.u_h, report.u_i, report.u_force, report.u_f4d
    );
    for f in report.figures.iter().chain(std::iter::once(&report.qubits)) {
        let kind = if f.scaling_only { "scaling" } else { "exact" };
        println!(
            "{:<45} {:>12.4e}  [{kind}] {}",
            f.label, f.value, f.expression
        );
    }
    Ok(())
}
