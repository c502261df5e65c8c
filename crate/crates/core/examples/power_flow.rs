//! Power flow from flat start with both solvers.
//!
//!     cargo run --example power_flow [-- <bundled name or case file>]

use factored::powerflow::{bundled_case, solve_case, CaseFormat, DEFAULT_MISMATCH_TOL};
use factored::Variant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "ieee30".to_string());
    let case = match bundled_case(&arg) {
        Some(case) => case?,
        None => {
            let path = std::path::Path::new(&arg);
            CaseFormat::from_path(path).parse(&std::fs::read_to_string(path)?)?
        }
    };
    println!("{} buses, {} branches", case.buses.len(), case.branches.len());

    for variant in [Variant::TwoStep, Variant::NewtonBaseline] {
        let (outcome, solution) = solve_case(&case, variant, DEFAULT_MISMATCH_TOL, None)?;
        println!(
            "{:<8} {} in {} iterations",
            variant.label(),
            outcome.status,
            outcome.iterations
        );
        for rec in &outcome.trace {
            println!("    k={} |dp|inf={:.3e}", rec.k, rec.dp_inf);
        }
        if variant == Variant::TwoStep {
            let sol = solution?;
            println!("  bus       V     theta(deg)");
            for (bus, (v, t)) in case.buses.iter().zip(sol.v.iter().zip(&sol.theta)) {
                println!("  {:>3}  {:.4}  {:>9.4}", bus.id, v, t.to_degrees());
            }
            println!("  losses {:.5} pu, mismatch {:.2e}", sol.losses(), sol.mismatch_inf);
        }
    }
    Ok(())
}
