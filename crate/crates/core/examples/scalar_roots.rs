//! One scalar equation, factored two-step iteration against Newton.
//!
//!     cargo run --example scalar_roots [-- <p>]

use factored::gallery;
use factored::report::format_complex;
use factored::{solve, SolverConfig, Variant, C64};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p: f64 = match std::env::args().nth(1) {
        Some(s) => s.parse()?,
        None => 1.0,
    };
    // x^4 - x^3 = p
    let sys = gallery::find("ex1").expect("bundled").system()?.with_real_target(&[p])?;
    println!("x^4 - x^3 = {p}");
    println!("{:>6}  {:>18} {:>4}  {:>18} {:>4}", "x0", "factored", "it", "newton", "it");
    for x0 in [30.0, 10.0, 5.0, 1.0, 0.9, -1.0, -10.0] {
        let start = sys.initial_point(&[C64::new(x0, 0.0)])?;
        let mut row = format!("{x0:>6}");
        for variant in [Variant::TwoStep, Variant::NewtonBaseline] {
            let out = solve(&sys, &start, &SolverConfig::complex().with_variant(variant))?;
            let value = if out.status.converged() {
                format_complex(out.x_final[0], 4)
            } else {
                out.status.to_string()
            };
            row += &format!("  {value:>18} {:>4}", out.iterations);
        }
        println!("{row}");
    }
    Ok(())
}
