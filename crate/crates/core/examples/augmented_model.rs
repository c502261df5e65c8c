//! Composite terms through auxiliary unknowns.
//!
//!     cargo run --example augmented_model

use factored::builders::parse_model;
use factored::report::format_vector;
use factored::{solve, SolverConfig};

const MODEL: &str = "\
# x1 sin(x1^2 + x2) - x1^2 = p1, x1^2 x2 - sqrt(x2) = p2
form power_product
var x1 init 1.2
var x2 init 0.3
aux x3 = sin(1*prod(x1^2) + 1*prod(x2^1))
eq -0.0510153806444138 = 1*prod(x1^1 x3^1) - 1*prod(x1^2)
eq -0.25 = 1*prod(x1^2 x2^1) - 1*prod(x2^0.5)
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let doc = parse_model(MODEL)?;
    let sys = factored::builders::build(&doc)?;
    println!("unknowns {:?}, {} equations, {} slots", sys.names(), sys.n(), sys.m());

    // the auxiliary start is completed from its definition
    let guess = doc.initial_guess().expect("every variable has an init");
    let x0 = sys.initial_point(&guess)?;
    let out = solve(&sys, &x0, &SolverConfig::complex())?;
    println!("{} {} in {}", out.status, format_vector(&out.x_final, 6), out.iterations);

    let (x1, x2, x3) = (out.x_final[0].re, out.x_final[1].re, out.x_final[2].re);
    println!("x3 - sin(x1^2 + x2) = {:.2e}", x3 - (x1 * x1 + x2).sin());
    println!("p1 = {:.6}", x1 * (x1 * x1 + x2).sin() - x1 * x1);
    println!("p2 = {:.6}", x1 * x1 * x2 - x2.sqrt());
    Ok(())
}
