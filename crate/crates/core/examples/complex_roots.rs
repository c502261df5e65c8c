//! Targets with no real solution: the iteration moves into the complex
//! plane and lands on the nearest complex root.
//!
//!     cargo run --example complex_roots

use factored::gallery;
use factored::report::format_vector;
use factored::{solve, SolverConfig, C64};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // x^4 - x^3 has minimum -27/256 at x = 3/4
    let quartic = gallery::find("ex1").expect("bundled").system()?;
    for p in [-0.05, -0.2, -1.0] {
        let sys = quartic.with_real_target(&[p])?;
        let out = solve(&sys, &sys.initial_point(&[C64::new(1.0, 0.0)])?, &SolverConfig::complex())?;
        println!("x^4 - x^3 = {p:<5}  {} {} in {}", out.status, format_vector(&out.x_final, 4), out.iterations);
    }

    // sin x + cos x peaks at sqrt(2) for x = pi/4; past the peak the real
    // part stays at pi/4 and the imaginary part grows
    let trig = gallery::find("ex10").expect("bundled").system()?;
    for p in [1.0, 1.4, std::f64::consts::SQRT_2, 1.5, 2.0] {
        let sys = trig.with_real_target(&[p])?;
        let out = solve(&sys, &[C64::new(1.0, 0.0)], &SolverConfig::complex())?;
        println!("sin x + cos x = {p:.4}  {} {} in {}", out.status, format_vector(&out.x_final, 4), out.iterations);
    }

    // tan x - tan(x - pi/2) = p has its real minimum 2 at x = pi/4, where
    // convergence slows to linear
    let tan = gallery::find("ex12").expect("bundled").system()?;
    for p in [4.0, 2.5, 2.0] {
        let sys = tan.with_real_target(&[p])?;
        let out = solve(&sys, &[C64::new(1.5, 0.0)], &SolverConfig::complex())?;
        println!("tan x - tan(x - pi/2) = {p}  {} {} in {}", out.status, format_vector(&out.x_final, 4), out.iterations);
    }
    Ok(())
}
