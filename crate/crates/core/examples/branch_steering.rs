//! Choosing which root to reach by picking inverse branches.
//!
//!     cargo run --example branch_steering

use factored::gallery;
use factored::report::format_vector;
use factored::{solve, BranchSelector, SolverConfig, C64};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // x1^2 - x2 = -1 and x1 = cos(pi x2 / 2); slot 0 is the square, slot 3
    // the cosine
    let base = gallery::find("ex8").expect("bundled").system()?;
    let combos = [
        ("sqrt principal, acos principal", vec![]),
        ("sqrt negative,  acos principal", vec![(0, BranchSelector::NegativeRoot)]),
        ("sqrt negative,  acos q=1", vec![(0, BranchSelector::NegativeRoot), (3, BranchSelector::TrigIndex(1))]),
        ("sqrt principal, acos q=1", vec![(3, BranchSelector::TrigIndex(1))]),
    ];
    let x0 = base.initial_point(&[C64::new(0.5, 0.0), C64::new(2.0, 0.0)])?;
    for (label, branches) in combos {
        let mut sys = base.clone();
        for (slot, branch) in branches {
            sys = sys.with_branch(slot, branch)?;
        }
        let out = solve(&sys, &x0, &SolverConfig::complex())?;
        println!("{label}: {} {} in {}", out.status, format_vector(&out.x_final, 4), out.iterations);
    }

    // x1 x2 + sqrt(x1) = 5 with x2 = sin x1: the sine branch q picks the
    // real root near q pi
    let base = gallery::find("ex7").expect("bundled").system()?;
    for q in 2..=5 {
        let sys = base.with_branch(3, BranchSelector::TrigIndex(q))?;
        let x0 = sys.initial_point(&[C64::new(q as f64 * std::f64::consts::PI, 0.0)])?;
        let out = solve(&sys, &x0, &SolverConfig::complex())?;
        println!("sin branch q={q}: {} x1 = {} in {}", out.status, format_vector(&out.x_final[..1], 4), out.iterations);
    }
    Ok(())
}
