//! A monomial system built in code and solved in log variables.
//!
//!     cargo run --example power_products

use factored::builders::{build, serialize_model, Equation, Form, ModelDocument, TermSpec, VarDecl};
use factored::report::format_vector;
use factored::{solve, SolverConfig, Variant, C64};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let var = |name: &str| VarDecl { name: name.into(), init: None };
    let doc = ModelDocument {
        form: Form::PowerProduct,
        variables: vec![var("x1"), var("x2")],
        equations: vec![
            Equation {
                target: 24.0,
                terms: vec![
                    TermSpec::product(1.0, &[("x1", 1.0), ("x2", 1.0)]),
                    TermSpec::product(1.0, &[("x1", 1.0), ("x2", 2.0)]),
                ],
            },
            Equation {
                target: 20.0,
                terms: vec![
                    TermSpec::product(2.0, &[("x1", 2.0), ("x2", 1.0)]),
                    TermSpec::product(-1.0, &[("x1", 2.0)]),
                ],
            },
        ],
        aux: vec![],
    };
    print!("{}", serialize_model(&doc));
    let sys = build(&doc)?;
    println!("n = {}, m = {} monomial slots", sys.n(), sys.m());
    println!("E = {:?}", sys.e().to_dense());
    println!("C = {:?}", sys.c().to_dense());

    // negative starts are fine with complex logarithms
    for x0 in [[1.0, 1.0], [-1.0, 1.0], [10.0, 10.0], [-10.0, -10.0]] {
        let start = sys.initial_point(&x0.map(|v| C64::new(v, 0.0)))?;
        for variant in [Variant::TwoStep, Variant::NewtonBaseline] {
            let out = solve(&sys, &start, &SolverConfig::complex().with_variant(variant))?;
            println!(
                "x0 = {x0:?} {:<8} {} {} in {}",
                variant.label(),
                out.status,
                format_vector(&out.x_final, 4),
                out.iterations
            );
        }
    }
    Ok(())
}
