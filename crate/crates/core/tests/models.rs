mod common;

use common::{c, example};
use factored::builders::{build, parse_model, serialize_model};
use factored::{solve, Mode, SolverConfig};

fn dense(m: &factored::linsolve::CsrMatrix<f64>) -> Vec<Vec<f64>> {
    m.to_dense()
}

#[test]
fn duplicate_terms_merge() {
    let doc = parse_model("form elementary_sum\nvar x\neq 5 = 2*pow[exp=4](x) + 3*pow[exp=4](x)\n").unwrap();
    let sys = build(&doc).unwrap();
    assert_eq!(sys.m(), 1);
    assert_eq!(dense(sys.e()), vec![vec![5.0]]);
    assert_eq!(dense(sys.c()), vec![vec![1.0]]);
}

#[test]
fn nearly_equal_exponents_stay_distinct() {
    let doc = parse_model(
        "form power_product\nvar x\nvar y\neq 2 = 1*prod(x^1 y^1) + 1*prod(x^1.0000001 y^1)\neq 1 = 1*prod(y^1)\n",
    )
    .unwrap();
    assert_eq!(build(&doc).unwrap().m(), 3);
}

#[test]
fn building_twice_is_identical() {
    let (a, _) = example("ex1");
    let (b, _) = example("ex1");
    assert_eq!(a.m(), 2);
    assert_eq!(dense(a.e()), dense(b.e()));
    assert_eq!(dense(a.c()), dense(b.c()));
    assert_eq!(a.elementaries(), b.elementaries());
}

#[test]
fn example_three_matrices() {
    let (sys, _) = example("ex3");
    assert_eq!(dense(sys.e()), vec![vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 2.0, -1.0]]);
    assert_eq!(
        dense(sys.c()),
        vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![2.0, 1.0], vec![2.0, 0.0]]
    );
    let doc = parse_model(factored::gallery::find("ex3").unwrap().model).unwrap();
    let text = serialize_model(&doc);
    assert_eq!(serialize_model(&parse_model(&text).unwrap()), text);
}

#[test]
fn augmented_solutions_solve_the_original_equations() {
    let cfg = SolverConfig {
        tol_dx_l1: 1e-12,
        ..SolverConfig::complex()
    };

    // x1 sin(x1^2 + x2) - x1^2 = p1, x1^2 x2 - sqrt(x2) = p2
    let (sys, fixture) = example("ex4");
    for run in &fixture.runs {
        let out = solve(&sys, &sys.initial_point(&run.start()).unwrap(), &cfg).unwrap();
        assert!(out.status.converged(), "{:?}", out.status);
        let (x1, x2) = (out.x_final[0].re, out.x_final[1].re);
        let p: Vec<f64> = sys.p().iter().map(|z| z.re).collect();
        assert!((x1 * (x1 * x1 + x2).sin() - x1 * x1 - p[0]).abs() <= 1e-8);
        assert!((x1 * x1 * x2 - x2.sqrt() - p[1]).abs() <= 1e-8);
    }

    // x sin x + sqrt(x) = 5 on the q = 2 branch
    let (base, _) = example("ex7");
    let sys = base
        .with_branch(3, factored::BranchSelector::TrigIndex(2))
        .unwrap();
    let x0 = [c(2.0 * std::f64::consts::PI)];
    let out = solve(&sys, &sys.initial_point(&x0).unwrap(), &cfg).unwrap();
    assert_eq!(out.status.label(), "converged-real");
    let x = out.x_final[0].re;
    assert!((x * x.sin() + x.sqrt() - 5.0).abs() <= 1e-8);
}

#[test]
fn real_mode_rejects_nonpositive_power_product_start() {
    let (sys, _) = example("ex3");
    let cfg = SolverConfig {
        mode: Mode::Real,
        ..SolverConfig::default()
    };
    let negative = sys.initial_point(&[c(-1.0), c(1.0)]).unwrap();
    assert!(solve(&sys, &negative, &cfg).is_err());
    let complex = solve(&sys, &negative, &SolverConfig::complex()).unwrap();
    assert!(complex.iterations > 0);
    let x0 = sys.initial_point(&[c(1.9), c(2.9)]).unwrap();
    assert!(solve(&sys, &x0, &cfg).unwrap().status.converged());
}
