//! Property suites shared by the `properties` test target and the acceptance
//! gate. Each property runs a deterministic proptest runner for the given
//! number of cases and reports the first failure.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Debug;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use factored::elementary::Block;
use factored::linsolve::{spd_factor, square_solve, CsrMatrix};
use factored::powerflow::{build_powerflow, bundled_case, state_vector, BusType, Layout};
use factored::solver::step1_least_distance;
use factored::{
    solve, solve_newton, Argument, BranchSelector, Elementary, FactoredSystem, Kind, Mode, NewtonSpace,
    SolverConfig, Variant, C64,
};

use super::{c, example, injections, ybus};

pub type PropertyFn = fn(u32) -> Result<(), String>;

/// `(name, cases, property)`.
pub const ALL: &[(&str, u32, PropertyFn)] = &[
    ("elementary round trip", 300, elementary_round_trip),
    ("trigonometric branch identity", 200, trig_branch_identity),
    ("derivative vs finite differences", 200, derivative_check),
    ("conjugate symmetry of elementaries", 200, elementary_conjugate_symmetry),
    ("fold/unfold equivalence", 200, fold_equivalence),
    ("jacobian vs finite differences", 100, jacobian_check),
    ("field closure", 100, field_closure),
    ("linear solver residual bound", 100, linsolve_residual),
    ("projection optimality", 150, projection_optimality),
    ("multipliers vanish at convergence", 100, multipliers_vanish),
    ("skip-step-1 equals newton", 60, newton_equivalence),
    ("conjugate solution pairs", 60, conjugate_pairs),
    ("branch steering determinism", 40, branch_steering),
    ("power-flow E-stage linearity", 100, powerflow_linearity),
    ("power-flow fold equivalence", 100, powerflow_fold),
];

fn run<S>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S: Strategy,
    S::Value: Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        max_shrink_iters: 64,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn close(a: C64, b: C64, rel: f64) -> bool {
    (a - b).norm() <= rel * b.norm().max(1.0)
}

fn inf_norm(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Elementaries with the real `u` interval on which `forward` inverts `inverse`.
fn catalogue() -> Vec<(Elementary, f64, f64)> {
    let e = Elementary::new;
    let scaled = |k: Kind, scale: f64, exponential: bool| {
        e(k).with_argument(Argument { scale, exponential }).unwrap()
    };
    let mut out = vec![
        (Elementary::power(2.0), 0.1, 10.0),
        (Elementary::power(2.0).with_branch(BranchSelector::NegativeRoot).unwrap(), -10.0, -0.1),
        (Elementary::power(4.0).with_branch(BranchSelector::NegativeRoot).unwrap(), -5.0, -0.1),
        (Elementary::power(3.0), -5.0, 5.0),
        (Elementary::power(4.0), 0.1, 5.0),
        (Elementary::power(0.5), 0.1, 10.0),
        (e(Kind::Exp), -5.0, 5.0),
        (e(Kind::Log), 0.1, 10.0),
        (e(Kind::Tan), -FRAC_PI_2 + 0.05, FRAC_PI_2 - 0.05),
        (e(Kind::TanShifted(FRAC_PI_2)), 0.05, PI - 0.05),
        (e(Kind::Asin), -0.99, 0.99),
        (e(Kind::Acos), -0.99, 0.99),
        (e(Kind::Atan), -5.0, 5.0),
        (e(Kind::Identity), -10.0, 10.0),
        (scaled(Kind::Cos, FRAC_PI_2, false), 0.05, 2.0 - 0.05),
        (scaled(Kind::Power(2.0), 1.0, true), -3.0, 3.0),
        (scaled(Kind::Sin, 1.0, true), -3.0, 0.4),
    ];
    for q in -3..=5 {
        let qf = q as f64;
        out.push((
            e(Kind::Sin).with_branch(BranchSelector::TrigIndex(q)).unwrap(),
            (qf - 0.5) * PI + 0.05,
            (qf + 0.5) * PI - 0.05,
        ));
        out.push((
            e(Kind::Cos).with_branch(BranchSelector::TrigIndex(q)).unwrap(),
            qf * PI + 0.05,
            (qf + 1.0) * PI - 0.05,
        ));
    }
    out
}

fn pick() -> impl Strategy<Value = (usize, f64)> {
    (0..catalogue().len(), 0.0..1.0f64)
}

pub fn elementary_round_trip(cases: u32) -> Result<(), String> {
    let cat = catalogue();
    let polar = Elementary::new(Kind::PolarPair);
    run(cases, (pick(), -1.0..1.0f64, -3.0..3.0f64), |((i, t), m, a)| {
        let (el, lo, hi) = cat[i];
        let u = c(lo + t * (hi - lo));
        let y = el.inverse_scalar(u, Mode::Real).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let back = el.forward_scalar(y, Mode::Real).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(close(back, u, 1e-10), "{el:?}: u={u} y={y} back={back}");
        let mut y2 = [C64::default(); 2];
        let mut u2 = [C64::default(); 2];
        polar.inverse(&[c(m), c(a)], &mut y2, Mode::Real).unwrap();
        polar.forward(&y2, &mut u2, Mode::Real).unwrap();
        prop_assert!(close(u2[0], c(m), 1e-10) && close(u2[1], c(a), 1e-10), "polar {m} {a} -> {u2:?}");
        Ok(())
    })
}

pub fn trig_branch_identity(cases: u32) -> Result<(), String> {
    run(cases, (-3..=5i32, -1.0..=1.0f64), |(q, y)| {
        let branch = BranchSelector::TrigIndex(q);
        let s = Elementary::new(Kind::Sin).with_branch(branch).unwrap();
        let co = Elementary::new(Kind::Cos).with_branch(branch).unwrap();
        let us = s.forward_scalar(c(y), Mode::Real).unwrap();
        let uc = co.forward_scalar(c(y), Mode::Real).unwrap();
        prop_assert!((us.re.sin() - y).abs() <= 1e-12 && us.im == 0.0, "sin q={q} y={y} u={us}");
        prop_assert!((uc.re.cos() - y).abs() <= 1e-12 && uc.im == 0.0, "cos q={q} y={y} u={uc}");
        let qf = q as f64;
        prop_assert!(us.re >= (qf - 0.5) * PI - 1e-12 && us.re <= (qf + 0.5) * PI + 1e-12);
        prop_assert!(uc.re >= qf * PI - 1e-12 && uc.re <= (qf + 1.0) * PI + 1e-12);
        Ok(())
    })
}

pub fn derivative_check(cases: u32) -> Result<(), String> {
    let cat = catalogue();
    run(cases, pick(), |(i, t)| {
        let (el, lo, hi) = cat[i];
        let u = lo + t * (hi - lo);
        let h = 1e-6;
        let d = match el.derivative(&[c(u)]) {
            Block::Scalar(d) => d,
            Block::Pair(_) => unreachable!(),
        };
        let fp = el.inverse_scalar(c(u + h), Mode::Complex).unwrap();
        let fm = el.inverse_scalar(c(u - h), Mode::Complex).unwrap();
        let fd = (fp - fm) / (2.0 * h);
        prop_assume!(d.norm() > 1e-12 && d.norm() < 1e12);
        prop_assert!((d - fd).norm() / d.norm().max(1.0) <= 1e-6, "{el:?} at {u}: {d} vs {fd}");
        Ok(())
    })
}

pub fn elementary_conjugate_symmetry(cases: u32) -> Result<(), String> {
    let kinds = [
        Kind::Power(2.0),
        Kind::Power(3.0),
        Kind::Power(0.5),
        Kind::Exp,
        Kind::Log,
        Kind::Sin,
        Kind::Cos,
        Kind::Tan,
        Kind::TanShifted(FRAC_PI_2),
        Kind::Asin,
        Kind::Acos,
        Kind::Atan,
        Kind::Identity,
    ];
    let sign = prop_oneof![Just(1.0), Just(-1.0)];
    run(cases, (0..kinds.len(), 0.2..2.0f64, 0.1..1.0f64, sign), |(k, re, im, s)| {
        let el = Elementary::new(kinds[k]);
        let z = C64::new(re, s * im);
        let a = el.inverse_scalar(z.conj(), Mode::Complex).unwrap();
        let b = el.inverse_scalar(z, Mode::Complex).unwrap().conj();
        prop_assert!(close(a, b, 1e-12), "inverse {:?} at {z}: {a} vs {b}", kinds[k]);
        let a = el.forward_scalar(z.conj(), Mode::Complex).unwrap();
        let b = el.forward_scalar(z, Mode::Complex).unwrap().conj();
        prop_assert!(close(a, b, 1e-12), "forward {:?} at {z}: {a} vs {b}", kinds[k]);
        Ok(())
    })
}

/// Gallery systems with their source expressions evaluated directly, taking
/// internal unknowns.
fn direct_models() -> Vec<(FactoredSystem, fn(&[f64]) -> Vec<f64>, [f64; 2])> {
    fn ex1(x: &[f64]) -> Vec<f64> {
        vec![x[0].powi(4) - x[0].powi(3)]
    }
    fn ex2(x: &[f64]) -> Vec<f64> {
        vec![x[0].sin() + x[0].cos()]
    }
    fn ex3(a: &[f64]) -> Vec<f64> {
        let (x1, x2) = (a[0].exp(), a[1].exp());
        vec![x1 * x2 + x1 * x2 * x2, 2.0 * x1 * x1 * x2 - x1 * x1]
    }
    fn ex8(x: &[f64]) -> Vec<f64> {
        vec![x[0] * x[0] - x[1], x[0] - (FRAC_PI_2 * x[1]).cos()]
    }
    fn ex11(x: &[f64]) -> Vec<f64> {
        vec![x[0].tan() - (x[0] - FRAC_PI_2).tan()]
    }
    vec![
        (example("ex1").0, ex1, [-3.0, 3.0]),
        (example("ex2").0, ex2, [-10.0, 10.0]),
        (example("ex3").0, ex3, [-2.0, 2.0]),
        (example("ex8").0, ex8, [-3.0, 3.0]),
        (example("ex11").0, ex11, [0.1, 1.4]),
    ]
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0..1.0f64, n)
}

pub fn fold_equivalence(cases: u32) -> Result<(), String> {
    let models = direct_models();
    run(cases, (0..models.len(), point(2)), |(i, t)| {
        let (sys, direct, [lo, hi]) = &models[i];
        let x: Vec<f64> = t[..sys.n()].iter().map(|t| lo + t * (hi - lo)).collect();
        let xc: Vec<C64> = x.iter().map(|&v| c(v)).collect();
        let h = sys.fold_evaluate(&xc, Mode::Complex).unwrap();
        let want = direct(&x);
        for (a, b) in h.iter().zip(&want) {
            prop_assert!(close(*a, c(*b), 1e-10), "model {i} at {x:?}: {a} vs {b}");
        }
        Ok(())
    })
}

pub fn jacobian_check(cases: u32) -> Result<(), String> {
    let models = direct_models();
    run(cases, (0..models.len(), point(2)), |(i, t)| {
        let (sys, _, [lo, hi]) = &models[i];
        let n = sys.n();
        let x: Vec<C64> = t[..n].iter().map(|t| c(lo + t * (hi - lo))).collect();
        let jac = sys.factored_jacobian(&sys.linear_stage(&x)).to_dense();
        let h = 1e-6;
        for j in 0..n {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            let fp = sys.fold_evaluate(&xp, Mode::Complex).unwrap();
            let fm = sys.fold_evaluate(&xm, Mode::Complex).unwrap();
            for r in 0..n {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                prop_assert!(
                    (jac[r][j] - fd).norm() <= 1e-5 * fd.norm().max(1.0),
                    "model {i} H[{r}][{j}] = {} vs {fd}",
                    jac[r][j]
                );
            }
        }
        Ok(())
    })
}

pub fn field_closure(cases: u32) -> Result<(), String> {
    let models = direct_models();
    run(cases, (0..models.len(), point(2)), |(i, t)| {
        let (sys, _, [lo, hi]) = &models[i];
        let x: Vec<C64> = t[..sys.n()].iter().map(|t| c(lo + t * (hi - lo))).collect();
        let pt = sys.unfold(&x, Mode::Real).unwrap();
        let all = pt.u.iter().chain(&pt.y).chain(&pt.residual);
        for z in all {
            prop_assert!(z.im == 0.0, "model {i}: complex value {z} in real mode");
        }
        let jac = sys.factored_jacobian(&pt.u);
        prop_assert!(jac.data().iter().all(|z| z.im == 0.0));
        Ok(())
    })
}

fn random_matrix(n: usize, density: f64) -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>, Vec<f64>)> {
    (Just(n), proptest::collection::vec((0..n, 0..n, -1.0..1.0f64), (density * (n * n) as f64) as usize), proptest::collection::vec(-1.0..1.0f64, n))
}

pub fn linsolve_residual(cases: u32) -> Result<(), String> {
    let dims = prop_oneof![4 => 1usize..40, 1 => 40usize..=200];
    let strategy = (dims, any::<bool>()).prop_flat_map(|(n, spd)| (random_matrix(n, 0.05_f64.max(3.0 / n as f64)), Just(spd)));
    run(cases, strategy, |((n, entries, b), spd)| {
        let mut trip: Vec<(usize, usize, f64)> = Vec::new();
        let mut diag = vec![1.0; n];
        for &(i, j, v) in &entries {
            if spd {
                // symmetric, diagonally dominant
                trip.push((i, j, v));
                trip.push((j, i, v));
                diag[i] += v.abs();
                diag[j] += v.abs();
            } else {
                trip.push((i, j, v));
                diag[i] += v.abs();
            }
        }
        for (i, d) in diag.iter().enumerate() {
            trip.push((i, i, *d));
        }
        let a = CsrMatrix::from_triplets(n, n, trip).unwrap();
        let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let x = if spd {
            spd_factor(&a).unwrap().solve(&b)
        } else {
            square_solve(&a, &b).unwrap().x
        };
        let r = a.mul_vec(&x);
        let res = r.iter().zip(&b).fold(0.0f64, |m, (ri, bi)| m.max((ri - bi).abs()));
        prop_assert!(res <= 1e-10 * bnorm.max(f64::MIN_POSITIVE), "n={n} spd={spd}: residual {res}");
        Ok(())
    })
}

fn projection_systems() -> Vec<FactoredSystem> {
    let pf = build_powerflow(&bundled_case("ieee30").unwrap().unwrap()).unwrap();
    vec![example("ex3").0, example("ex8").0, example("ex1").0, pf]
}

pub fn projection_optimality(cases: u32) -> Result<(), String> {
    let systems = projection_systems();
    let vecs = proptest::collection::vec(-5.0..5.0f64, 200);
    run(cases, (0..systems.len(), vecs.clone(), vecs), |(i, y, w)| {
        let sys = &systems[i];
        let m = sys.m();
        let y: Vec<C64> = y[..m].iter().map(|&v| c(v)).collect();
        let w: Vec<C64> = w[..m].iter().map(|&v| c(v)).collect();
        let (yt, _) = step1_least_distance(sys, &y).unwrap();
        let p_norm = inf_norm(sys.p()).max(1.0);
        let feas = inf_norm(&sys.residual(&yt));
        prop_assert!(feas <= 1e-9 * p_norm, "system {i}: ‖Eỹ − p‖ = {feas}");
        // any other feasible point is at least as far from y
        let (z, _) = step1_least_distance(sys, &w).unwrap();
        let dist = |a: &[C64]| a.iter().zip(&y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(dist(&z) >= dist(&yt) - 1e-9 * dist(&yt).max(1.0));
        Ok(())
    })
}

/// `(system, target, start)` for feasible random problems on Examples 1–3.
fn feasible_problem() -> impl Strategy<Value = (usize, f64, f64, f64, f64)> {
    (0..3usize, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64)
}

fn instantiate(models: &[(FactoredSystem, Mode)], (i, a, b, s, t): (usize, f64, f64, f64, f64)) -> (FactoredSystem, Vec<C64>, Mode) {
    let (base, mode) = &models[i];
    match i {
        0 => {
            let p = 0.5 + 4.5 * a;
            (base.with_real_target(&[p]).unwrap(), vec![c(-5.0 + 10.0 * s)], *mode)
        }
        1 => {
            let p = -1.3 + 2.6 * a;
            (base.with_real_target(&[p]).unwrap(), vec![c(-5.0 + 10.0 * s)], *mode)
        }
        _ => {
            let (x1, x2) = (0.5 + 2.5 * a, 0.5 + 2.5 * b);
            let p = [x1 * x2 + x1 * x2 * x2, 2.0 * x1 * x1 * x2 - x1 * x1];
            let start = vec![c(x1 * (0.5 + 1.5 * s)), c(x2 * (0.5 + 1.5 * t))];
            (base.with_real_target(&p).unwrap(), start, *mode)
        }
    }
}

fn feasible_models() -> Vec<(FactoredSystem, Mode)> {
    vec![
        (example("ex1").0, Mode::Complex),
        (example("ex2").0, Mode::Complex),
        (example("ex3").0, Mode::Complex),
    ]
}

pub fn multipliers_vanish(cases: u32) -> Result<(), String> {
    let models = feasible_models();
    run(cases, (feasible_problem(), any::<bool>()), |(prob, aug)| {
        let (sys, x0, mode) = instantiate(&models, prob);
        let variant = if aug { Variant::TwoStepAugmented } else { Variant::TwoStep };
        let cfg = SolverConfig { mode, ..SolverConfig::default().with_variant(variant) };
        let out = solve(&sys, &sys.initial_point(&x0).unwrap(), &cfg).unwrap();
        if out.status.converged() {
            prop_assert!(out.final_lambda_norm <= 1e-6, "λ = {}", out.final_lambda_norm);
            if aug {
                let mu = out.last().and_then(|r| r.mu_norm).unwrap_or(0.0);
                prop_assert!(mu <= 1e-6, "μ = {mu}");
            }
            let h = sys.fold_evaluate(&out.x_internal, mode).unwrap();
            let res = h.iter().zip(sys.p()).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
            prop_assert!(res <= 10.0 * cfg.tol_dx_l1, "residual {res}");
        }
        Ok(())
    })
}

pub fn newton_equivalence(cases: u32) -> Result<(), String> {
    let models = feasible_models();
    run(cases, feasible_problem(), |prob| {
        let (sys, x0, mode) = instantiate(&models, prob);
        let x0 = sys.initial_point(&x0).unwrap();
        let skip = SolverConfig { mode, skip_step1: true, ..SolverConfig::default() };
        let nr = SolverConfig {
            mode,
            newton_space: NewtonSpace::Native,
            ..SolverConfig::default().with_variant(Variant::NewtonBaseline)
        };
        let a = solve(&sys, &x0, &skip).unwrap();
        let b = solve_newton(&sys, &x0, &nr).unwrap();
        prop_assert_eq!(a.trace.len(), b.trace.len());
        for (ra, rb) in a.trace.iter().zip(&b.trace) {
            for (xa, xb) in ra.x.iter().zip(&rb.x) {
                prop_assert!((xa - xb).norm() <= 1e-12 * xb.norm().max(1.0), "k={}: {xa} vs {xb}", ra.k);
            }
        }
        Ok(())
    })
}

pub fn conjugate_pairs(cases: u32) -> Result<(), String> {
    let (base, _) = example("ex2");
    run(cases, (1.5..3.0f64, -3.0..3.0f64, 0.2..1.0f64), |(p, re, im)| {
        let sys = base.with_real_target(&[p]).unwrap();
        let cfg = SolverConfig::complex();
        let x0 = vec![C64::new(re, im)];
        let a = solve(&sys, &x0, &cfg).unwrap();
        let b = solve(&sys, &[x0[0].conj()], &cfg).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.iterations, b.iterations);
        for (xa, xb) in a.x_final.iter().zip(&b.x_final) {
            prop_assert!(close(xa.conj(), *xb, 1e-9), "{xa} vs {xb}");
        }
        Ok(())
    })
}

/// Each branch combination of Example 8 reaches the same point from every
/// listed starting point.
pub fn branch_steering(cases: u32) -> Result<(), String> {
    let (base, fixture) = example("ex8");
    let sys = |root: bool, acos: bool| {
        let mut s = base.clone();
        if root {
            s = s.with_branch(0, BranchSelector::NegativeRoot).unwrap();
        }
        if acos {
            s = s.with_branch(3, BranchSelector::TrigIndex(1)).unwrap();
        }
        s
    };
    let combos = [
        (sys(false, false), Some([0.0, 1.0])),
        (sys(true, false), Some([-std::f64::consts::FRAC_1_SQRT_2, 1.5])),
        (sys(true, true), Some([-1.0, 2.0])),
        (sys(false, true), None),
    ];
    let mut starts: Vec<Vec<f64>> = fixture.runs.iter().map(|r| r.x0.clone()).collect();
    starts.dedup();
    let cfg = SolverConfig {
        mode: if fixture.complex { Mode::Complex } else { Mode::Real },
        ..SolverConfig::default()
    };
    run(cases, (0..4usize, 0..starts.len()), |(k, s)| {
        let (sys, expect) = &combos[k];
        let x0: Vec<C64> = starts[s].iter().map(|&v| c(v)).collect();
        let out = solve(sys, &x0, &cfg).unwrap();
        match expect {
            Some(want) => {
                prop_assert_eq!(out.status.label(), "converged-real");
                for (x, w) in out.x_final.iter().zip(want) {
                    prop_assert!((x.re - w).abs() <= 1e-3, "{k}: {:?} vs {want:?}", out.x_final);
                }
            }
            None => {
                prop_assert_eq!(out.status.label(), "converged-complex");
                prop_assert!(out.x_final.iter().any(|x| x.im.abs() > 1e-3));
            }
        }
        Ok(())
    })
}

pub fn powerflow_linearity(cases: u32) -> Result<(), String> {
    let sys = build_powerflow(&bundled_case("ieee30").unwrap().unwrap()).unwrap();
    let m = sys.m();
    let vecs = proptest::collection::vec(-2.0..2.0f64, m);
    run(cases, (vecs.clone(), vecs), |(y, d)| {
        let y: Vec<C64> = y.iter().map(|&v| c(v)).collect();
        let d: Vec<C64> = d.iter().map(|&v| c(v)).collect();
        let yd: Vec<C64> = y.iter().zip(&d).map(|(a, b)| a + b).collect();
        let (r0, r1) = (sys.residual(&y), sys.residual(&yd));
        let ed = sys.e().mul_vec(&d);
        let scale = inf_norm(&r0).max(inf_norm(&ed)).max(1.0);
        for ((a, b), e) in r1.iter().zip(&r0).zip(&ed) {
            prop_assert!((a - b + e).norm() <= 1e-13 * scale * 16.0, "{a} {b} {e}");
        }
        Ok(())
    })
}

pub fn powerflow_fold(cases: u32) -> Result<(), String> {
    let cases_data: Vec<_> = ["ieee30", "case9"]
        .iter()
        .map(|n| {
            let case = bundled_case(n).unwrap().unwrap();
            let sys = build_powerflow(&case).unwrap();
            let (g, b) = ybus(&case);
            (case, sys, g, b)
        })
        .collect();
    let states = proptest::collection::vec((0.8..1.2f64, -0.5..0.5f64), 30);
    run(cases, (0..cases_data.len(), states), |(k, state)| {
        let (case, sys, g, b) = &cases_data[k];
        let n = case.buses.len();
        let layout = Layout::new(case);
        let mut v: Vec<f64> = state[..n].iter().map(|s| s.0).collect();
        let mut th: Vec<f64> = state[..n].iter().map(|s| s.1).collect();
        for (i, bus) in case.buses.iter().enumerate() {
            if bus.kind != BusType::Pq {
                v[i] = bus.v.unwrap();
            }
            if bus.kind == BusType::Slack {
                th[i] = 0.0;
            }
        }
        let x = state_vector(case, &v, &th);
        let h = sys.fold_evaluate(&x, Mode::Real).unwrap();
        let (p, q) = injections(g, b, &v, &th);
        let mut want = vec![0.0; layout.n];
        for i in 0..n {
            if let Some(r) = layout.theta[i] {
                want[r] = p[i];
            }
            if let Some(r) = layout.alpha[i] {
                want[r] = q[i];
            }
        }
        for (r, (a, w)) in h.iter().zip(&want).enumerate() {
            prop_assert!(close(*a, c(*w), 1e-10), "row {r}: {a} vs {w}");
        }
        Ok(())
    })
}
