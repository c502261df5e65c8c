//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{c, example, polar_newton, props, scan_roots};
use factored::gallery::{config_for, run_system, Expectation, Fixture, RunSpec};
use factored::powerflow::{bundled_case, solve_case, BUNDLED_CASES};
use factored::report::format_vector;
use factored::{solve, solve_newton, FactoredSystem, NewtonSpace, SolveOutcome, SolverConfig, Status, Variant, C64};

struct Verdict {
    summary: String,
    failures: Vec<String>,
}

impl Verdict {
    fn new(summary: impl Into<String>, failures: Vec<String>) -> Self {
        Verdict {
            summary: summary.into(),
            failures,
        }
    }
}

/// Solves one fixture run with `variant`, starting from its declared point.
fn run_fixture(base: &FactoredSystem, fixture: &Fixture, run: &RunSpec, variant: Variant) -> (FactoredSystem, SolveOutcome) {
    let sys = run_system(base, run).unwrap();
    let x0 = sys.initial_point(&run.start()).unwrap();
    let out = solve(&sys, &x0, &config_for(fixture, variant)).unwrap();
    (sys, out)
}

fn row_name(id: &str, run: &RunSpec, variant: Variant) -> String {
    let x0: Vec<C64> = run.start();
    format!("{id} {} x0={} {}", run.display_label(), format_vector(&x0, 4), variant.label())
}

/// Solution points of the bundled examples at the fixture tolerance.
fn criterion_values() -> Verdict {
    let start = Instant::now();
    let mut checked = 0;
    let mut failures = Vec::new();
    let real_only = |e: &Expectation| e.x_imag.is_none();
    let selections: &[(&str, fn(&RunSpec, Variant, &Expectation) -> bool)] = &[
        ("ex1", |r, v, e| v == Variant::TwoStep && r.p.is_none() && e.x.is_some()),
        ("ex5", |_, v, _| v == Variant::TwoStep),
        ("ex2", |_, v, _| v == Variant::TwoStep),
        ("ex3", |_, v, e| {
            v == Variant::TwoStep || e.x.as_deref().is_some_and(|x| (x[0] - 31.1392).abs() < 1e-9)
        }),
        ("ex7", |_, v, e| v == Variant::TwoStep && e.x.is_some() && e.x_imag.is_none()),
        ("ex8", |_, v, e| v == Variant::TwoStep && e.x_imag.is_none()),
        ("ex10", |_, v, e| v == Variant::TwoStep && e.x.is_some()),
        ("ex11", |r, v, _| v == Variant::TwoStep && r.x0_imag.is_some()),
        ("ex12", |r, v, _| v == Variant::TwoStep && r.p.as_deref() == Some(&[2.0])),
    ];
    let mut ex8_points: Vec<Vec<f64>> = Vec::new();
    for (id, select) in selections {
        let (base, fixture) = example(id);
        for run in &fixture.runs {
            for (variant, exp) in run.expectations() {
                if !select(run, variant, exp) {
                    continue;
                }
                let (_, out) = run_fixture(&base, &fixture, run, variant);
                checked += 1;
                if !exp.value_matches(&out.x_final, &fixture) || !out.status.converged() {
                    failures.push(format!(
                        "{}: {} x = {} (expected {})",
                        row_name(id, run, variant),
                        out.status,
                        format_vector(&out.x_final, 4),
                        format_vector(&exp.reference().unwrap_or_default(), 4)
                    ));
                }
                if *id == "ex8" && real_only(exp) {
                    let x = exp.x.clone().unwrap();
                    if !ex8_points.contains(&x) {
                        ex8_points.push(x);
                    }
                }
            }
        }
    }
    if ex8_points.len() != 3 {
        failures.push(format!("ex8: {} distinct real solutions referenced, expected 3", ex8_points.len()));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 5.0 {
        failures.push(format!("runtime {secs:.2} s exceeds 5 s"));
    }
    Verdict::new(format!("{checked} solution points within 1e-3, {secs:.2} s"), failures)
}

/// Iteration counts and qualitative outcomes of the tabulated runs.
fn criterion_iterations() -> Verdict {
    let mut counted = 0;
    let mut failures = Vec::new();
    for id in ["ex1", "ex2", "ex3", "ex7", "ex10", "ex11"] {
        let (base, fixture) = example(id);
        assert_eq!(fixture.tol_dx_l1, 1e-5);
        for run in &fixture.runs {
            for (variant, exp) in run.expectations() {
                let (_, out) = run_fixture(&base, &fixture, run, variant);
                let mut problems = Vec::new();
                if !exp.status_matches(out.status) {
                    problems.push(format!("status {} (expected {})", out.status, exp.status));
                }
                if let Some(it) = exp.iterations {
                    counted += 1;
                    if !exp.iterations_match(out.iterations, &fixture) {
                        problems.push(format!("{} iterations (expected {it} ± 2)", out.iterations));
                    }
                }
                if !problems.is_empty() {
                    failures.push(format!("{}: {}", row_name(id, run, variant), problems.join(", ")));
                }
            }
        }
    }

    // qualitative records
    let (ex1, f1) = example("ex1");
    let zero = f1.runs.iter().find(|r| r.x0 == [0.0] && r.p.is_none()).unwrap();
    let (_, out) = run_fixture(&ex1, &f1, zero, Variant::NewtonBaseline);
    if out.status.converged() {
        failures.push("ex1: Newton from x0 = 0 did not fail".into());
    }
    let (ex2, f2) = example("ex2");
    for (x0, remote) in [(-5.0, -55.6214), (-10.0, -11.6391), (5.0, 6.9267)] {
        let run = f2.runs.iter().find(|r| r.x0 == [x0]).unwrap();
        let (_, out) = run_fixture(&ex2, &f2, run, Variant::NewtonBaseline);
        let x = out.x_final[0];
        if !(out.status == Status::ConvergedReal && (x.re - remote).abs() <= 1e-3) {
            failures.push(format!(
                "ex2: Newton from {x0} reached {} ({}), expected remote solution {remote}",
                format_vector(&out.x_final, 4),
                out.status
            ));
        }
    }
    let (ex10, f10) = example("ex10");
    let run = f10.runs.iter().find(|r| r.p.as_deref() == Some(&[4.204])).unwrap();
    let (_, out) = run_fixture(&ex10, &f10, run, Variant::TwoStep);
    if out.status != Status::Breakdown {
        failures.push(format!("ex10 p=4.204: {} (expected breakdown)", out.status));
    }
    let (ex11, f11) = example("ex11");
    let run = f11
        .runs
        .iter()
        .find(|r| r.p.as_deref() == Some(&[1.9]) && r.x0_imag.is_none())
        .unwrap();
    let (_, out) = run_fixture(&ex11, &f11, run, Variant::TwoStep);
    if out.status != Status::Oscillating {
        failures.push(format!("ex11 p=1.9 real start: {} (expected oscillating)", out.status));
    }
    Verdict::new(format!("{counted} iteration counts checked at ±2, plus 6 qualitative records"), failures)
}

/// Disabling the projection reproduces the Newton iterates.
fn criterion_newton_equivalence() -> Verdict {
    let mut compared = 0;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for id in ["ex1", "ex2", "ex3"] {
        let (base, fixture) = example(id);
        for run in &fixture.runs {
            let sys = run_system(&base, run).unwrap();
            let x0 = sys.initial_point(&run.start()).unwrap();
            let skip = SolverConfig {
                skip_step1: true,
                ..config_for(&fixture, Variant::TwoStep)
            };
            let nr = SolverConfig {
                newton_space: NewtonSpace::Native,
                ..config_for(&fixture, Variant::NewtonBaseline)
            };
            let a = solve(&sys, &x0, &skip).unwrap();
            let b = solve_newton(&sys, &x0, &nr).unwrap();
            let name = row_name(id, run, Variant::TwoStep);
            if a.trace.len() != b.trace.len() || a.status != b.status {
                failures.push(format!("{name}: {} steps ({}) vs newton {} ({})", a.trace.len(), a.status, b.trace.len(), b.status));
                continue;
            }
            for (ra, rb) in a.trace.iter().zip(&b.trace) {
                for (xa, xb) in ra.x.iter().zip(&rb.x) {
                    let gap = (xa - xb).norm();
                    worst = worst.max(gap);
                    compared += 1;
                    if gap > 1e-12 {
                        failures.push(format!("{name} k={}: {xa} vs {xb}", ra.k));
                    }
                }
            }
        }
    }
    Verdict::new(format!("{compared} iterate components, max gap {worst:.1e}"), failures)
}

/// Quadratic tail on Examples 1–3 and factored ≤ Newton on Example 1.
fn criterion_quadratic() -> Verdict {
    let mut failures = Vec::new();
    let mut worst_c: f64 = 0.0;
    let mut fitted = 0;
    for id in ["ex1", "ex2", "ex3"] {
        let (base, fixture) = example(id);
        for run in fixture.runs.iter().filter(|r| r.p.is_none()) {
            let (sys, out) = run_fixture(&base, &fixture, run, Variant::TwoStep);
            if !out.status.converged() {
                failures.push(format!("{}: {}", row_name(id, run, Variant::TwoStep), out.status));
                continue;
            }
            // limit point from a continuation of the same iteration
            let tight = SolverConfig {
                tol_dx_l1: 1e-15,
                max_iter: 100,
                ..config_for(&fixture, Variant::TwoStep)
            };
            let limit = solve(&sys, &out.x_internal, &tight).unwrap().x_internal;
            let scale = limit.iter().fold(1.0f64, |m, z| m.max(z.norm()));
            let floor = 1e-13 * scale;
            let errors: Vec<f64> = out
                .trace
                .iter()
                .map(|r| r.x.iter().zip(&limit).fold(0.0f64, |m, (a, b)| m.max((a - b).norm())))
                .collect();
            let tail = &errors[errors.len().saturating_sub(3)..];
            for w in tail.windows(2) {
                let (e0, e1) = (w[0], w[1]);
                if e1 <= floor || e0 == 0.0 {
                    continue;
                }
                let c = e1 / (e0 * e0);
                fitted += 1;
                worst_c = worst_c.max(c);
                if !c.is_finite() {
                    failures.push(format!("{}: e = {tail:?}", row_name(id, run, Variant::TwoStep)));
                }
            }
        }
    }

    let (ex1, f1) = example("ex1");
    let mut dominance = 0;
    for run in f1.runs.iter().filter(|r| r.p.is_none()) {
        let (_, fac) = run_fixture(&ex1, &f1, run, Variant::TwoStep);
        let (_, nr) = run_fixture(&ex1, &f1, run, Variant::NewtonBaseline);
        let nr_count = if nr.status.converged() { nr.iterations } else { usize::MAX };
        dominance += 1;
        if !fac.status.converged() || fac.iterations > nr_count {
            failures.push(format!(
                "ex1 x0={}: factored {} ({}) > newton {} ({})",
                run.x0[0], fac.iterations, fac.status, nr.iterations, nr.status
            ));
        }
    }
    Verdict::new(
        format!("{fitted} tail ratios, max c = {worst_c:.3e}; {dominance} Example 1 starts with factored <= newton"),
        failures,
    )
}

/// Random feasible problems checked against a scan-and-bisect root oracle.
fn criterion_scalar_oracle() -> Verdict {
    type Direct = fn(f64) -> f64;
    let problems: [(&str, Direct, (f64, f64), (f64, f64), (f64, f64)); 3] = [
        ("ex1", |x| x.powi(4) - x.powi(3), (0.0, 5.0), (-4.0, 4.0), (-10.0, 10.0)),
        ("ex2", |x| x.sin() + x.cos(), (-1.35, 1.35), (-6.0, 6.0), (-100.0, 100.0)),
        ("ex7", |x| x * x.sin() + x.sqrt(), (0.3, 2.8), (0.05, 1.5), (0.0, 20.0)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut failures = Vec::new();
    let mut real = 0;
    let mut total = 0;
    for (id, h, p_range, x_range, scan) in problems {
        let (base, fixture) = example(id);
        let cfg = config_for(&fixture, Variant::TwoStep);
        let mut converged_here = 0;
        for _ in 0..50 {
            let p = rng.gen_range(p_range.0..p_range.1);
            let x0 = rng.gen_range(x_range.0..x_range.1);
            let mut target: Vec<f64> = base.p().iter().map(|z| z.re).collect();
            target[0] = p;
            let sys = base.with_real_target(&target).unwrap();
            let out = solve(&sys, &sys.initial_point(&[c(x0)]).unwrap(), &cfg).unwrap();
            total += 1;
            if out.status != Status::ConvergedReal {
                continue;
            }
            real += 1;
            converged_here += 1;
            let x = out.x_final[0].re;
            let roots = scan_roots(|t| h(t) - p, scan.0, scan.1, 1e-3);
            let nearest = roots.iter().map(|r| (r - x).abs()).fold(f64::INFINITY, f64::min);
            let residual = (h(x) - p).abs();
            if nearest > 1e-8 || residual > 1e-8 {
                failures.push(format!(
                    "{id} p={p:.6} x0={x0:.4}: x={x:.12} nearest oracle root {nearest:.2e} away, |h-p| = {residual:.2e}"
                ));
            }
        }
        if converged_here == 0 {
            failures.push(format!("{id}: no run converged to a real root"));
        }
    }
    Verdict::new(format!("{real}/{total} real convergences matched the oracle to 1e-8"), failures)
}

/// Power flow: oracle agreement, iteration dominance, 30-bus iteration count.
fn criterion_powerflow() -> Verdict {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut counts = Vec::new();
    for (name, _, _) in BUNDLED_CASES {
        let case = bundled_case(name).unwrap().unwrap();
        let oracle = polar_newton(&case, 1e-13);
        let (out, sol) = solve_case(&case, Variant::TwoStep, 1e-12, None).unwrap();
        match sol {
            Ok(sol) => {
                let gap = sol.v.iter().zip(&oracle.v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                worst = worst.max(gap);
                if gap > 1e-8 {
                    failures.push(format!("{name}: |dV| = {gap:.2e}"));
                }
            }
            Err(e) => failures.push(format!("{name}: {e} ({})", out.status)),
        }
        let (fac, _) = solve_case(&case, Variant::TwoStep, 1e-3, None).unwrap();
        let (nr, _) = solve_case(&case, Variant::NewtonBaseline, 1e-3, None).unwrap();
        counts.push(format!("{name} {}/{}", fac.iterations, nr.iterations));
        if !fac.status.converged() || !nr.status.converged() || fac.iterations > nr.iterations {
            failures.push(format!(
                "{name}: factored {} ({}) vs newton {} ({})",
                fac.iterations, fac.status, nr.iterations, nr.status
            ));
        }
        if *name == "ieee30" && fac.iterations > 3 {
            failures.push(format!("ieee30: {} factored iterations (limit 3)", fac.iterations));
        }
    }
    Verdict::new(
        format!("max |dV| vs polar oracle {worst:.1e}; factored/newton iterations {}", counts.join(", ")),
        failures,
    )
}

/// Invariant suites as property tests.
fn criterion_properties() -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut cases = 0;
    for (name, n, property) in props::ALL {
        cases += n;
        if let Err(e) = property(*n) {
            failures.push(format!("{name}: {e}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if cases < 1000 {
        failures.push(format!("only {cases} generated cases"));
    }
    if secs >= 60.0 {
        failures.push(format!("runtime {secs:.1} s exceeds 60 s"));
    }
    Verdict::new(format!("{} suites, {cases} generated cases, {secs:.2} s", props::ALL.len()), failures)
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, fn() -> Verdict); 7] = [
        ("gallery solution values", criterion_values),
        ("iteration counts and qualitative records", criterion_iterations),
        ("projection-free step equals newton", criterion_newton_equivalence),
        ("quadratic tail and Example 1 dominance", criterion_quadratic),
        ("scalar root oracle", criterion_scalar_oracle),
        ("power flow", criterion_powerflow),
        ("invariant property suites", criterion_properties),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let verdict = check();
        let ok = verdict.failures.is_empty();
        println!("{} criterion {} ({name}): {}", if ok { "PASS" } else { "FAIL" }, i + 1, verdict.summary);
        for f in &verdict.failures {
            println!("    {f}");
        }
        failed += usize::from(!ok);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
