//! AC power flow in factored form.
//!
//! With `U_i = V_i²`, `K_ij = V_i V_j cos θ_ij` and `L_ij = V_i V_j sin θ_ij`
//! the nodal balances are linear in `y = (U, K, L)`. The unknowns are
//! `x = (θ, α)` with `α = ln V`: angles of every non-slack bus, then log
//! magnitudes of every PQ bus. `ln U_i = 2 α_i` and the polar pair
//! `(½ ln(K² + L²), atan2(L, K)) = (α_i + α_j, θ_i − θ_j)` close the loop.
//! Fixed magnitudes (slack and PV buses) enter through the linear-stage offset.

mod case;
mod matpower;

pub use case::{Branch, Bus, BusType, PowerFlowCase};
pub use matpower::import_matpower;
pub use case::parse_case;

use serde::{Deserialize, Serialize};

use crate::elementary::{Elementary, Kind, C64};
use crate::error::{Error, Result};
use crate::linsolve::CsrMatrix;
use crate::model::{FactoredSystem, SystemSpec};
use crate::solver::{solve, SolveOutcome, SolverConfig, Variant};

/// Default mismatch threshold `‖Δp‖∞`.
pub const DEFAULT_MISMATCH_TOL: f64 = 1e-3;

/// Position of each bus's unknowns in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub theta: Vec<Option<usize>>,
    pub alpha: Vec<Option<usize>>,
    pub n: usize,
}

impl Layout {
    pub fn new(case: &PowerFlowCase) -> Self {
        let mut n = 0;
        let theta = case
            .buses
            .iter()
            .map(|b| {
                (b.kind != BusType::Slack).then(|| {
                    n += 1;
                    n - 1
                })
            })
            .collect();
        let alpha = case
            .buses
            .iter()
            .map(|b| {
                (b.kind == BusType::Pq).then(|| {
                    n += 1;
                    n - 1
                })
            })
            .collect();
        Layout { theta, alpha, n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchFlow {
    pub p_from: f64,
    pub q_from: f64,
    pub p_to: f64,
    pub q_to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    pub v: Vec<f64>,
    /// Radians, slack bus at zero.
    pub theta: Vec<f64>,
    pub branch_flows: Vec<BranchFlow>,
    /// Net injections implied by the flows, per bus.
    pub p_injection: Vec<f64>,
    pub q_injection: Vec<f64>,
    /// Largest mismatch over the specified injections.
    pub mismatch_inf: f64,
}

impl PowerFlowSolution {
    /// Active losses, equal to the sum of all injections.
    pub fn losses(&self) -> f64 {
        self.p_injection.iter().sum()
    }
}

/// Branch flows in both orientations for the given bus state.
pub fn branch_flow(br: &Branch, vi: f64, vj: f64, theta_ij: f64) -> BranchFlow {
    let (s, c) = theta_ij.sin_cos();
    let vv = vi * vj;
    BranchFlow {
        p_from: br.g * vi * vi - br.g * vv * c - br.b * vv * s,
        q_from: -(br.bsh + br.b) * vi * vi + br.b * vv * c - br.g * vv * s,
        p_to: br.g * vj * vj - br.g * vv * c + br.b * vv * s,
        q_to: -(br.bsh + br.b) * vj * vj + br.b * vv * c + br.g * vv * s,
    }
}

/// Flows and nodal injections at `(v, θ)`.
pub fn evaluate_state(case: &PowerFlowCase, v: &[f64], theta: &[f64]) -> Result<(Vec<BranchFlow>, Vec<f64>, Vec<f64>)> {
    let index = case.index_map()?;
    let n = case.buses.len();
    let (mut p, mut q) = (vec![0.0; n], vec![0.0; n]);
    let flows = case
        .branches
        .iter()
        .map(|br| {
            let (i, j) = (index[&br.from], index[&br.to]);
            let f = branch_flow(br, v[i], v[j], theta[i] - theta[j]);
            p[i] += f.p_from;
            q[i] += f.q_from;
            p[j] += f.p_to;
            q[j] += f.q_to;
            f
        })
        .collect();
    Ok((flows, p, q))
}

/// Factored system for `case`. Equations are the active balances of every
/// non-slack bus followed by the reactive balances of every PQ bus.
pub fn build_powerflow(case: &PowerFlowCase) -> Result<FactoredSystem> {
    case.validate()?;
    let index = case.index_map()?;
    let layout = Layout::new(case);
    let nb = case.buses.len();
    let m = nb + 2 * case.branches.len();

    let p_rows: Vec<Option<usize>> = layout.theta.clone();
    let q_rows: Vec<Option<usize>> = layout.alpha.clone();

    let mut e = Vec::new();
    let mut c = Vec::new();
    let mut offset = vec![0.0; m];
    let mut elementaries = Vec::with_capacity(nb + case.branches.len());

    // log magnitude of bus i as (C entries, constant)
    let log_mag = |i: usize| -> (Option<usize>, f64) {
        match layout.alpha[i] {
            Some(col) => (Some(col), 0.0),
            None => (None, case.buses[i].v.expect("validated setpoint").ln()),
        }
    };

    for i in 0..nb {
        let (col, fixed) = log_mag(i);
        match col {
            Some(col) => c.push((i, col, 2.0)),
            None => offset[i] = 2.0 * fixed,
        }
        elementaries.push(Elementary::new(Kind::Exp));
    }

    let mut add_e = |row: Option<usize>, slot: usize, v: f64| {
        if let Some(r) = row {
            if v != 0.0 {
                e.push((r, slot, v));
            }
        }
    };
    for (k, br) in case.branches.iter().enumerate() {
        let (i, j) = (index[&br.from], index[&br.to]);
        let (ks, ls) = (nb + 2 * k, nb + 2 * k + 1);
        let (g, b, bsh) = (br.g, br.b, br.bsh);
        add_e(p_rows[i], i, g);
        add_e(p_rows[i], ks, -g);
        add_e(p_rows[i], ls, -b);
        add_e(p_rows[j], j, g);
        add_e(p_rows[j], ks, -g);
        add_e(p_rows[j], ls, b);
        add_e(q_rows[i], i, -(bsh + b));
        add_e(q_rows[i], ks, b);
        add_e(q_rows[i], ls, -g);
        add_e(q_rows[j], j, -(bsh + b));
        add_e(q_rows[j], ks, b);
        add_e(q_rows[j], ls, g);

        for end in [i, j] {
            let (col, fixed) = log_mag(end);
            match col {
                Some(col) => c.push((ks, col, 1.0)),
                None => offset[ks] += fixed,
            }
        }
        if let Some(col) = layout.theta[i] {
            c.push((ls, col, 1.0));
        }
        if let Some(col) = layout.theta[j] {
            c.push((ls, col, -1.0));
        }
        elementaries.push(Elementary::new(Kind::PolarPair));
    }

    let mut p = vec![C64::default(); layout.n];
    let mut names = vec![String::new(); layout.n];
    for (i, bus) in case.buses.iter().enumerate() {
        if let Some(r) = layout.theta[i] {
            p[r] = C64::new(bus.p, 0.0);
            names[r] = format!("theta_{}", bus.id);
        }
        if let Some(r) = layout.alpha[i] {
            p[r] = C64::new(bus.q, 0.0);
            names[r] = format!("alpha_{}", bus.id);
        }
    }
    let mut spec = SystemSpec::new(
        CsrMatrix::from_triplets(layout.n, m, e)?,
        CsrMatrix::from_triplets(m, layout.n, c)?,
        elementaries,
        p,
    );
    spec.offset = offset;
    spec.names = names;
    FactoredSystem::from_spec(spec).map_err(|err| match err {
        Error::NotPositiveDefinite { .. } => Error::case(format!("equation rows are linearly dependent: {err}")),
        other => other,
    })
}

/// `V = 1`, `θ = 0` on every unknown.
pub fn flat_start(case: &PowerFlowCase) -> Vec<C64> {
    vec![C64::default(); Layout::new(case).n]
}

/// Unknown vector for a given bus state (entries of fixed quantities are ignored).
pub fn state_vector(case: &PowerFlowCase, v: &[f64], theta: &[f64]) -> Vec<C64> {
    let layout = Layout::new(case);
    let mut x = vec![C64::default(); layout.n];
    for i in 0..case.buses.len() {
        if let Some(k) = layout.theta[i] {
            x[k] = C64::new(theta[i], 0.0);
        }
        if let Some(k) = layout.alpha[i] {
            x[k] = C64::new(v[i].ln(), 0.0);
        }
    }
    x
}

/// Bus voltages, flows and a from-scratch mismatch for a converged outcome.
pub fn extract_solution(
    sys: &FactoredSystem,
    outcome: &SolveOutcome,
    case: &PowerFlowCase,
) -> Result<PowerFlowSolution> {
    if !outcome.status.converged() {
        return Err(Error::NotConverged(format!(
            "power flow ended with status {} after {} iterations",
            outcome.status, outcome.iterations
        )));
    }
    let layout = Layout::new(case);
    if sys.n() != layout.n || outcome.x_internal.len() != layout.n {
        return Err(Error::Dimension("outcome does not belong to this case".into()));
    }
    let x = &outcome.x_internal;
    let v: Vec<f64> = case
        .buses
        .iter()
        .zip(&layout.alpha)
        .map(|(bus, a)| match a {
            Some(k) => x[*k].re.exp(),
            None => bus.v.unwrap_or(1.0),
        })
        .collect();
    let theta: Vec<f64> = layout.theta.iter().map(|t| t.map_or(0.0, |k| x[k].re)).collect();
    let (branch_flows, p_injection, q_injection) = evaluate_state(case, &v, &theta)?;
    let mut mismatch_inf: f64 = 0.0;
    for (i, bus) in case.buses.iter().enumerate() {
        if layout.theta[i].is_some() {
            mismatch_inf = mismatch_inf.max((bus.p - p_injection[i]).abs());
        }
        if layout.alpha[i].is_some() {
            mismatch_inf = mismatch_inf.max((bus.q - q_injection[i]).abs());
        }
    }
    Ok(PowerFlowSolution {
        v,
        theta,
        branch_flows,
        p_injection,
        q_injection,
        mismatch_inf,
    })
}

/// Cases shipped with the crate: `(name, format, text)`.
pub const BUNDLED_CASES: &[(&str, CaseFormat, &str)] = &[
    ("two_bus", CaseFormat::Text, include_str!("../../data/cases/two_bus.case")),
    ("case9", CaseFormat::Matpower, include_str!("../../data/cases/case9.m")),
    ("ieee30", CaseFormat::Text, include_str!("../../data/cases/ieee30.case")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseFormat {
    Text,
    Matpower,
}

impl CaseFormat {
    /// `.m` files use the matrix layout, everything else the text format.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("m") => CaseFormat::Matpower,
            _ => CaseFormat::Text,
        }
    }

    pub fn parse(&self, text: &str) -> Result<PowerFlowCase> {
        match self {
            CaseFormat::Text => parse_case(text),
            CaseFormat::Matpower => import_matpower(text),
        }
    }
}

pub fn bundled_case(name: &str) -> Option<Result<PowerFlowCase>> {
    BUNDLED_CASES
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, format, text)| format.parse(text))
}

/// Configuration used for power flow: stop on `‖Δp‖∞ < tol`.
pub fn powerflow_config(variant: Variant, mismatch_tol: f64) -> SolverConfig {
    SolverConfig {
        tol_dx_l1: 1e-12,
        tol_dp_inf: Some(mismatch_tol),
        ..SolverConfig::default().with_variant(variant)
    }
}

/// Builds, solves from `x0` (flat start when `None`) and extracts the solution.
pub fn solve_case(
    case: &PowerFlowCase,
    variant: Variant,
    mismatch_tol: f64,
    x0: Option<Vec<C64>>,
) -> Result<(SolveOutcome, Result<PowerFlowSolution>)> {
    let sys = build_powerflow(case)?;
    let x0 = x0.unwrap_or_else(|| flat_start(case));
    let outcome = solve(&sys, &x0, &powerflow_config(variant, mismatch_tol))?;
    let solution = extract_solution(&sys, &outcome, case);
    Ok((outcome, solution))
}
