//! Two-step factored iteration, its bordered variant for near-singular
//! Jacobians, and the Newton-Raphson baseline on the same factored form.
//!
//! One two-step iteration from `x_k` (with `y_k = f⁻¹(C x_k + d)`):
//!
//! 1. least-distance projection: `(E Eᵀ) λ = p − E y_k`, `ỹ = y_k + Eᵀ λ`;
//! 2. `ũ = f(ỹ)`, `H̃ = E F̃⁻¹ C` at `ũ`, and `H̃ x_{k+1} = E F̃⁻¹ (ũ − d)`.
//!
//! All failures during iteration are reported through [`Status`]; [`solve`]
//! only returns `Err` when its inputs are unusable.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::elementary::{Block, Mode, C64};
use crate::error::{Error, Result};
use crate::linsolve::{norm_inf, norm_l1, CsrMatrix, NEAR_SINGULAR_CONDITION};
use crate::model::{FactoredSystem, Recovery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    TwoStep,
    TwoStepAugmented,
    NewtonBaseline,
}

impl Variant {
    pub fn label(&self) -> &'static str {
        match self {
            Variant::TwoStep => "factored",
            Variant::TwoStepAugmented => "factored-aug",
            Variant::NewtonBaseline => "newton",
        }
    }
}

/// Coordinates used by the Newton baseline on log-variable systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NewtonSpace {
    /// Iterate on the declared variables `x = exp(α)`, i.e. classical Newton
    /// on the original polynomial system.
    #[default]
    Original,
    /// Iterate on the internal unknowns.
    Native,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol_dx_l1: f64,
    pub tol_dp_inf: Option<f64>,
    pub max_iter: usize,
    pub mode: Mode,
    pub variant: Variant,
    pub oscillation_window: usize,
    /// Switch to the bordered step once a compact solve is near singular.
    pub escalate: bool,
    /// Replace the projection by `ỹ = y_k`; the step then reduces to Newton.
    pub skip_step1: bool,
    pub newton_space: NewtonSpace,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_dx_l1: 1e-5,
            tol_dp_inf: None,
            max_iter: 50,
            mode: Mode::Real,
            variant: Variant::TwoStep,
            oscillation_window: 8,
            escalate: true,
            skip_step1: false,
            newton_space: NewtonSpace::Original,
        }
    }
}

impl SolverConfig {
    pub fn complex() -> Self {
        SolverConfig {
            mode: Mode::Complex,
            ..Self::default()
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Model(format!("solver configuration: {m}")));
        if !(self.tol_dx_l1 > 0.0) {
            return bad("tol_dx_l1 must be positive");
        }
        if matches!(self.tol_dp_inf, Some(t) if !(t > 0.0)) {
            return bad("tol_dp_inf must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if self.oscillation_window == 0 {
            return bad("oscillation_window must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    ConvergedReal,
    ConvergedComplex,
    Oscillating,
    Breakdown,
    MaxIterations,
}

impl Status {
    pub fn converged(&self) -> bool {
        matches!(self, Status::ConvergedReal | Status::ConvergedComplex)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Status::ConvergedReal => "converged-real",
            Status::ConvergedComplex => "converged-complex",
            Status::Oscillating => "oscillating",
            Status::Breakdown => "breakdown",
            Status::MaxIterations => "max-iterations",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub dx_l1: f64,
    /// `‖p − E y_{k}‖∞` after the step.
    pub dp_inf: f64,
    pub lambda_norm: f64,
    pub mu_norm: Option<f64>,
    pub condition_estimate: f64,
    /// Internal unknowns after the step.
    pub x: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: Status,
    /// Declared variables (after `exp` for log-variable systems); imaginary
    /// parts are zeroed for real convergence.
    pub x_final: Vec<C64>,
    /// Internal unknowns at the last iterate.
    pub x_internal: Vec<C64>,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    /// `‖λ‖∞` of the projection at the final iterate.
    pub final_lambda_norm: f64,
    pub final_dp_inf: f64,
    /// Iteration at which the bordered step took over.
    pub escalated_at: Option<usize>,
    pub detail: Option<String>,
}

impl SolveOutcome {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.trace.last()
    }
}

/// Result of a Step 2 solve.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub x_next: Vec<C64>,
    pub u_tilde: Vec<C64>,
    pub mu: Option<Vec<C64>>,
    pub condition_estimate: f64,
}

/// Projection of `y_k` onto `{y : E y = p}`; returns `(ỹ, λ)`.
pub fn step1_least_distance(sys: &FactoredSystem, y_k: &[C64]) -> Result<(Vec<C64>, Vec<C64>)> {
    if y_k.len() != sys.m() {
        return Err(Error::Dimension(format!("y has {} entries, expected {}", y_k.len(), sys.m())));
    }
    let lambda = sys.gram().solve(&sys.residual(y_k));
    let shift = sys.e().tr_mul_vec(&lambda);
    let y_tilde = y_k.iter().zip(shift).map(|(a, b)| a + b).collect();
    Ok((y_tilde, lambda))
}

/// Linearized data shared by both Step 2 forms: `ũ`, `F̃⁻¹`, `H̃` and
/// `E F̃⁻¹ (ũ − d)`.
fn step2_setup(sys: &FactoredSystem, y_tilde: &[C64], mode: Mode) -> Result<(Vec<C64>, CsrMatrix<C64>, Vec<C64>)> {
    if y_tilde.len() != sys.m() {
        return Err(Error::Dimension(format!("y has {} entries, expected {}", y_tilde.len(), sys.m())));
    }
    let u_tilde = sys.forward_map(y_tilde, mode)?;
    let blocks = sys.derivatives(&u_tilde);
    let h = sys.jacobian_from_blocks(&blocks);
    let shifted: Vec<C64> = u_tilde.iter().zip(sys.offset()).map(|(u, d)| u - d).collect();
    let rhs = sys.e().mul_vec(&sys.apply_derivatives(&blocks, &shifted));
    Ok((u_tilde, h, rhs))
}

/// Compact Step 2: `H̃ x_{k+1} = E F̃⁻¹ (ũ − d)`.
pub fn step2_newton_like(sys: &FactoredSystem, y_tilde: &[C64], mode: Mode) -> Result<StepResult> {
    let (u_tilde, h, rhs) = step2_setup(sys, y_tilde, mode)?;
    let sol = sys.square_solver().solve(&h, &rhs)?;
    Ok(StepResult {
        condition_estimate: sol.condition_estimate(),
        x_next: sol.x,
        u_tilde,
        mu: None,
    })
}

/// Bordered Step 2: `[[0, H̃ᵀ], [H̃, −E Eᵀ]] [x; μ] = [0; E F̃⁻¹ (ũ − d)]`.
pub fn step2_augmented(sys: &FactoredSystem, y_tilde: &[C64], mode: Mode) -> Result<StepResult> {
    let (u_tilde, h, rhs) = step2_setup(sys, y_tilde, mode)?;
    let n = sys.n();
    let gram = sys.e().matmul(&sys.e().transpose())?;
    let entries = h
        .triplets()
        .flat_map(|(r, c, v)| [(c, n + r, v), (n + r, c, v)])
        .chain(gram.triplets().map(|(r, c, v)| (n + r, n + c, C64::new(-v, 0.0))));
    let k = CsrMatrix::from_triplets(2 * n, 2 * n, entries)?;
    let mut b = vec![C64::default(); 2 * n];
    b[n..].copy_from_slice(&rhs);
    let sol = sys.square_solver().solve(&k, &b)?;
    let condition_estimate = sol.condition_estimate();
    let mut x_next = sol.x;
    let mu = x_next.split_off(n);
    Ok(StepResult {
        condition_estimate,
        x_next,
        u_tilde,
        mu: Some(mu),
    })
}

/// Incremental Step 2 with an explicit remainder:
/// `H̃ Δx = (p − E y_k) − E F̃⁻¹ R`, returning `x_k + Δx`.
pub fn step2_incremental(
    sys: &FactoredSystem,
    x_k: &[C64],
    y_k: &[C64],
    u_tilde: &[C64],
    remainder: &[C64],
) -> Result<StepResult> {
    let blocks = sys.derivatives(u_tilde);
    let h = sys.jacobian_from_blocks(&blocks);
    let correction = sys.e().mul_vec(&sys.apply_derivatives(&blocks, remainder));
    let rhs: Vec<C64> = sys.residual(y_k).iter().zip(correction).map(|(a, b)| a - b).collect();
    let sol = sys.square_solver().solve(&h, &rhs)?;
    Ok(StepResult {
        condition_estimate: sol.condition_estimate(),
        x_next: x_k.iter().zip(&sol.x).map(|(a, b)| a + b).collect(),
        u_tilde: u_tilde.to_vec(),
        mu: None,
    })
}

/// Truncated Taylor remainder `Σ_{j=2..order} F̃_j / j! (y_k − ỹ)^j` of the
/// forward map around `ỹ`, slot by slot.
pub fn remainder_diagnostics(
    sys: &FactoredSystem,
    y_k: &[C64],
    y_tilde: &[C64],
    order: usize,
    mode: Mode,
) -> Result<Vec<C64>> {
    if order > 4 {
        return Err(Error::UnsupportedOrder(order));
    }
    let mut r = vec![C64::default(); sys.m()];
    for (el, &s) in sys.elementaries().iter().zip(sys.slot_starts()) {
        if el.width() == 2 {
            // (m, a) = ((ln z₁ + ln z₂)/2, (ln z₁ − ln z₂)/2i) with
            // z₁ = K + iL, z₂ = K − iL; each logarithm is expanded separately
            let i = C64::i();
            let z1 = y_tilde[s] + i * y_tilde[s + 1];
            let z2 = y_tilde[s] - i * y_tilde[s + 1];
            let d1 = (y_k[s] - y_tilde[s]) + i * (y_k[s + 1] - y_tilde[s + 1]);
            let d2 = (y_k[s] - y_tilde[s]) - i * (y_k[s + 1] - y_tilde[s + 1]);
            let log_tail = |z: C64, d: C64| {
                (2..=order).fold(C64::default(), |acc, j| {
                    let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
                    acc + (d / z).powi(j as i32) * (sign / j as f64)
                })
            };
            let (r1, r2) = (log_tail(z1, d1), log_tail(z2, d2));
            r[s] = (r1 + r2) * 0.5;
            r[s + 1] = (r1 - r2) / (2.0 * i);
            continue;
        }
        let d = el.forward_derivatives(y_tilde[s], order, mode)?;
        let delta = y_k[s] - y_tilde[s];
        let mut factorial = 1.0;
        let mut acc = C64::default();
        for (j, dj) in d.iter().enumerate().take(order + 1).skip(1) {
            factorial *= j as f64;
            if j >= 2 {
                acc += dj * delta.powi(j as i32) / factorial;
            }
        }
        r[s] = acc;
    }
    Ok(r)
}

/// Exact remainder `F̃ (ỹ − y_k) − (ũ − u_k)` with `F̃` the inverse of the
/// clamped `F̃⁻¹` at `ũ` and `u_k = C x_k + d`.
pub fn exact_remainder(sys: &FactoredSystem, x_k: &[C64], y_k: &[C64], y_tilde: &[C64], u_tilde: &[C64]) -> Vec<C64> {
    let u_k = sys.linear_stage(x_k);
    let blocks = sys.derivatives(u_tilde);
    let mut r = vec![C64::default(); sys.m()];
    for (b, &s) in blocks.iter().zip(sys.slot_starts()) {
        match b {
            Block::Scalar(d) => {
                r[s] = (y_tilde[s] - y_k[s]) / d - (u_tilde[s] - u_k[s]);
            }
            Block::Pair(q) => {
                let det = q[0] * q[3] - q[1] * q[2];
                let inv = [q[3] / det, -q[1] / det, -q[2] / det, q[0] / det];
                let (d0, d1) = (y_tilde[s] - y_k[s], y_tilde[s + 1] - y_k[s + 1]);
                r[s] = inv[0] * d0 + inv[1] * d1 - (u_tilde[s] - u_k[s]);
                r[s + 1] = inv[2] * d0 + inv[3] * d1 - (u_tilde[s + 1] - u_k[s + 1]);
            }
        }
    }
    r
}

/// Solves from internal starting point `x0` with the configured variant.
pub fn solve(sys: &FactoredSystem, x0: &[C64], cfg: &SolverConfig) -> Result<SolveOutcome> {
    if cfg.variant == Variant::NewtonBaseline {
        return solve_newton(sys, x0, cfg);
    }
    check_inputs(sys, x0, cfg)?;
    let mut run = Run::new(sys, cfg, x0);
    let mut augmented = cfg.variant == Variant::TwoStepAugmented;
    let mut x = x0.to_vec();
    let mut y = match sys.unfold(&x, cfg.mode) {
        Ok(pt) => pt.y,
        Err(e) => return Ok(run.breakdown(x, 0, e)),
    };
    for k in 1..=cfg.max_iter {
        let step = if cfg.skip_step1 {
            newton_increment(sys, &x, &y).map(|(x_next, cond)| (x_next, None, cond, 0.0))
        } else {
            two_step(sys, &y, cfg, &mut augmented, k, &mut run)
        };
        let (x_next, mu, cond, lambda_norm) = match step {
            Ok(s) => s,
            Err(e) => return Ok(run.breakdown(x, k - 1, e)),
        };
        let dx = norm_l1(&x_next.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
        x = x_next;
        y = match finite_vec(&x, "iterate").and_then(|_| sys.unfold(&x, cfg.mode)) {
            Ok(pt) => pt.y,
            Err(e) => return Ok(run.breakdown(x, k, e)),
        };
        let dp = norm_inf(&sys.residual(&y));
        run.trace.push(IterationRecord {
            k,
            dx_l1: dx,
            dp_inf: dp,
            lambda_norm,
            mu_norm: mu.as_deref().map(norm_inf),
            condition_estimate: cond,
            x: x.clone(),
        });
        if run.converged(dx, dp) {
            return Ok(run.finish_converged(x, &y, k));
        }
    }
    Ok(run.finish_unconverged(x, &y))
}

/// Newton-Raphson on the factored form: `H_k Δx = p − E y_k` with `H_k` at
/// `u_k = C x_k + d`.
pub fn solve_newton(sys: &FactoredSystem, x0: &[C64], cfg: &SolverConfig) -> Result<SolveOutcome> {
    check_inputs(sys, x0, cfg)?;
    let original = sys.recovery() == Recovery::Exp && cfg.newton_space == NewtonSpace::Original;
    let mut run = Run::new(sys, cfg, x0);
    let mut x = x0.to_vec();
    let mut y = match sys.unfold(&x, cfg.mode) {
        Ok(pt) => pt.y,
        Err(e) => return Ok(run.breakdown(x, 0, e)),
    };
    for k in 1..=cfg.max_iter {
        let step = if original {
            newton_increment_original(sys, &x, &y, cfg.mode)
        } else {
            newton_increment(sys, &x, &y).map(|(x_next, cond)| {
                let dx = norm_l1(&x_next.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
                (x_next, dx, cond)
            })
        };
        let (x_next, dx, cond) = match step {
            Ok(s) => s,
            Err(e) => return Ok(run.breakdown(x, k - 1, e)),
        };
        x = x_next;
        y = match finite_vec(&x, "iterate").and_then(|_| sys.unfold(&x, cfg.mode)) {
            Ok(pt) => pt.y,
            Err(e) => return Ok(run.breakdown(x, k, e)),
        };
        let dp = norm_inf(&sys.residual(&y));
        run.trace.push(IterationRecord {
            k,
            dx_l1: dx,
            dp_inf: dp,
            lambda_norm: 0.0,
            mu_norm: None,
            condition_estimate: cond,
            x: x.clone(),
        });
        if run.converged(dx, dp) {
            return Ok(run.finish_converged(x, &y, k));
        }
    }
    Ok(run.finish_unconverged(x, &y))
}

fn check_inputs(sys: &FactoredSystem, x0: &[C64], cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if x0.len() != sys.n() {
        return Err(Error::Dimension(format!(
            "starting point has {} entries, expected {}",
            x0.len(),
            sys.n()
        )));
    }
    finite_vec(x0, "starting point")?;
    if cfg.mode == Mode::Real && (x0.iter().any(|v| v.im != 0.0) || sys.p().iter().any(|v| v.im != 0.0)) {
        return Err(Error::Domain("complex starting point or target in real mode".into()));
    }
    Ok(())
}

fn finite_vec(v: &[C64], what: &str) -> Result<()> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

type TwoStepOut = (Vec<C64>, Option<Vec<C64>>, f64, f64);

fn two_step(
    sys: &FactoredSystem,
    y: &[C64],
    cfg: &SolverConfig,
    augmented: &mut bool,
    k: usize,
    run: &mut Run,
) -> Result<TwoStepOut> {
    let (y_tilde, lambda) = step1_least_distance(sys, y)?;
    let lambda_norm = norm_inf(&lambda);
    if !*augmented {
        match step2_newton_like(sys, &y_tilde, cfg.mode) {
            Ok(s) if !(cfg.escalate && s.condition_estimate > NEAR_SINGULAR_CONDITION) => {
                return Ok((s.x_next, None, s.condition_estimate, lambda_norm));
            }
            Err(Error::SingularMatrix { .. }) if cfg.escalate => {}
            Err(e) => return Err(e),
            Ok(_) => {}
        }
        log::info!("switching to the bordered step at iteration {k}");
        *augmented = true;
        run.escalated_at = Some(k);
    }
    let s = step2_augmented(sys, &y_tilde, cfg.mode)?;
    Ok((s.x_next, s.mu, s.condition_estimate, lambda_norm))
}

fn newton_increment(sys: &FactoredSystem, x: &[C64], y: &[C64]) -> Result<(Vec<C64>, f64)> {
    let u = sys.linear_stage(x);
    let h = sys.factored_jacobian(&u);
    let sol = sys.square_solver().solve(&h, &sys.residual(y))?;
    let x_next = x.iter().zip(&sol.x).map(|(a, b)| a + b).collect();
    Ok((x_next, sol.condition_estimate()))
}

/// Newton step in `z = exp(α)`: `(H_α diag(1/z)) Δz = p − E y`. Returns the
/// new internal point, `‖Δz‖₁` and the condition estimate.
fn newton_increment_original(sys: &FactoredSystem, alpha: &[C64], y: &[C64], mode: Mode) -> Result<(Vec<C64>, f64, f64)> {
    let z: Vec<C64> = alpha.iter().map(|a| a.exp()).collect();
    let u = sys.linear_stage(alpha);
    let mut h = sys.factored_jacobian(&u);
    let cols: Vec<usize> = h.indices().to_vec();
    for (v, c) in h.data_mut().iter_mut().zip(cols) {
        *v /= z[c];
    }
    let sol = sys.square_solver().solve(&h, &sys.residual(y))?;
    let mut next = Vec::with_capacity(z.len());
    for (zi, dz) in z.iter().zip(&sol.x) {
        let zn = zi + dz;
        if zn.norm() == 0.0 || (mode == Mode::Real && zn.re <= 0.0) {
            return Err(Error::Domain("Newton iterate left the domain of the logarithm".into()));
        }
        next.push(zn.ln());
    }
    Ok((next, norm_l1(&sol.x), sol.condition_estimate()))
}

/// Bookkeeping shared by the iteration loops.
/// Residual allowed at a step-size convergence, in units of `tol_dx_l1`.
const CERTIFICATE_FACTOR: f64 = 10.0;

struct Run<'a> {
    sys: &'a FactoredSystem,
    cfg: &'a SolverConfig,
    trace: Vec<IterationRecord>,
    escalated_at: Option<usize>,
    x0_scale: f64,
}

impl<'a> Run<'a> {
    fn new(sys: &'a FactoredSystem, cfg: &'a SolverConfig, x0: &[C64]) -> Self {
        Run {
            sys,
            cfg,
            trace: Vec::new(),
            escalated_at: None,
            x0_scale: norm_inf(x0).max(1.0),
        }
    }

    /// A small step only counts when the residual is small as well; slow
    /// creeping between incompatible branches has a tiny step but no root.
    fn converged(&self, dx: f64, dp: f64) -> bool {
        (dx < self.cfg.tol_dx_l1 && dp <= CERTIFICATE_FACTOR * self.cfg.tol_dx_l1)
            || self.cfg.tol_dp_inf.is_some_and(|t| dp < t)
    }

    fn outcome(&mut self, status: Status, x: Vec<C64>, iterations: usize, final_lambda: f64, final_dp: f64, detail: Option<String>) -> SolveOutcome {
        let x_final = self.sys.recover(&x);
        SolveOutcome {
            status,
            x_final,
            x_internal: x,
            iterations,
            trace: std::mem::take(&mut self.trace),
            final_lambda_norm: final_lambda,
            final_dp_inf: final_dp,
            escalated_at: self.escalated_at,
            detail,
        }
    }

    fn breakdown(&mut self, x: Vec<C64>, iterations: usize, err: Error) -> SolveOutcome {
        self.outcome(Status::Breakdown, x, iterations, f64::NAN, f64::NAN, Some(err.to_string()))
    }

    fn finish_converged(&mut self, x: Vec<C64>, y: &[C64], k: usize) -> SolveOutcome {
        let (lambda, dp) = self.final_norms(y);
        let mut out = self.outcome(Status::ConvergedComplex, x, k, lambda, dp, None);
        let imag = out.x_final.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
        if self.cfg.mode == Mode::Real || imag <= self.cfg.tol_dx_l1 {
            out.status = Status::ConvergedReal;
            out.x_final.iter_mut().for_each(|v| v.im = 0.0);
        }
        out
    }

    fn finish_unconverged(&mut self, x: Vec<C64>, y: &[C64]) -> SolveOutcome {
        let (lambda, dp) = self.final_norms(y);
        let status = self.classify();
        let detail = Some(format!("no convergence in {} iterations", self.cfg.max_iter));
        self.outcome(status, x, self.cfg.max_iter, lambda, dp, detail)
    }

    fn final_norms(&self, y: &[C64]) -> (f64, f64) {
        let lambda = step1_least_distance(self.sys, y)
            .map(|(_, l)| norm_inf(&l))
            .unwrap_or(f64::NAN);
        (lambda, norm_inf(&self.sys.residual(y)))
    }

    /// Oscillating when neither norm reached a new minimum during the last
    /// `oscillation_window` iterations and the iterates stay bounded.
    fn classify(&self) -> Status {
        let w = self.cfg.oscillation_window;
        if self.trace.len() <= w {
            return Status::MaxIterations;
        }
        let (early, late) = self.trace.split_at(self.trace.len() - w);
        let min = |r: &[IterationRecord], f: fn(&IterationRecord) -> f64| r.iter().map(f).fold(f64::INFINITY, f64::min);
        let stalled = min(late, |r| r.dx_l1) >= min(early, |r| r.dx_l1) && min(late, |r| r.dp_inf) >= min(early, |r| r.dp_inf);
        let bound = 1e6 * self.x0_scale;
        let bounded = late.iter().all(|r| norm_inf(&r.x) < bound);
        if stalled && bounded {
            Status::Oscillating
        } else {
            Status::MaxIterations
        }
    }
}

/// Writes the iteration trace as CSV with columns `k, dx_l1, dp_inf,
/// lambda_norm, mu_norm, cond_est` followed by `x<i>_re, x<i>_im`.
pub fn write_trace_csv<W: Write>(outcome: &SolveOutcome, names: &[String], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["k", "dx_l1", "dp_inf", "lambda_norm", "mu_norm", "cond_est"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for name in names {
        header.push(format!("{name}_re"));
        header.push(format!("{name}_im"));
    }
    w.write_record(&header)?;
    for r in &outcome.trace {
        let mut row = vec![
            r.k.to_string(),
            r.dx_l1.to_string(),
            r.dp_inf.to_string(),
            r.lambda_norm.to_string(),
            r.mu_norm.map(|m| m.to_string()).unwrap_or_default(),
            r.condition_estimate.to_string(),
        ];
        for v in &r.x {
            row.push(v.re.to_string());
            row.push(v.im.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
