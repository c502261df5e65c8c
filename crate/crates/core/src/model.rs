//! Factored representation `h(x) = E f⁻¹(C x + d) = p`.
//!
//! `E` (n×m) and `C` (m×n) are constant real matrices, `d` an optional
//! constant offset of the linear stage and `f` a diagonal map made of
//! [`Elementary`] slots (scalars, or two-slot blocks). The system caches the
//! factorization of `E Eᵀ`, computed when it is built, and the sparsity plan
//! of the factored Jacobian `H = E F⁻¹ C`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::elementary::{Block, Elementary, Mode, C64};
use crate::error::{Error, Result};
use crate::linsolve::{norm_inf, spd_factor, CachedSpdFactor, CsrMatrix, SquareSolver};

/// How internal unknowns map back to the variables the user declared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Recovery {
    #[default]
    Identity,
    /// Unknowns are logarithms of the declared variables.
    Exp,
}

/// One term of an auxiliary definition's argument, in declared variables.
#[derive(Debug, Clone, PartialEq)]
pub enum AuxTerm {
    /// `c * g(x_var)`.
    Single {
        coefficient: f64,
        function: Elementary,
        var: usize,
    },
    /// `c * Π x_k^q_k`.
    Product {
        coefficient: f64,
        powers: Vec<(usize, f64)>,
    },
}

/// Definition of an auxiliary unknown, used to complete an initial guess:
/// `x[index] = g(Σ terms)` evaluated in the declared (not log) variables.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxInit {
    pub index: usize,
    pub function: Elementary,
    pub argument: Vec<AuxTerm>,
}

impl AuxTerm {
    fn vars(&self) -> Vec<usize> {
        match self {
            AuxTerm::Single { var, .. } => vec![*var],
            AuxTerm::Product { powers, .. } => powers.iter().map(|&(k, _)| k).collect(),
        }
    }

    fn evaluate(&self, x: &[C64]) -> Result<C64> {
        match self {
            AuxTerm::Single {
                coefficient,
                function,
                var,
            } => Ok(function.inverse_scalar(x[*var], Mode::Complex)? * *coefficient),
            AuxTerm::Product {
                coefficient,
                powers,
            } => Ok(powers
                .iter()
                .fold(C64::new(*coefficient, 0.0), |acc, &(k, q)| acc * pow_c(x[k], q))),
        }
    }
}

fn pow_c(z: C64, q: f64) -> C64 {
    if q.fract() == 0.0 && q.abs() < i32::MAX as f64 {
        z.powi(q as i32)
    } else {
        z.powf(q)
    }
}

/// Everything needed to build a [`FactoredSystem`].
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub e: CsrMatrix<f64>,
    pub c: CsrMatrix<f64>,
    /// Constant added to `C x`; empty means zero.
    pub offset: Vec<f64>,
    pub elementaries: Vec<Elementary>,
    pub p: Vec<C64>,
    pub names: Vec<String>,
    pub recovery: Recovery,
    pub aux: Vec<AuxInit>,
}

impl SystemSpec {
    pub fn new(e: CsrMatrix<f64>, c: CsrMatrix<f64>, elementaries: Vec<Elementary>, p: Vec<C64>) -> Self {
        SystemSpec {
            e,
            c,
            offset: Vec::new(),
            elementaries,
            p,
            names: Vec::new(),
            recovery: Recovery::Identity,
            aux: Vec::new(),
        }
    }
}

#[derive(Debug)]
struct Structure {
    e: CsrMatrix<f64>,
    c: CsrMatrix<f64>,
    offset: Vec<f64>,
    elementaries: Vec<Elementary>,
    slot_start: Vec<usize>,
    deriv_start: Vec<usize>,
    names: Vec<String>,
    recovery: Recovery,
    aux: Vec<AuxInit>,
    gram: CachedSpdFactor,
    plan: JacobianPlan,
    square: SquareSolver,
}

/// Immutable factored system. Cloning is cheap: the structure is shared and
/// only the target vector is copied.
#[derive(Debug, Clone)]
pub struct FactoredSystem {
    inner: Arc<Structure>,
    p: Vec<C64>,
}

/// State of the factored system at one `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub x: Vec<C64>,
    /// `u = C x + d`.
    pub u: Vec<C64>,
    /// `y = f⁻¹(u)`.
    pub y: Vec<C64>,
    /// `p − E y`.
    pub residual: Vec<C64>,
    pub dp_inf: f64,
}

/// Precomputed triple products: entry `h` of `H` accumulates
/// `coef * F⁻¹[deriv]` for every listed contribution.
#[derive(Debug, Clone)]
struct JacobianPlan {
    pattern: CsrMatrix<C64>,
    contributions: Vec<(usize, usize, f64)>,
}

impl FactoredSystem {
    pub fn new(
        e: CsrMatrix<f64>,
        c: CsrMatrix<f64>,
        elementaries: Vec<Elementary>,
        p: Vec<C64>,
    ) -> Result<Self> {
        Self::from_spec(SystemSpec::new(e, c, elementaries, p))
    }

    pub fn from_spec(spec: SystemSpec) -> Result<Self> {
        let SystemSpec {
            e,
            c,
            mut offset,
            elementaries,
            p,
            mut names,
            recovery,
            aux,
        } = spec;
        let (n, m) = (e.nrows(), e.ncols());
        if c.nrows() != m || c.ncols() != n {
            return Err(Error::Dimension(format!(
                "E is {n}x{m} so C must be {m}x{n}, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        if m < n {
            return Err(Error::Dimension(format!("m = {m} intermediate slots is fewer than n = {n} unknowns")));
        }
        if p.len() != n {
            return Err(Error::Dimension(format!("target has {} entries, expected {n}", p.len())));
        }
        if p.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("target vector".into()));
        }
        if offset.is_empty() {
            offset = vec![0.0; m];
        } else if offset.len() != m {
            return Err(Error::Dimension(format!("offset has {} entries, expected {m}", offset.len())));
        }
        if names.is_empty() {
            names = (1..=n).map(|i| format!("x{i}")).collect();
        } else if names.len() != n {
            return Err(Error::Dimension(format!("{} names for {n} unknowns", names.len())));
        }
        for (r, col, v) in e.triplets().chain(c.triplets()) {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("matrix entry ({r}, {col})")));
            }
        }
        let mut slot_start = Vec::with_capacity(elementaries.len());
        let mut deriv_start = Vec::with_capacity(elementaries.len());
        let (mut slots, mut derivs) = (0, 0);
        for el in &elementaries {
            el.validate()?;
            slot_start.push(slots);
            deriv_start.push(derivs);
            slots += el.width();
            derivs += el.width() * el.width();
        }
        if slots != m {
            return Err(Error::Dimension(format!(
                "elementaries cover {slots} slots but E has {m} columns"
            )));
        }
        for a in &aux {
            if a.index >= n || a.argument.iter().flat_map(AuxTerm::vars).any(|k| k >= n) {
                return Err(Error::Dimension("auxiliary definition refers past the unknowns".into()));
            }
        }
        let gram = spd_factor(&e.matmul(&e.transpose())?)?;
        let plan = JacobianPlan::new(&e, &c, &elementaries, &slot_start, &deriv_start);
        Ok(FactoredSystem {
            inner: Arc::new(Structure {
                e,
                c,
                offset,
                elementaries,
                slot_start,
                deriv_start,
                names,
                recovery,
                aux,
                gram,
                plan,
                square: SquareSolver::new(),
            }),
            p,
        })
    }

    /// Copy of the system with the branch of elementary `index` replaced.
    /// The structure is rebuilt, including the `E Eᵀ` factorization.
    pub fn with_branch(&self, index: usize, branch: crate::elementary::BranchSelector) -> Result<Self> {
        let mut spec = self.to_spec();
        let el = spec.elementaries.get_mut(index).ok_or_else(|| {
            Error::Model(format!("no elementary slot {} (system has {})", index + 1, self.elementaries().len()))
        })?;
        *el = el.with_branch(branch)?;
        Self::from_spec(spec)
    }

    pub fn to_spec(&self) -> SystemSpec {
        let s = &self.inner;
        SystemSpec {
            e: s.e.clone(),
            c: s.c.clone(),
            offset: s.offset.clone(),
            elementaries: s.elementaries.clone(),
            p: self.p.clone(),
            names: s.names.clone(),
            recovery: s.recovery,
            aux: s.aux.clone(),
        }
    }

    /// Same structure with a different target; `E Eᵀ` is not refactored.
    pub fn with_target(&self, p: Vec<C64>) -> Result<Self> {
        if p.len() != self.n() {
            return Err(Error::Dimension(format!("target has {} entries, expected {}", p.len(), self.n())));
        }
        Ok(FactoredSystem {
            inner: Arc::clone(&self.inner),
            p,
        })
    }

    pub fn with_real_target(&self, p: &[f64]) -> Result<Self> {
        self.with_target(p.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn n(&self) -> usize {
        self.inner.e.nrows()
    }

    pub fn m(&self) -> usize {
        self.inner.e.ncols()
    }

    pub fn e(&self) -> &CsrMatrix<f64> {
        &self.inner.e
    }

    pub fn c(&self) -> &CsrMatrix<f64> {
        &self.inner.c
    }

    pub fn offset(&self) -> &[f64] {
        &self.inner.offset
    }

    pub fn p(&self) -> &[C64] {
        &self.p
    }

    pub fn elementaries(&self) -> &[Elementary] {
        &self.inner.elementaries
    }

    /// First u-slot of each elementary.
    pub fn slot_starts(&self) -> &[usize] {
        &self.inner.slot_start
    }

    pub fn names(&self) -> &[String] {
        &self.inner.names
    }

    pub fn recovery(&self) -> Recovery {
        self.inner.recovery
    }

    pub fn aux(&self) -> &[AuxInit] {
        &self.inner.aux
    }

    /// Cached factorization of `E Eᵀ`.
    pub fn gram(&self) -> &CachedSpdFactor {
        &self.inner.gram
    }

    /// Square solver whose fill-reducing ordering is shared by all solves
    /// on this structure.
    pub fn square_solver(&self) -> &SquareSolver {
        &self.inner.square
    }

    /// `u = C x + d`.
    pub fn linear_stage(&self, x: &[C64]) -> Vec<C64> {
        let mut u = self.inner.c.mul_vec(x);
        for (ui, &d) in u.iter_mut().zip(&self.inner.offset) {
            *ui += d;
        }
        u
    }

    /// `y = f⁻¹(u)` slot by slot.
    pub fn inverse_map(&self, u: &[C64], mode: Mode) -> Result<Vec<C64>> {
        let mut y = vec![C64::default(); self.m()];
        for (el, &s) in self.inner.elementaries.iter().zip(&self.inner.slot_start) {
            let w = el.width();
            el.inverse(&u[s..s + w], &mut y[s..s + w], mode)?;
        }
        Ok(y)
    }

    /// `u = f(y)` slot by slot on the configured branches.
    pub fn forward_map(&self, y: &[C64], mode: Mode) -> Result<Vec<C64>> {
        let mut u = vec![C64::default(); self.m()];
        for (el, &s) in self.inner.elementaries.iter().zip(&self.inner.slot_start) {
            let w = el.width();
            el.forward(&y[s..s + w], &mut u[s..s + w], mode)?;
        }
        Ok(u)
    }

    /// Clamped blocks of `F⁻¹ = dy/du` at `u`.
    pub fn derivatives(&self, u: &[C64]) -> Vec<Block> {
        self.inner
            .elementaries
            .iter()
            .zip(&self.inner.slot_start)
            .map(|(el, &s)| el.derivative(&u[s..s + el.width()]))
            .collect()
    }

    /// `F⁻¹ v` for block derivatives from [`derivatives`](Self::derivatives).
    pub fn apply_derivatives(&self, blocks: &[Block], v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::default(); self.m()];
        for (b, &s) in blocks.iter().zip(&self.inner.slot_start) {
            match b {
                Block::Scalar(d) => out[s] = d * v[s],
                Block::Pair(q) => {
                    out[s] = q[0] * v[s] + q[1] * v[s + 1];
                    out[s + 1] = q[2] * v[s] + q[3] * v[s + 1];
                }
            }
        }
        out
    }

    /// `H = E F⁻¹ C` from precomputed derivative blocks.
    pub fn jacobian_from_blocks(&self, blocks: &[Block]) -> CsrMatrix<C64> {
        let mut flat = vec![C64::default(); self.inner.plan_len()];
        for (b, &d) in blocks.iter().zip(&self.inner.deriv_start) {
            let s = b.as_slice();
            flat[d..d + s.len()].copy_from_slice(s);
        }
        self.inner.plan.assemble(&flat)
    }

    /// Factored Jacobian `H = E F⁻¹ C` at `u`.
    pub fn factored_jacobian(&self, u: &[C64]) -> CsrMatrix<C64> {
        self.jacobian_from_blocks(&self.derivatives(u))
    }

    pub fn unfold(&self, x: &[C64], mode: Mode) -> Result<EvalPoint> {
        self.check_x(x)?;
        let u = self.linear_stage(x);
        let y = self.inverse_map(&u, mode)?;
        let residual = self.residual(&y);
        Ok(EvalPoint {
            x: x.to_vec(),
            dp_inf: norm_inf(&residual),
            u,
            y,
            residual,
        })
    }

    /// `h(x) = E f⁻¹(C x + d)`.
    pub fn fold_evaluate(&self, x: &[C64], mode: Mode) -> Result<Vec<C64>> {
        self.check_x(x)?;
        let y = self.inverse_map(&self.linear_stage(x), mode)?;
        Ok(self.inner.e.mul_vec(&y))
    }

    /// `p − E y`.
    pub fn residual(&self, y: &[C64]) -> Vec<C64> {
        let ey = self.inner.e.mul_vec(y);
        self.p.iter().zip(ey).map(|(p, v)| p - v).collect()
    }

    /// Internal starting point from a guess in the declared variables.
    /// Either every unknown is given, or only the leading non-auxiliary ones
    /// and the auxiliaries are completed from their definitions.
    pub fn initial_point(&self, x0: &[C64]) -> Result<Vec<C64>> {
        let n = self.n();
        let given = x0.len();
        let primary = n - self.inner.aux.len();
        let mut x = if given == n {
            x0.to_vec()
        } else if given == primary {
            let mut x = x0.to_vec();
            x.resize(n, C64::default());
            for a in &self.inner.aux {
                let mut w = C64::default();
                for t in &a.argument {
                    w += t.evaluate(&x)?;
                }
                x[a.index] = a.function.inverse_scalar(w, Mode::Complex)?;
            }
            x
        } else {
            return Err(Error::Dimension(format!(
                "initial guess has {given} entries, expected {n} or {primary}"
            )));
        };
        if self.inner.recovery == Recovery::Exp {
            for v in x.iter_mut() {
                if v.norm() == 0.0 {
                    return Err(Error::Domain(
                        "log-variable model needs nonzero initial values".into(),
                    ));
                }
                *v = v.ln();
            }
        }
        Ok(x)
    }

    /// Declared variables from internal unknowns.
    pub fn recover(&self, x: &[C64]) -> Vec<C64> {
        match self.inner.recovery {
            Recovery::Identity => x.to_vec(),
            Recovery::Exp => x.iter().map(|v| v.exp()).collect(),
        }
    }

    fn check_x(&self, x: &[C64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Dimension(format!("x has {} entries, expected {}", x.len(), self.n())));
        }
        if x.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("x".into()));
        }
        Ok(())
    }
}

impl Structure {
    fn plan_len(&self) -> usize {
        self.elementaries.iter().map(|e| e.width() * e.width()).sum()
    }
}

impl JacobianPlan {
    fn new(
        e: &CsrMatrix<f64>,
        c: &CsrMatrix<f64>,
        elementaries: &[Elementary],
        slot_start: &[usize],
        deriv_start: &[usize],
    ) -> Self {
        let m = e.ncols();
        let mut owner = vec![0usize; m];
        for (i, (el, &s)) in elementaries.iter().zip(slot_start).enumerate() {
            owner[s..s + el.width()].iter_mut().for_each(|o| *o = i);
        }
        let mut positions: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut raw = Vec::new();
        for (r, a, e_ra) in e.triplets() {
            let i = owner[a];
            let (s, w) = (slot_start[i], elementaries[i].width());
            let la = a - s;
            for lb in 0..w {
                let d = deriv_start[i] + la * w + lb;
                for (col, c_bc) in c.row(s + lb) {
                    positions.insert((r, col), 0);
                    raw.push(((r, col), d, e_ra * c_bc));
                }
            }
        }
        for (k, v) in positions.values_mut().enumerate() {
            *v = k;
        }
        let pattern = CsrMatrix::from_triplets(
            e.nrows(),
            c.ncols(),
            positions.keys().map(|&(r, col)| (r, col, C64::default())),
        )
        .expect("pattern within bounds");
        let contributions = raw
            .into_iter()
            .map(|(key, d, coef)| (positions[&key], d, coef))
            .collect();
        JacobianPlan {
            pattern,
            contributions,
        }
    }

    fn assemble(&self, flat: &[C64]) -> CsrMatrix<C64> {
        let mut h = self.pattern.clone();
        let data = h.data_mut();
        for &(idx, d, coef) in &self.contributions {
            data[idx] += flat[d] * coef;
        }
        h
    }
}
