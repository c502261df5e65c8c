//! Catalog of invertible elementary maps.
//!
//! Each [`Elementary`] describes one nonlinear term `y = g(w)` of a model,
//! where `w` is derived from the linear-stage variable `u` through an
//! [`Argument`] (`w = scale * u` or `w = scale * exp(u)`). Three evaluations
//! are provided:
//!
//! * [`Elementary::forward`]: `u = f(y)`, the branch-aware preimage of `y`,
//! * [`Elementary::inverse`]: `y = f⁻¹(u)`, the term itself,
//! * [`Elementary::derivative`]: `dy/du`, clamped into `[min, max]` in
//!   magnitude so that the assembled Jacobian never sees a null or runaway
//!   diagonal entry.
//!
//! Values are carried as [`C64`]. In [`Mode::Real`] every function stays on
//! the real line and reports [`Error::Domain`] instead of producing a complex
//! result; in [`Mode::Complex`] principal complex branches are used.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Scalar field the solver works in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Real,
    Complex,
}

/// Nonlinear term `y = g(w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    /// `y = w^q`.
    Power(f64),
    /// `y = e^w`. Power products in log variables use this kind.
    Exp,
    /// `y = ln w`.
    Log,
    /// `y = sin w`.
    Sin,
    /// `y = cos w`.
    Cos,
    /// `y = tan w`.
    Tan,
    /// `y = tan(w - shift)`; the forward map is `shift + atan(y)`.
    TanShifted(f64),
    /// `y = asin w`.
    Asin,
    /// `y = acos w`.
    Acos,
    /// `y = atan w`.
    Atan,
    /// `y = w`.
    Identity,
    /// Two-slot block `(K, L) = e^m (cos a, sin a)` for `(m, a)`.
    PolarPair,
}

impl Kind {
    /// Name used in model files.
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Power(_) => "pow",
            Kind::Exp => "exp",
            Kind::Log => "log",
            Kind::Sin => "sin",
            Kind::Cos => "cos",
            Kind::Tan => "tan",
            Kind::TanShifted(_) => "tan_shifted",
            Kind::Asin => "asin",
            Kind::Acos => "acos",
            Kind::Atan => "atan",
            Kind::Identity => "id",
            Kind::PolarPair => "polar_pair",
        }
    }

    /// Kind whose term is the functional inverse of this one, used when an
    /// auxiliary definition `z = g(expr)` is rewritten as `0 = expr - g⁻¹(z)`.
    pub fn functional_inverse(&self) -> Option<Kind> {
        Some(match *self {
            Kind::Power(q) => Kind::Power(1.0 / q),
            Kind::Exp => Kind::Log,
            Kind::Log => Kind::Exp,
            Kind::Sin => Kind::Asin,
            Kind::Cos => Kind::Acos,
            Kind::Tan => Kind::Atan,
            Kind::Asin => Kind::Sin,
            Kind::Acos => Kind::Cos,
            Kind::Atan => Kind::Tan,
            Kind::Identity => Kind::Identity,
            Kind::TanShifted(_) | Kind::PolarPair => return None,
        })
    }

    pub fn width(&self) -> usize {
        if matches!(self, Kind::PolarPair) {
            2
        } else {
            1
        }
    }
}

/// Which preimage the forward map returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchSelector {
    #[default]
    Principal,
    /// `u = -y^(1/q)` for even integer `q`.
    NegativeRoot,
    /// Extended trigonometric range `(q - 1/2)π < u < (q + 1/2)π`.
    TrigIndex(i32),
}

impl BranchSelector {
    fn trig_index(&self) -> i32 {
        match self {
            BranchSelector::TrigIndex(q) => *q,
            _ => 0,
        }
    }
}

/// How `w` is obtained from the linear-stage variable `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Argument {
    pub scale: f64,
    /// `w = scale * e^u` instead of `w = scale * u`. Set for terms of models
    /// written in log variables.
    pub exponential: bool,
}

impl Default for Argument {
    fn default() -> Self {
        Argument {
            scale: 1.0,
            exponential: false,
        }
    }
}

/// Bounds on the magnitude of `dy/du`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamp {
    pub min: f64,
    pub max: f64,
}

impl Default for Clamp {
    fn default() -> Self {
        Clamp {
            min: 1e-12,
            max: 1e12,
        }
    }
}

impl Clamp {
    fn scalar(&self, d: C64) -> C64 {
        let a = d.norm();
        if !a.is_finite() {
            return C64::new(self.max, 0.0);
        }
        if a < self.min {
            if a == 0.0 {
                C64::new(self.min, 0.0)
            } else {
                d * (self.min / a)
            }
        } else if a > self.max {
            d * (self.max / a)
        } else {
            d
        }
    }
}

/// Derivative of one elementary: a scalar, or a 2×2 block stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Block {
    Scalar(C64),
    Pair([C64; 4]),
}

impl Block {
    pub fn as_slice(&self) -> &[C64] {
        match self {
            Block::Scalar(d) => std::slice::from_ref(d),
            Block::Pair(b) => b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elementary {
    pub kind: Kind,
    pub branch: BranchSelector,
    pub argument: Argument,
    pub clamp: Clamp,
}

impl Elementary {
    pub fn new(kind: Kind) -> Self {
        Elementary {
            kind,
            branch: BranchSelector::Principal,
            argument: Argument::default(),
            clamp: Clamp::default(),
        }
    }

    pub fn power(q: f64) -> Self {
        Self::new(Kind::Power(q))
    }

    pub fn with_branch(mut self, branch: BranchSelector) -> Result<Self> {
        self.branch = branch;
        self.validate()?;
        Ok(self)
    }

    pub fn with_argument(mut self, argument: Argument) -> Result<Self> {
        self.argument = argument;
        self.validate()?;
        Ok(self)
    }

    pub fn with_clamp(mut self, clamp: Clamp) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn width(&self) -> usize {
        self.kind.width()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidElementary(m));
        match self.kind {
            Kind::Power(q) if q == 0.0 || !q.is_finite() => {
                return bad(format!("power exponent {q} is not usable"))
            }
            Kind::TanShifted(s) if !s.is_finite() => return bad("non-finite shift".into()),
            _ => {}
        }
        match self.branch {
            BranchSelector::Principal => {}
            BranchSelector::NegativeRoot => match self.kind {
                Kind::Power(q) if is_even_integer(q) => {}
                _ => return bad("negative root branch requires an even integer power".into()),
            },
            BranchSelector::TrigIndex(_) => {
                if !matches!(self.kind, Kind::Sin | Kind::Cos) {
                    return bad("trigonometric branch index requires sin or cos".into());
                }
            }
        }
        let a = self.argument;
        if a.scale == 0.0 || !a.scale.is_finite() {
            return bad(format!("argument scale {} is not usable", a.scale));
        }
        if self.kind == Kind::PolarPair && a != Argument::default() {
            return bad("polar pair does not take an argument transform".into());
        }
        Ok(())
    }

    /// `u = f(y)` on the selected branch. `y` and `out` have length
    /// [`width`](Self::width).
    pub fn forward(&self, y: &[C64], out: &mut [C64], mode: Mode) -> Result<()> {
        check_mode(y, mode)?;
        if self.kind == Kind::PolarPair {
            let (m, a) = polar_forward(y[0], y[1], mode)?;
            out[0] = m;
            out[1] = a;
        } else {
            out[0] = self.forward_scalar(y[0], mode)?;
        }
        finite(out, "forward")
    }

    /// `y = f⁻¹(u)`; shared by all branches.
    pub fn inverse(&self, u: &[C64], out: &mut [C64], mode: Mode) -> Result<()> {
        check_mode(u, mode)?;
        if self.kind == Kind::PolarPair {
            let r = u[0].exp();
            out[0] = r * u[1].cos();
            out[1] = r * u[1].sin();
        } else {
            out[0] = self.inverse_scalar(u[0], mode)?;
        }
        finite(out, "inverse")
    }

    /// `dy/du` at `u`, clamped.
    pub fn derivative(&self, u: &[C64]) -> Block {
        if self.kind == Kind::PolarPair {
            let r = u[0].exp();
            let (k, l) = (r * u[1].cos(), r * u[1].sin());
            let scale = (k.norm_sqr() + l.norm_sqr()).sqrt();
            let clamped = self.clamp.scalar(C64::new(scale, 0.0)).re;
            let s = if scale.is_finite() && scale > 0.0 {
                clamped / scale
            } else {
                0.0
            };
            if s == 0.0 {
                let c = C64::new(clamped, 0.0);
                return Block::Pair([c, C64::default(), C64::default(), c]);
            }
            return Block::Pair([k * s, -l * s, l * s, k * s]);
        }
        let d = self.inverse_derivatives(u[0], 1)[1];
        Block::Scalar(self.clamp.scalar(d))
    }

    pub fn forward_scalar(&self, y: C64, mode: Mode) -> Result<C64> {
        let v = base_forward(self.kind, self.branch, y, mode)?;
        let t = v / self.argument.scale;
        if self.argument.exponential {
            log_c(t, mode)
        } else {
            Ok(t)
        }
    }

    pub fn inverse_scalar(&self, u: C64, mode: Mode) -> Result<C64> {
        let w = self.inner(u);
        base_inverse(self.kind, w, mode)
    }

    fn inner(&self, u: C64) -> C64 {
        let a = if self.argument.exponential { u.exp() } else { u };
        a * self.argument.scale
    }

    /// `[y, dy/du, ..., d⁴y/du⁴]` at `u`, unclamped, entries above `order`
    /// left at zero. Scalar kinds only.
    pub fn inverse_derivatives(&self, u: C64, order: usize) -> [C64; 5] {
        let w = self.inner(u);
        let g = base_derivatives(self.kind, w);
        let mut h = [C64::default(); 5];
        h[0] = g[0];
        let s = self.argument.scale;
        if self.argument.exponential {
            // Faa di Bruno with every derivative of the inner map equal to w:
            // h^(n) = sum_k S(n, k) g^(k)(w) w^k, S the Stirling numbers of
            // the second kind.
            const STIRLING: [[f64; 5]; 5] = [
                [1.0, 0.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 1.0, 0.0, 0.0],
                [0.0, 1.0, 3.0, 1.0, 0.0],
                [0.0, 1.0, 7.0, 6.0, 1.0],
            ];
            for n in 1..=order.min(4) {
                let mut acc = C64::default();
                let mut wk = C64::new(1.0, 0.0);
                for k in 1..=n {
                    wk *= w;
                    acc += g[k] * wk * STIRLING[n][k];
                }
                h[n] = acc;
            }
        } else {
            let mut sn = 1.0;
            for n in 1..=order.min(4) {
                sn *= s;
                h[n] = g[n] * sn;
            }
        }
        h
    }

    /// Derivatives `d^j u / dy^j` of the forward map at `y`, `j = 0..=order`
    /// (`order <= 4`), obtained from the derivatives of the inverse at
    /// `u = f(y)`. Scalar kinds only.
    pub fn forward_derivatives(&self, y: C64, order: usize, mode: Mode) -> Result<[C64; 5]> {
        if order > 4 {
            return Err(Error::UnsupportedOrder(order));
        }
        if self.kind == Kind::PolarPair {
            return Err(Error::InvalidElementary(
                "polar pair has no scalar derivatives".into(),
            ));
        }
        let u = self.forward_scalar(y, mode)?;
        let g = self.inverse_derivatives(u, order);
        let (g1, g2, g3, g4) = (g[1], g[2], g[3], g[4]);
        let mut d = [C64::default(); 5];
        d[0] = u;
        if order >= 1 {
            d[1] = g1.inv();
        }
        if order >= 2 {
            d[2] = -g2 / g1.powi(3);
        }
        if order >= 3 {
            d[3] = (g2 * g2 * 3.0 - g1 * g3) / g1.powi(5);
        }
        if order >= 4 {
            d[4] = (g1 * g2 * g3 * 10.0 - g2.powi(3) * 15.0 - g1 * g1 * g4) / g1.powi(7);
        }
        Ok(d)
    }
}

fn is_even_integer(q: f64) -> bool {
    q.fract() == 0.0 && (q as i64) % 2 == 0
}

fn is_odd_integer(q: f64) -> bool {
    q.fract() == 0.0 && (q as i64) % 2 != 0
}

fn check_mode(v: &[C64], mode: Mode) -> Result<()> {
    if mode == Mode::Real && v.iter().any(|z| z.im != 0.0) {
        return Err(Error::Domain("complex value in real mode".into()));
    }
    Ok(())
}

fn finite(v: &[C64], what: &str) -> Result<()> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} produced {v:?}")))
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn domain(what: &str, z: C64) -> Error {
    Error::Domain(format!("{what} of {z} has no real value"))
}

fn log_c(z: C64, mode: Mode) -> Result<C64> {
    if z.im == 0.0 && z.re > 0.0 {
        return Ok(real(z.re.ln()));
    }
    if z == C64::default() {
        return Err(Error::NonFinite("logarithm of zero".into()));
    }
    match mode {
        Mode::Real => Err(domain("logarithm", z)),
        Mode::Complex => Ok(z.ln()),
    }
}

fn asin_c(z: C64, mode: Mode) -> Result<C64> {
    if z.im == 0.0 && z.re.abs() <= 1.0 {
        return Ok(real(z.re.asin()));
    }
    match mode {
        Mode::Real => Err(domain("arcsine", z)),
        Mode::Complex => Ok(z.asin()),
    }
}

fn acos_c(z: C64, mode: Mode) -> Result<C64> {
    if z.im == 0.0 && z.re.abs() <= 1.0 {
        return Ok(real(z.re.acos()));
    }
    match mode {
        Mode::Real => Err(domain("arccosine", z)),
        Mode::Complex => Ok(z.acos()),
    }
}

fn atan_c(z: C64) -> C64 {
    if z.im == 0.0 {
        real(z.re.atan())
    } else {
        z.atan()
    }
}

/// `w^e` for a real exponent. Integer exponents use repeated products so
/// that negative real bases stay real.
fn pow_real_exp(w: C64, e: f64, mode: Mode) -> Result<C64> {
    if e.fract() == 0.0 && e.abs() < 64.0 {
        return Ok(w.powi(e as i32));
    }
    if w.im == 0.0 && w.re >= 0.0 {
        return Ok(real(w.re.powf(e)));
    }
    match mode {
        Mode::Real => Err(domain("fractional power", w)),
        Mode::Complex => Ok(if w == C64::default() {
            C64::default()
        } else {
            w.powf(e)
        }),
    }
}

/// Preimage `v` with `g(v) = w` on the selected branch.
fn base_forward(kind: Kind, branch: BranchSelector, w: C64, mode: Mode) -> Result<C64> {
    let q = branch.trig_index();
    let sign = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let v = match kind {
        Kind::Power(p) => {
            let root = if w.im == 0.0 && w.re < 0.0 && is_odd_integer(p) && mode == Mode::Real {
                real(-(-w.re).powf(1.0 / p))
            } else {
                pow_real_exp(w, 1.0 / p, mode)?
            };
            if branch == BranchSelector::NegativeRoot {
                -root
            } else {
                root
            }
        }
        Kind::Exp => log_c(w, mode)?,
        Kind::Log => w.exp(),
        Kind::Sin => asin_c(w, mode)? * sign + q as f64 * PI,
        Kind::Cos => (acos_c(w, mode)? - FRAC_PI_2) * sign + (q as f64 + 0.5) * PI,
        Kind::Tan => atan_c(w),
        Kind::TanShifted(s) => atan_c(w) + s,
        Kind::Asin => w.sin(),
        Kind::Acos => w.cos(),
        Kind::Atan => w.tan(),
        Kind::Identity => w,
        Kind::PolarPair => unreachable!("polar pair handled by the block path"),
    };
    Ok(v)
}

fn base_inverse(kind: Kind, w: C64, mode: Mode) -> Result<C64> {
    let y = match kind {
        Kind::Power(p) => pow_real_exp(w, p, mode)?,
        Kind::Exp => w.exp(),
        Kind::Log => log_c(w, mode)?,
        Kind::Sin => w.sin(),
        Kind::Cos => w.cos(),
        Kind::Tan => w.tan(),
        Kind::TanShifted(s) => (w - s).tan(),
        Kind::Asin => asin_c(w, mode)?,
        Kind::Acos => acos_c(w, mode)?,
        Kind::Atan => atan_c(w),
        Kind::Identity => w,
        Kind::PolarPair => unreachable!("polar pair handled by the block path"),
    };
    if y.re.is_finite() && y.im.is_finite() {
        Ok(y)
    } else {
        Err(Error::NonFinite(format!("{} at {w}", kind.name())))
    }
}

/// `[g, g', g'', g''', g'''']` at `w`.
fn base_derivatives(kind: Kind, w: C64) -> [C64; 5] {
    let one = real(1.0);
    match kind {
        Kind::Power(p) => {
            let mut out = [C64::default(); 5];
            let mut coef = 1.0;
            for (j, slot) in out.iter_mut().enumerate() {
                let e = p - j as f64;
                *slot = if coef == 0.0 {
                    C64::default()
                } else {
                    pow_real_exp(w, e, Mode::Complex).unwrap_or_default() * coef
                };
                coef *= e;
            }
            out
        }
        Kind::Exp => [w.exp(); 5],
        Kind::Log => {
            let r = w.inv();
            [w.ln(), r, -r * r, r.powi(3) * 2.0, -r.powi(4) * 6.0]
        }
        Kind::Sin => {
            let (s, c) = (w.sin(), w.cos());
            [s, c, -s, -c, s]
        }
        Kind::Cos => {
            let (s, c) = (w.sin(), w.cos());
            [c, -s, -c, s, c]
        }
        Kind::Tan | Kind::TanShifted(_) => {
            let shift = if let Kind::TanShifted(s) = kind { s } else { 0.0 };
            let t = (w - shift).tan();
            let t2 = t * t;
            let sec2 = one + t2;
            [
                t,
                sec2,
                t * sec2 * 2.0,
                sec2 * (one + t2 * 3.0) * 2.0,
                t * sec2 * (real(2.0) + t2 * 3.0) * 8.0,
            ]
        }
        Kind::Asin | Kind::Acos => {
            let s = one - w * w;
            let r = s.sqrt().inv();
            let r3 = r.powi(3);
            let d = [
                w.asin(),
                r,
                w * r3,
                (one + w * w * 2.0) * r3 * r * r,
                (w * 9.0 + w.powi(3) * 6.0) * r3 * r3 * r,
            ];
            if kind == Kind::Asin {
                d
            } else {
                [w.acos(), -d[1], -d[2], -d[3], -d[4]]
            }
        }
        Kind::Atan => {
            let s = one + w * w;
            let r = s.inv();
            [
                w.atan(),
                r,
                -w * r * r * 2.0,
                (w * w * 6.0 - 2.0) * r.powi(3),
                w * (one - w * w) * r.powi(4) * 24.0,
            ]
        }
        Kind::Identity => [w, one, C64::default(), C64::default(), C64::default()],
        Kind::PolarPair => [C64::default(); 5],
    }
}

fn polar_forward(k: C64, l: C64, mode: Mode) -> Result<(C64, C64)> {
    if k.im == 0.0 && l.im == 0.0 {
        let r2 = k.re * k.re + l.re * l.re;
        if r2 == 0.0 {
            return Err(Error::NonFinite("polar pair at the origin".into()));
        }
        return Ok((real(0.5 * r2.ln()), real(l.re.atan2(k.re))));
    }
    if mode == Mode::Real {
        return Err(Error::Domain("complex polar pair in real mode".into()));
    }
    let i = C64::i();
    let plus = (k + i * l).ln();
    let minus = (k - i * l).ln();
    Ok(((plus + minus) * 0.5, (plus - minus) / (i * 2.0)))
}
