#![allow(dead_code)]

pub mod props;

use factored::gallery::{self, Fixture};
use factored::powerflow::{BusType, PowerFlowCase};
use factored::{FactoredSystem, C64};

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn cvec(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| c(x)).collect()
}

pub fn example(id: &str) -> (FactoredSystem, Fixture) {
    let ex = gallery::find(id).unwrap_or_else(|| panic!("no example {id}"));
    (ex.system().unwrap(), ex.fixture().unwrap())
}

/// Roots of `f` on `[lo, hi]`: sign changes on a uniform grid, refined by
/// bisection to full precision.
pub fn scan_roots(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut roots = Vec::new();
    let n = ((hi - lo) / step).ceil() as usize;
    let mut a = lo;
    let mut fa = f(a);
    for i in 1..=n {
        let b = (lo + i as f64 * step).min(hi);
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa.is_finite() && fb.is_finite() && fa.signum() != fb.signum() && fb != 0.0 {
            let (mut l, mut r, mut fl) = (a, b, fa);
            for _ in 0..200 {
                let m = 0.5 * (l + r);
                if m <= l || m >= r {
                    break;
                }
                let fm = f(m);
                if fm == 0.0 {
                    l = m;
                    r = m;
                    break;
                }
                if fm.signum() == fl.signum() {
                    l = m;
                    fl = fm;
                } else {
                    r = m;
                }
            }
            let root = 0.5 * (l + r);
            // discard poles, where the sign flips through infinity
            if f(root).abs() < 1e-6 {
                roots.push(root);
            }
        }
        a = b;
        fa = fb;
    }
    roots
}

/// Bus admittance matrix as dense `(G, B)`.
pub fn ybus(case: &PowerFlowCase) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = case.buses.len();
    let idx = case.index_map().unwrap();
    let mut g = vec![vec![0.0; n]; n];
    let mut b = vec![vec![0.0; n]; n];
    for br in &case.branches {
        let (i, j) = (idx[&br.from], idx[&br.to]);
        g[i][i] += br.g;
        g[j][j] += br.g;
        b[i][i] += br.b + br.bsh;
        b[j][j] += br.b + br.bsh;
        g[i][j] -= br.g;
        g[j][i] -= br.g;
        b[i][j] -= br.b;
        b[j][i] -= br.b;
    }
    (g, b)
}

/// Nodal injections `P_i = Σ V_i V_k (G cos θ_ik + B sin θ_ik)` and
/// `Q_i = Σ V_i V_k (G sin θ_ik − B cos θ_ik)`.
pub fn injections(g: &[Vec<f64>], b: &[Vec<f64>], v: &[f64], th: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        for k in 0..n {
            if g[i][k] == 0.0 && b[i][k] == 0.0 {
                continue;
            }
            let (s, co) = (th[i] - th[k]).sin_cos();
            p[i] += v[i] * v[k] * (g[i][k] * co + b[i][k] * s);
            q[i] += v[i] * v[k] * (g[i][k] * s - b[i][k] * co);
        }
    }
    (p, q)
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        a.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (rhs[r] - s) / a[r][r];
    }
    x
}

pub struct PolarSolution {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub iterations: usize,
}

/// Polar-coordinate Newton power flow on `(θ, V)` with a central-difference
/// Jacobian, iterated until the mismatch is below `tol`.
pub fn polar_newton(case: &PowerFlowCase, tol: f64) -> PolarSolution {
    let (g, b) = ybus(case);
    let n = case.buses.len();
    let mut v: Vec<f64> = case.buses.iter().map(|bus| bus.v.unwrap_or(1.0)).collect();
    let mut th = vec![0.0; n];
    let theta_idx: Vec<usize> = (0..n).filter(|&i| case.buses[i].kind != BusType::Slack).collect();
    let v_idx: Vec<usize> = (0..n).filter(|&i| case.buses[i].kind == BusType::Pq).collect();
    let nx = theta_idx.len() + v_idx.len();
    let mismatch = |v: &[f64], th: &[f64]| -> Vec<f64> {
        let (p, q) = injections(&g, &b, v, th);
        theta_idx
            .iter()
            .map(|&i| case.buses[i].p - p[i])
            .chain(v_idx.iter().map(|&i| case.buses[i].q - q[i]))
            .collect()
    };
    let apply = |v: &mut Vec<f64>, th: &mut Vec<f64>, k: usize, d: f64| {
        if k < theta_idx.len() {
            th[theta_idx[k]] += d;
        } else {
            v[v_idx[k - theta_idx.len()]] += d;
        }
    };
    for it in 0..50 {
        let r = mismatch(&v, &th);
        if r.iter().fold(0.0f64, |m, x| m.max(x.abs())) < tol {
            return PolarSolution { v, theta: th, iterations: it };
        }
        let h = 1e-7;
        let mut jac = vec![vec![0.0; nx]; nx];
        for k in 0..nx {
            let (mut vp, mut tp) = (v.clone(), th.clone());
            let (mut vm, mut tm) = (v.clone(), th.clone());
            apply(&mut vp, &mut tp, k, h);
            apply(&mut vm, &mut tm, k, -h);
            let (rp, rm) = (mismatch(&vp, &tp), mismatch(&vm, &tm));
            for row in 0..nx {
                // dF/dx with F = injection, i.e. minus the mismatch derivative
                jac[row][k] = -(rp[row] - rm[row]) / (2.0 * h);
            }
        }
        let dx = dense_solve(jac, r);
        for (k, d) in dx.into_iter().enumerate() {
            apply(&mut v, &mut th, k, d);
        }
    }
    panic!("polar oracle did not converge");
}
