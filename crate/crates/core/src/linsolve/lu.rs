use std::sync::Mutex;

use super::{minimum_degree, norm_l1, CsrMatrix, Field};
use crate::error::{Error, Result};

/// Systems with fewer unknowns than this are factored densely.
pub const DENSE_LIMIT: usize = 64;

/// Condition estimate above which a solve is reported as near singular.
pub const NEAR_SINGULAR_CONDITION: f64 = 1e12;

/// Sparse pivoting prefers the diagonal while it is at least this fraction
/// of the column maximum.
const DIAGONAL_PREFERENCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SquareSolution<T> {
    pub x: Vec<T>,
    /// Reciprocal 1-norm condition estimate.
    pub rcond: f64,
}

impl<T> SquareSolution<T> {
    pub fn condition_estimate(&self) -> f64 {
        1.0 / self.rcond
    }

    pub fn near_singular(&self) -> bool {
        self.condition_estimate() > NEAR_SINGULAR_CONDITION
    }
}

/// Solves `A x = b` with a freshly computed ordering.
pub fn square_solve<T: Field>(a: &CsrMatrix<T>, b: &[T]) -> Result<SquareSolution<T>> {
    SquareSolver::default().solve(a, b)
}

/// Square solver that remembers the column ordering of the last sparsity
/// pattern it factored.
#[derive(Debug, Default)]
pub struct SquareSolver {
    ordering: Mutex<Option<CachedOrdering>>,
}

#[derive(Debug, Clone)]
struct CachedOrdering {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    q: Vec<usize>,
}

impl Clone for SquareSolver {
    fn clone(&self) -> Self {
        SquareSolver {
            ordering: Mutex::new(self.ordering.lock().expect("ordering lock").clone()),
        }
    }
}

trait Factorization<T> {
    fn solve(&self, b: &mut [T]);
    fn solve_adjoint(&self, b: &mut [T]);
}

impl SquareSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve<T: Field>(&self, a: &CsrMatrix<T>, b: &[T]) -> Result<SquareSolution<T>> {
        let n = a.nrows();
        if !a.is_square() || b.len() != n {
            return Err(Error::Dimension(format!(
                "square solve of a {}x{} matrix with {} right-hand side entries",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        if let Some((r, c, _)) = a.triplets().find(|(_, _, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry ({r}, {c})")));
        }
        if let Some(i) = b.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("right-hand side entry {i}")));
        }
        if n == 0 {
            return Ok(SquareSolution {
                x: Vec::new(),
                rcond: 1.0,
            });
        }
        let factor: Box<dyn Factorization<T>> = if n < DENSE_LIMIT {
            Box::new(DenseLu::new(a)?)
        } else {
            let q = self.column_ordering(a);
            Box::new(SparseLu::new(a, &q)?)
        };
        let mut x = b.to_vec();
        factor.solve(&mut x);
        let inv_norm = estimate_inverse_norm(factor.as_ref(), n);
        let anorm = a.norm_one();
        let rcond = if inv_norm > 0.0 && anorm > 0.0 {
            1.0 / (anorm * inv_norm)
        } else {
            0.0
        };
        let solution = SquareSolution { x, rcond };
        if solution.near_singular() {
            log::warn!(
                "near-singular {n}x{n} system, condition estimate {:.3e}",
                solution.condition_estimate()
            );
        }
        Ok(solution)
    }

    fn column_ordering<T: Field>(&self, a: &CsrMatrix<T>) -> Vec<usize> {
        let mut cache = self.ordering.lock().expect("ordering lock");
        if let Some(c) = cache.as_ref() {
            if c.indptr == a.indptr() && c.indices == a.indices() {
                return c.q.clone();
            }
        }
        let n = a.nrows();
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, c, _) in a.triplets() {
            adjacency[r].push(c);
            adjacency[c].push(r);
        }
        let q = minimum_degree(&adjacency);
        *cache = Some(CachedOrdering {
            indptr: a.indptr().to_vec(),
            indices: a.indices().to_vec(),
            q: q.clone(),
        });
        q
    }
}

/// Hager's estimate of `‖A⁻¹‖₁` refined with Higham's alternating vector.
fn estimate_inverse_norm<T: Field>(f: &dyn Factorization<T>, n: usize) -> f64 {
    let mut x = vec![T::from_real(1.0 / n as f64); n];
    let mut est = 0.0;
    let mut last_j = usize::MAX;
    for iter in 0..5 {
        f.solve(&mut x);
        let y_norm = norm_l1(&x);
        if iter > 0 && y_norm <= est {
            break;
        }
        est = y_norm;
        let mut z: Vec<T> = x
            .iter()
            .map(|&v| {
                let m = v.modulus();
                if m == 0.0 {
                    T::one()
                } else {
                    v * (1.0 / m)
                }
            })
            .collect();
        f.solve_adjoint(&mut z);
        let (j, zmax) = z
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.modulus()))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if iter > 0 && (j == last_j || !zmax.is_finite()) {
            break;
        }
        last_j = j;
        x = vec![T::zero(); n];
        x[j] = T::one();
    }
    let mut alt: Vec<T> = (0..n)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            T::from_real(sign * (1.0 + frac))
        })
        .collect();
    f.solve(&mut alt);
    let alt_est = 2.0 * norm_l1(&alt) / (3.0 * n as f64);
    est.max(alt_est)
}

/// Row-major dense LU with partial pivoting.
struct DenseLu<T> {
    n: usize,
    lu: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Field> DenseLu<T> {
    fn new(a: &CsrMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        let mut lu = vec![T::zero(); n * n];
        for (r, c, v) in a.triplets() {
            lu[r * n + c] = v;
        }
        let mut piv = vec![0; n];
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].modulus()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 {
                return Err(Error::SingularMatrix { column: k });
            }
            piv[k] = p;
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
            }
            let inv = T::one() / lu[k * n + k];
            for i in k + 1..n {
                let l = lu[i * n + k] * inv;
                lu[i * n + k] = l;
                if l != T::zero() {
                    for c in k + 1..n {
                        let u = lu[k * n + c];
                        lu[i * n + c] -= l * u;
                    }
                }
            }
        }
        Ok(DenseLu { n, lu, piv })
    }
}

impl<T: Field> Factorization<T> for DenseLu<T> {
    fn solve(&self, b: &mut [T]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for i in 0..n {
            let mut acc = b[i];
            for c in 0..i {
                acc -= self.lu[i * n + c] * b[c];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for c in i + 1..n {
                acc -= self.lu[i * n + c] * b[c];
            }
            b[i] = acc / self.lu[i * n + i];
        }
    }

    fn solve_adjoint(&self, b: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let mut acc = b[i];
            for r in 0..i {
                acc -= self.lu[r * n + i].conj() * b[r];
            }
            b[i] = acc / self.lu[i * n + i].conj();
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for r in i + 1..n {
                acc -= self.lu[r * n + i].conj() * b[r];
            }
            b[i] = acc;
        }
        for k in (0..n).rev() {
            b.swap(k, self.piv[k]);
        }
    }
}

/// Left-looking sparse LU, `P A Q = L U`, with threshold partial pivoting.
/// `L` has a unit diagonal stored first in each column; `U` stores its
/// diagonal last in each column.
struct SparseLu<T> {
    n: usize,
    q: Vec<usize>,
    pinv: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<T>,
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<T>,
}

impl<T: Field> SparseLu<T> {
    fn new(a: &CsrMatrix<T>, q: &[usize]) -> Result<Self> {
        const UNSET: usize = usize::MAX;
        let n = a.nrows();
        let (ap, ai, ax) = a.to_csc();
        let mut pinv = vec![UNSET; n];
        let mut lp = Vec::with_capacity(n + 1);
        let mut li: Vec<usize> = Vec::new();
        let mut lx: Vec<T> = Vec::new();
        let mut up = Vec::with_capacity(n + 1);
        let mut ui: Vec<usize> = Vec::new();
        let mut ux: Vec<T> = Vec::new();
        let mut x = vec![T::zero(); n];
        let mut mark = vec![UNSET; n];
        let mut reach: Vec<usize> = Vec::with_capacity(n);
        let mut stack: Vec<(usize, usize)> = Vec::new();

        for k in 0..n {
            lp.push(li.len());
            up.push(ui.len());
            let col = q[k];

            // nonzero pattern of L \ A(:, col) in topological order
            reach.clear();
            for &start in &ai[ap[col]..ap[col + 1]] {
                if mark[start] == k {
                    continue;
                }
                mark[start] = k;
                stack.push((start, 0));
                while let Some(&mut (j, ref mut next)) = stack.last_mut() {
                    let jcol = pinv[j];
                    let (lo, hi) = if jcol == UNSET {
                        (0, 0)
                    } else {
                        (lp[jcol] + 1, lp_end(&lp, li.len(), jcol))
                    };
                    let mut pushed = false;
                    let mut p = lo.max(lo + *next);
                    while p < hi {
                        let i = li[p];
                        p += 1;
                        if mark[i] != k {
                            mark[i] = k;
                            *next = p - lo;
                            stack.push((i, 0));
                            pushed = true;
                            break;
                        }
                    }
                    if !pushed {
                        stack.pop();
                        reach.push(j);
                    }
                }
            }
            reach.reverse();

            for &i in &reach {
                x[i] = T::zero();
            }
            for p in ap[col]..ap[col + 1] {
                x[ai[p]] = ax[p];
            }
            for &j in &reach {
                let jcol = pinv[j];
                if jcol == UNSET {
                    continue;
                }
                let xj = x[j];
                for p in lp[jcol] + 1..lp_end(&lp, li.len(), jcol) {
                    let i = li[p];
                    x[i] -= lx[p] * xj;
                }
            }

            let mut ipiv = UNSET;
            let mut best = -1.0;
            for &i in &reach {
                if pinv[i] == UNSET {
                    let t = x[i].modulus();
                    if t > best {
                        best = t;
                        ipiv = i;
                    }
                } else {
                    ui.push(pinv[i]);
                    ux.push(x[i]);
                }
            }
            if ipiv == UNSET || best <= 0.0 {
                return Err(Error::SingularMatrix { column: k });
            }
            if pinv[col] == UNSET && mark[col] == k && x[col].modulus() >= DIAGONAL_PREFERENCE * best {
                ipiv = col;
            }
            let pivot = x[ipiv];
            ui.push(k);
            ux.push(pivot);
            pinv[ipiv] = k;
            li.push(ipiv);
            lx.push(T::one());
            for &i in &reach {
                if pinv[i] == UNSET {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = T::zero();
            }
        }
        lp.push(li.len());
        up.push(ui.len());
        for i in li.iter_mut() {
            *i = pinv[*i];
        }
        Ok(SparseLu {
            n,
            q: q.to_vec(),
            pinv,
            lp,
            li,
            lx,
            up,
            ui,
            ux,
        })
    }
}

/// End of column `j` of a partially built `L` whose pointer array has not
/// been closed yet.
fn lp_end(lp: &[usize], len: usize, j: usize) -> usize {
    if j + 1 < lp.len() {
        lp[j + 1]
    } else {
        len
    }
}

impl<T: Field> Factorization<T> for SparseLu<T> {
    fn solve(&self, b: &mut [T]) {
        let n = self.n;
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            y[self.pinv[i]] = b[i];
        }
        for j in 0..n {
            let yj = y[j];
            for p in self.lp[j] + 1..self.lp[j + 1] {
                y[self.li[p]] -= self.lx[p] * yj;
            }
        }
        for j in (0..n).rev() {
            let last = self.up[j + 1] - 1;
            y[j] = y[j] / self.ux[last];
            let yj = y[j];
            for p in self.up[j]..last {
                y[self.ui[p]] -= self.ux[p] * yj;
            }
        }
        for k in 0..n {
            b[self.q[k]] = y[k];
        }
    }

    fn solve_adjoint(&self, b: &mut [T]) {
        let n = self.n;
        let mut y: Vec<T> = (0..n).map(|k| b[self.q[k]]).collect();
        for j in 0..n {
            let last = self.up[j + 1] - 1;
            let mut acc = y[j];
            for p in self.up[j]..last {
                acc -= self.ux[p].conj() * y[self.ui[p]];
            }
            y[j] = acc / self.ux[last].conj();
        }
        for j in (0..n).rev() {
            let mut acc = y[j];
            for p in self.lp[j] + 1..self.lp[j + 1] {
                acc -= self.lx[p].conj() * y[self.li[p]];
            }
            y[j] = acc;
        }
        for i in 0..n {
            b[i] = y[self.pinv[i]];
        }
    }
}
