use std::cell::Cell;

use super::{minimum_degree, CsrMatrix, Field};
use crate::error::{Error, Result};

/// Pivots below this fraction of the largest diagonal entry are treated as
/// loss of positive definiteness.
const PIVOT_TOLERANCE: f64 = 1e-12;

thread_local! {
    static FACTORIZATIONS: Cell<usize> = const { Cell::new(0) };
}

/// Number of symmetric factorizations performed on the current thread.
pub fn factorization_count() -> usize {
    FACTORIZATIONS.with(Cell::get)
}

/// Sparse `P A Pᵀ = L D Lᵀ` of a symmetric positive definite matrix with a
/// minimum degree permutation `P`.
#[derive(Debug, Clone)]
pub struct CachedSpdFactor {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

/// Factors a symmetric matrix given with both triangles stored.
pub fn spd_factor(a: &CsrMatrix<f64>) -> Result<CachedSpdFactor> {
    CachedSpdFactor::new(a)
}

pub fn spd_solve<T: Field>(factor: &CachedSpdFactor, b: &[T]) -> Vec<T> {
    factor.solve(b)
}

impl CachedSpdFactor {
    pub fn new(a: &CsrMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "symmetric factorization needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if let Some((r, c, _)) = a.triplets().find(|(_, _, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry ({r}, {c})")));
        }
        FACTORIZATIONS.with(|c| c.set(c.get() + 1));

        let n = a.nrows();
        let adjacency: Vec<Vec<usize>> = (0..n).map(|r| a.row(r).map(|(c, _)| c).collect()).collect();
        let perm = minimum_degree(&adjacency);
        let mut pinv = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }
        // the matrix is symmetric, so its rows double as columns
        let col = |j: usize| a.row(j);

        // elimination tree and column counts
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for (r, _) in col(perm[k]) {
                let mut i = pinv[r];
                if i < k {
                    while flag[i] != k {
                        if parent[i] == usize::MAX {
                            parent[i] = k;
                        }
                        lnz[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }

        // numeric, row by row
        let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        let mut li = vec![0usize; lp[n]];
        let mut lx = vec![0.0; lp[n]];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        lnz.iter_mut().for_each(|c| *c = 0);
        flag.iter_mut().for_each(|f| *f = usize::MAX);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for (r, v) in col(perm[k]) {
                let mut i = pinv[r];
                if i <= k {
                    y[i] += v;
                    let mut len = 0;
                    while flag[i] != k {
                        pattern[len] = i;
                        len += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                    while len > 0 {
                        top -= 1;
                        len -= 1;
                        pattern[top] = pattern[len];
                    }
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            while top < n {
                let i = pattern[top];
                let yi = y[i];
                y[i] = 0.0;
                let end = lp[i] + lnz[i];
                for p in lp[i]..end {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[end] = k;
                lx[end] = l_ki;
                lnz[i] += 1;
                top += 1;
            }
            if !(d[k] > PIVOT_TOLERANCE * max_diag) {
                return Err(Error::NotPositiveDefinite {
                    column: perm[k],
                    pivot: d[k],
                });
            }
        }
        Ok(CachedSpdFactor {
            n,
            perm,
            lp,
            li,
            lx,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve<T: Field>(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..self.n {
            let yj = y[j];
            for p in self.lp[j]..self.lp[j + 1] {
                let i = self.li[p];
                y[i] -= yj * self.lx[p];
            }
        }
        for (yj, &dj) in y.iter_mut().zip(&self.d) {
            *yj = *yj * (1.0 / dj);
        }
        for j in (0..self.n).rev() {
            let mut acc = y[j];
            for p in self.lp[j]..self.lp[j + 1] {
                acc -= y[self.li[p]] * self.lx[p];
            }
            y[j] = acc;
        }
        let mut x = vec![T::zero(); self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }
}
