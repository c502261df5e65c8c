use super::Field;
use crate::error::{Error, Result};

/// Compressed sparse row matrix. Column indices are sorted within each row
/// and duplicates are summed on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Field> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, T::one()))).expect("in bounds")
    }

    /// Builds from `(row, col, value)` entries; repeated positions are summed.
    /// Explicit zeros are kept so that structural patterns stay stable.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); nrows];
        for (r, c, v) in entries {
            if r >= nrows || c >= ncols {
                return Err(Error::Dimension(format!(
                    "entry ({r}, {c}) outside a {nrows}x{ncols} matrix"
                )));
            }
            rows[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if indices.len() > *indptr.last().unwrap() && *indices.last().unwrap() == c {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let entries = rows.iter().enumerate().flat_map(|(r, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v != T::zero())
                .map(move |(c, v)| (r, c, *v))
        });
        Self::from_triplets(nrows, ncols, entries).expect("dense rows are in bounds")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.data[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.data[span.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            out[r][c] = v;
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v)))
            .expect("transpose stays in bounds")
    }

    pub fn map<U: Field>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `y = A x` for a vector in any field that `T` scales.
    pub fn mul_vec<U>(&self, x: &[U]) -> Vec<U>
    where
        U: Field + std::ops::Mul<T, Output = U>,
    {
        assert_eq!(x.len(), self.ncols, "mul_vec dimension");
        (0..self.nrows)
            .map(|r| {
                self.row(r)
                    .fold(U::zero(), |acc, (c, v)| acc + x[c] * v)
            })
            .collect()
    }

    /// `y = Aᵀ x`.
    pub fn tr_mul_vec<U>(&self, x: &[U]) -> Vec<U>
    where
        U: Field + std::ops::Mul<T, Output = U>,
    {
        assert_eq!(x.len(), self.nrows, "tr_mul_vec dimension");
        let mut y = vec![U::zero(); self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                y[c] += xr * v;
            }
        }
        y
    }

    /// Sparse product `A B`.
    pub fn matmul(&self, other: &CsrMatrix<T>) -> Result<CsrMatrix<T>> {
        if self.ncols != other.nrows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut entries = Vec::new();
        let mut acc = vec![T::zero(); other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut cols = Vec::new();
        for r in 0..self.nrows {
            cols.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = T::zero();
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &cols {
                entries.push((r, c, acc[c]));
            }
        }
        CsrMatrix::from_triplets(self.nrows, other.ncols, entries)
    }

    /// Induced 1-norm (maximum column sum).
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.ncols];
        for (_, c, v) in self.triplets() {
            sums[c] += v.modulus();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }
}

impl<T: Field> CsrMatrix<T> {
    /// Values of the matrix in compressed sparse column order: returns
    /// `(colptr, rowidx, values)`.
    pub(crate) fn to_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<T>) {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let colptr = counts.clone();
        let mut next = counts;
        let mut rowidx = vec![0; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                let slot = next[c];
                rowidx[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        (colptr, rowidx, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, [(0, 1, 2.0), (0, 1, 3.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 5.0);
    }

    #[test]
    fn product_and_transpose() {
        let e = CsrMatrix::from_dense(&[vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 2.0, -1.0]]);
        let eet = e.matmul(&e.transpose()).unwrap();
        assert_eq!(eet.to_dense(), vec![vec![2.0, 0.0], vec![0.0, 5.0]]);
        assert_eq!(e.mul_vec(&[1.0, 2.0, 3.0, 4.0]), vec![3.0, 2.0]);
        assert_eq!(e.tr_mul_vec(&[1.0, 2.0]), vec![1.0, 1.0, 4.0, -2.0]);
    }

    #[test]
    fn out_of_bounds_triplet() {
        assert!(CsrMatrix::from_triplets(1, 1, [(1, 0, 1.0)]).is_err());
    }
}
