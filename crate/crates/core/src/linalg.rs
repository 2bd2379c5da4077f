//! Small linear-algebra kernels: a growable Cholesky factor and a symmetric
//! sparse matrix in compressed-row form.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lower-triangular Cholesky factor stored row by row (row `i` holds `i + 1` entries).
/// Rows can be appended one at a time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cholesky<T> {
    rows: Vec<Vec<T>>,
}

/// Failure to extend a factor: the Schur complement of the new row was not positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NotPositive<T> {
    pub index: usize,
    pub pivot: T,
}

impl<T: Real> Cholesky<T> {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if j > i {
            T::zero()
        } else {
            self.rows[i][j]
        }
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i]
    }

    /// Solve `L x = b` in place.
    pub fn forward_solve_in_place(&self, b: &mut [T]) {
        for i in 0..self.dim() {
            let row = &self.rows[i];
            let mut s = b[i];
            for (j, &lij) in row[..i].iter().enumerate() {
                s -= lij * b[j];
            }
            b[i] = s / row[i];
        }
    }

    pub fn forward_solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.forward_solve_in_place(&mut x);
        x
    }

    /// Solve `L^T x = b` in place.
    pub fn backward_solve_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in (0..n).rev() {
            b[i] /= self.rows[i][i];
            let bi = b[i];
            for (j, &lij) in self.rows[i][..i].iter().enumerate() {
                b[j] -= lij * bi;
            }
        }
    }

    /// Solve `(L L^T) x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = self.forward_solve(b);
        self.backward_solve_in_place(&mut x);
        x
    }

    pub fn log_det(&self) -> T {
        T::lit(2.0) * self.rows.iter().enumerate().map(|(i, r)| r[i].ln()).sum::<T>()
    }

    /// Compute the new row for a matrix extended by covariance column `k` and
    /// diagonal entry `diag`, without modifying the factor. Returns `(l, d)` with
    /// `l = L^{-1} k` and `d` the new pivot.
    pub fn extension(&self, k: &[T], diag: T) -> std::result::Result<(Vec<T>, T), NotPositive<T>> {
        debug_assert_eq!(k.len(), self.dim());
        let l = self.forward_solve(k);
        let d2 = diag - l.iter().map(|&x| x * x).sum::<T>();
        if !(d2 > T::zero()) || !d2.is_finite() {
            return Err(NotPositive { index: self.dim(), pivot: d2 });
        }
        Ok((l, d2.sqrt()))
    }

    /// Append a row produced by [`Cholesky::extension`].
    pub fn push_row(&mut self, mut l: Vec<T>, d: T) {
        debug_assert_eq!(l.len(), self.dim());
        l.push(d);
        self.rows.push(l);
    }

    /// Dense inverse of `L L^T`, row-major `n x n`.
    pub fn inverse(&self) -> Vec<T> {
        let n = self.dim();
        // rows of L^{-1}, lower triangular
        let mut linv: Vec<Vec<T>> = Vec::with_capacity(n);
        for i in 0..n {
            let li = &self.rows[i];
            let mut row = vec![T::zero(); i + 1];
            for k in 0..i {
                let c = li[k];
                if c != T::zero() {
                    for (r, &x) in row.iter_mut().zip(&linv[k]) {
                        *r -= c * x;
                    }
                }
            }
            row[i] += T::one();
            let d = li[i];
            for r in row.iter_mut() {
                *r /= d;
            }
            linv.push(row);
        }
        let mut p = vec![T::zero(); n * n];
        for row in &linv {
            for (i, &ri) in row.iter().enumerate() {
                if ri == T::zero() {
                    continue;
                }
                let target = &mut p[i * n..i * n + i + 1];
                for (t, &rj) in target.iter_mut().zip(&row[..=i]) {
                    *t += ri * rj;
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                p[j * n + i] = p[i * n + j];
            }
        }
        p
    }

    /// Factor a dense symmetric matrix given by `entry(i, j)` for `j <= i`.
    pub fn factor<F: Fn(usize, usize) -> T>(n: usize, entry: F) -> std::result::Result<Self, NotPositive<T>> {
        let mut rows: Vec<Vec<T>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(i + 1);
            for j in 0..i {
                let mut s = entry(i, j);
                for (a, b) in row[..j].iter().zip(&rows[j][..j]) {
                    s -= *a * *b;
                }
                row.push(s / rows[j][j]);
            }
            let d2 = entry(i, i) - row.iter().map(|&x: &T| x * x).sum::<T>();
            if !(d2 > T::zero()) || !d2.is_finite() {
                return Err(NotPositive { index: i, pivot: d2 });
            }
            row.push(d2.sqrt());
            rows.push(row);
        }
        Ok(Self { rows })
    }
}

/// Symmetric sparse matrix storing both triangles in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SparseSym<T> {
    /// Build from the upper-triangle entries `(i, j, value)` with `i <= j`. Zeros are dropped.
    pub fn from_upper(n: usize, upper: &[(usize, usize, T)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for &(i, j, v) in upper {
            if i > j || j >= n {
                return Err(Error::Argument(format!("entry ({i}, {j}) is not in the upper triangle of a {n}x{n} matrix")));
            }
            if v == T::zero() {
                continue;
            }
            rows[i].push((j, v));
            if i != j {
                rows[j].push((i, v));
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|&(c, _)| c);
            for w in r.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::Argument(format!("entry in column {} given twice", w[0].0)));
                }
            }
            for (c, v) in r {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Fraction of stored entries.
    pub fn density(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.nnz() as f64 / (self.n * self.n) as f64
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut m = vec![vec![T::zero(); self.n]; self.n];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        m
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn cholesky(&self) -> std::result::Result<Cholesky<T>, NotPositive<T>> {
        Cholesky::factor(self.n, |i, j| self.get(i, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed;
        let a = DMatrix::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        });
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn factor_matches_nalgebra() {
        let m = spd(6, 3);
        let ours = Cholesky::factor(6, |i, j| m[(i, j)]).unwrap();
        let theirs = m.clone().cholesky().unwrap().l();
        for i in 0..6 {
            for j in 0..=i {
                assert!((ours.get(i, j) - theirs[(i, j)]).abs() < 1e-12);
            }
        }
        let b: Vec<f64> = (0..6).map(|k| k as f64 - 2.0).collect();
        let x = ours.solve(&b);
        let r = &m * DMatrix::from_column_slice(6, 1, &x) - DMatrix::from_column_slice(6, 1, &b);
        assert!(r.norm() < 1e-10);
        assert!((ours.log_det() - m.determinant().ln()).abs() < 1e-10);
    }

    #[test]
    fn inverse_matches_nalgebra() {
        let m = spd(9, 21);
        let inv = Cholesky::factor(9, |i, j| m[(i, j)]).unwrap().inverse();
        let theirs = m.clone().try_inverse().unwrap();
        for i in 0..9 {
            for j in 0..9 {
                assert!((inv[i * 9 + j] - theirs[(i, j)]).abs() < 1e-9 * theirs.abs().max());
            }
        }
    }

    #[test]
    fn append_equals_batch() {
        let m = spd(7, 9);
        let batch = Cholesky::factor(7, |i, j| m[(i, j)]).unwrap();
        let mut inc = Cholesky::new();
        for a in 0..7 {
            let k: Vec<f64> = (0..a).map(|i| m[(a, i)]).collect();
            let (l, d) = inc.extension(&k, m[(a, a)]).unwrap();
            inc.push_row(l, d);
        }
        for i in 0..7 {
            for j in 0..=i {
                assert!((inc.get(i, j) - batch.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn not_positive_is_reported() {
        let err = Cholesky::factor(2, |i, j| if i == j { 1.0 } else { 1.0 }).unwrap_err();
        assert_eq!(err.index, 1);
    }

    #[test]
    fn sparse_round_trip() {
        let s = SparseSym::from_upper(3, &[(0, 0, 2.0), (0, 2, 1.0), (1, 1, 3.0), (2, 2, 4.0), (0, 1, 0.0)]).unwrap();
        assert_eq!(s.nnz(), 5);
        assert_eq!(s.get(2, 0), 1.0);
        assert_eq!(s.get(1, 0), 0.0);
        assert_eq!(s.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 3.0, 5.0]);
        assert_eq!(s.trace(), 9.0);
        assert!(SparseSym::from_upper(3, &[(2, 0, 1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn solve_residual_small(n in 1usize..12, seed in 0u64..500) {
            let m = spd(n, seed);
            let f = Cholesky::factor(n, |i, j| m[(i, j)]).unwrap();
            let b: Vec<f64> = (0..n).map(|k| (k as f64).sin()).collect();
            let x = f.solve(&b);
            let r = &m * DMatrix::from_column_slice(n, 1, &x) - DMatrix::from_column_slice(n, 1, &b);
            prop_assert!(r.norm() < 1e-8 * (1.0 + m.norm()));
        }
    }
}
