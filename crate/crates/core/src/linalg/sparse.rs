use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

/// Field of matrix entries: real or complex double precision.
pub trait Scalar:
    ComplexField<RealField = f64>
    + Copy
    + Debug
    + Send
    + Sync
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    const IS_COMPLEX: bool;
    fn of(re: f64) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn abs2(self) -> f64;
    fn mul_re(self, s: f64) -> Self;
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;
    #[inline]
    fn of(re: f64) -> Self {
        re
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn im(self) -> f64 {
        0.0
    }
    #[inline]
    fn abs2(self) -> f64 {
        self * self
    }
    #[inline]
    fn mul_re(self, s: f64) -> Self {
        self * s
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;
    #[inline]
    fn of(re: f64) -> Self {
        Complex64::new(re, 0.0)
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn im(self) -> f64 {
        self.im
    }
    #[inline]
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn mul_re(self, s: f64) -> Self {
        self * s
    }
}

/// `xᴴ y`
pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    let mut s = T::of(0.0);
    for (a, b) in x.iter().zip(y) {
        s += a.conj() * *b;
    }
    s
}

pub fn norm2<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.abs2()).sum::<f64>().sqrt()
}

/// `y += a x`
pub fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

/// Square sparse matrix in compressed row storage with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    /// Every listed position is kept in the pattern, even if it sums to zero.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, j, _) in triplets {
            assert!(i < n && j < n, "triplet ({i},{j}) outside {n}x{n}");
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![T::of(0.0); triplets.len()];
        let mut next = counts.clone();
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..n {
            let (lo, hi) = (counts[i], counts[i + 1]);
            order.clear();
            order.extend(lo..hi);
            order.sort_by_key(|&k| cols[k]);
            let mut last: Option<usize> = None;
            for &k in &order {
                if last == Some(cols[k]) {
                    let l = values.len() - 1;
                    values[l] += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                    last = Some(cols[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::of(1.0); n],
        }
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let n = d.len();
        CsrMatrix { n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: d.to_vec() }
    }

    pub fn from_dense(a: &DMatrix<T>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != T::of(0.0) {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(a.nrows(), &t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::of(0.0),
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out.push((i, j, v));
            }
        }
        out
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut s = T::of(0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::of(0.0); self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.n, &t)
    }

    pub fn conj_transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v.conj())).collect();
        Self::from_triplets(self.n, &t)
    }

    /// `Σ cᵢ Aᵢ` over the union of the patterns.
    pub fn linear_combination(terms: &[(T, &CsrMatrix<T>)]) -> Self {
        assert!(!terms.is_empty());
        let n = terms[0].1.n;
        let mut t = Vec::with_capacity(terms.iter().map(|(_, a)| a.nnz()).sum());
        for (c, a) in terms {
            assert_eq!(a.n, n);
            for i in 0..n {
                let (cols, vals) = a.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    t.push((i, j, *c * v));
                }
            }
        }
        Self::from_triplets(n, &t)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Removes stored zeros whose mirrored entry is also zero, so that a
    /// symmetric pattern stays symmetric.
    pub fn finalize(&self) -> Self {
        let zero = T::of(0.0);
        let mut t = Vec::with_capacity(self.nnz());
        for (i, j, v) in self.triplets() {
            if v != zero || self.get(j, i) != zero {
                t.push((i, j, v));
            }
        }
        Self::from_triplets(self.n, &t)
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut d = DMatrix::from_element(self.n, self.n, T::of(0.0));
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs2().sqrt()).fold(0.0, f64::max)
    }

    /// Largest `|A_ij - conj(A_ji)|` over the stored entries.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, j, v) in self.triplets() {
            let d = (v - self.get(j, i).conj()).abs2().sqrt();
            worst = worst.max(d);
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol * self.max_abs().max(1.0)
    }

    pub fn has_symmetric_pattern(&self) -> bool {
        for i in 0..self.n {
            let (cols, _) = self.row(i);
            for &j in cols {
                let (cj, _) = self.row(j);
                if cj.binary_search(&i).is_err() {
                    return false;
                }
            }
        }
        true
    }

    /// `xᴴ A y`
    pub fn form(&self, x: &[T], y: &[T]) -> T {
        dot(x, &self.mul_vec(y))
    }
}

impl CsrMatrix<f64> {
    pub fn to_complex(&self) -> CsrMatrix<Complex64> {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let a = CsrMatrix::from_triplets(2, &[(0, 1, 1.0), (0, 0, 2.0), (0, 1, 3.0), (1, 1, 5.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 4.0);
        assert_eq!(a.row(0).0, &[0, 1]);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![6.0, 5.0]);
    }

    #[test]
    fn finalize_keeps_pattern_symmetric() {
        let a = CsrMatrix::from_triplets(
            2,
            &[(0, 0, 1.0), (0, 1, 0.0), (1, 0, 2.0), (1, 1, 0.0)],
        );
        let f = a.finalize();
        assert!(f.has_symmetric_pattern());
        assert_eq!(f.nnz(), 3);
    }

    #[test]
    fn hermitian_check() {
        let i = Complex64::new(0.0, 1.0);
        let a = CsrMatrix::from_triplets(2, &[(0, 1, i), (1, 0, -i), (0, 0, Complex64::new(1.0, 0.0))]);
        assert!(a.is_hermitian(1e-14));
        let b = CsrMatrix::from_triplets(2, &[(0, 1, i), (1, 0, i)]);
        assert!(!b.is_hermitian(1e-14));
    }
}
