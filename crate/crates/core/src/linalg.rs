//! Small dense linear algebra: a row-major matrix, one-sided Jacobi SVD and a
//! pivoted linear solver. Sized for the tens-to-hundreds dimensions that
//! batch datasets produce.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Builds a matrix from row-major data. Panics if the length does not match.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length mismatch");
        Self { rows, cols, data }
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    /// m × k, columns orthonormal where the matching singular value is nonzero.
    pub u: Matrix<T>,
    /// k singular values, non-increasing.
    pub s: Vec<T>,
    /// n × k, orthonormal columns.
    pub v: Matrix<T>,
}

/// One-sided (Hestenes) Jacobi SVD. Relative accuracy is high even for small
/// singular values, which matters for the eigen-spectra consumed downstream.
pub fn svd<T: Real>(a: &Matrix<T>) -> Svd<T> {
    if a.nrows() >= a.ncols() {
        jacobi_tall(a)
    } else {
        let t = jacobi_tall(&a.transpose());
        Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        }
    }
}

fn jacobi_tall<T: Real>(a: &Matrix<T>) -> Svd<T> {
    let (m, n) = (a.nrows(), a.ncols());
    // Column-major working copies: cols[j] is column j.
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            e
        })
        .collect();

    let eps = T::epsilon();
    let max_sweeps = 80;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(T, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (dot(c, c).sqrt(), j))
        .collect();
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &(sigma, j)) in order.iter().enumerate() {
        s.push(sigma);
        for i in 0..m {
            u[(i, k)] = if sigma > T::zero() {
                cols[j][i] / sigma
            } else {
                T::zero()
            };
        }
        for i in 0..n {
            v[(i, k)] = vcols[j][i];
        }
    }
    Svd { u, s, v }
}

fn rotate<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub fn solve<T: Real>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "solve needs a square matrix");
    assert_eq!(n, b.len(), "rhs length mismatch");
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m
        .as_slice()
        .iter()
        .fold(T::zero(), |acc, &v| acc.max(v.abs()));
    let tiny = scale * T::epsilon() * T::count(n.max(1));
    for k in 0..n {
        let (piv, pval) = (k..n)
            .map(|i| (i, m[(i, k)].abs()))
            .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pval <= tiny || pval == T::zero() {
            return None;
        }
        if piv != k {
            for j in 0..n {
                let tmp = m[(k, j)];
                m[(k, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
            x.swap(k, piv);
        }
        for i in (k + 1)..n {
            let f = m[(i, k)] / m[(k, k)];
            if f == T::zero() {
                continue;
            }
            for j in k..n {
                m[(i, j)] = m[(i, j)] - f * m[(k, j)];
            }
            x[i] = x[i] - f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut acc = x[k];
        for j in (k + 1)..n {
            acc = acc - m[(k, j)] * x[j];
        }
        x[k] = acc / m[(k, k)];
    }
    Some(x)
}

/// Flips `v` so its largest-magnitude element is positive. Returns whether it flipped.
pub(crate) fn canonical_sign<T: Real>(v: &mut [T]) -> bool {
    let mut best = T::zero();
    let mut sign_neg = false;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign_neg = x < T::zero();
        }
    }
    if sign_neg {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    sign_neg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(d: &Svd<f64>) -> Matrix<f64> {
        let k = d.s.len();
        let mut us = d.u.clone();
        for i in 0..us.nrows() {
            for j in 0..k {
                us[(i, j)] *= d.s[j];
            }
        }
        us.matmul(&d.v.transpose())
    }

    #[test]
    fn svd_reconstructs_wide_and_tall() {
        let a = Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0, 4.0],
            vec![2.0, -1.0, 0.5, 0.0],
            vec![0.0, 3.0, 1.0, -2.0],
        ]);
        for m in [a.clone(), a.transpose()] {
            let d = svd(&m);
            let r = reconstruct(&d);
            for (x, y) in r.as_slice().iter().zip(m.as_slice()) {
                assert!((x - y).abs() < 1e-12);
            }
            assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
            let vtv = d.v.transpose().matmul(&d.v);
            for i in 0..vtv.nrows() {
                for j in 0..vtv.ncols() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((vtv[(i, j)] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn svd_of_rank_deficient_matrix_has_zero_tail() {
        let a = Matrix::from_rows(&[vec![1.0f64, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]);
        let d = svd(&a);
        assert!(d.s[1].abs() < 1e-12);
        assert!((d.s[0] - (70.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn solve_matches_known_solution() {
        let a = Matrix::from_rows(&[vec![0.0f64, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]);
        let x = solve(&a, &[5.0, 3.0, 4.0]).unwrap();
        for (got, want) in x.iter().zip([1.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-12, "{x:?}");
        }
        let singular = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(solve(&singular, &[1.0, 2.0]).is_none());
    }

    #[test]
    fn svd_works_in_f32() {
        let a: Matrix<f32> = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 4.0]]);
        let d = svd(&a);
        assert!((d.s[0] - 4.0).abs() < 1e-6 && (d.s[1] - 3.0).abs() < 1e-6);
    }
}
