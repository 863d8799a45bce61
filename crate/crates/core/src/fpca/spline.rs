use crate::linalg::{solve, Matrix};

/// Clamped B-spline basis of `order` (degree `order - 1`) with `n_knots`
/// equally spaced distinct knots over `[lo, hi]`, evaluated at `xs`.
/// Returns an `xs.len() × (n_knots + order - 2)` matrix.
pub(crate) fn bspline_basis(xs: &[f64], lo: f64, hi: f64, order: usize, n_knots: usize) -> Matrix<f64> {
    let deg = order - 1;
    let mut t = vec![lo; order];
    t.extend((1..n_knots - 1).map(|k| lo + (hi - lo) * k as f64 / (n_knots - 1) as f64));
    t.extend(std::iter::repeat_n(hi, order));
    let n_basis = n_knots + order - 2;
    let mut out = Matrix::zeros(xs.len(), n_basis);
    let mut left = vec![0.0; order];
    let mut right = vec![0.0; order];
    for (r, &x) in xs.iter().enumerate() {
        // Knot span with t[s] <= x < t[s+1]; the right end joins the last span.
        let mut s = deg;
        while s + 1 < n_basis && x >= t[s + 1] {
            s += 1;
        }
        let mut b = vec![0.0; order];
        b[0] = 1.0;
        for j in 1..=deg {
            left[j] = x - t[s + 1 - j];
            right[j] = t[s + j] - x;
            let mut saved = 0.0;
            for k in 0..j {
                let tmp = b[k] / (right[k + 1] + left[j - k]);
                b[k] = saved + right[k + 1] * tmp;
                saved = left[j - k] * tmp;
            }
            b[j] = saved;
        }
        for (k, &v) in b.iter().enumerate() {
            out[(r, s - deg + k)] = v;
        }
    }
    out
}

/// Penalized least-squares fit: `(BᵀB + λ DᵀD) c = Bᵀy` with `D` the
/// second-difference operator on the coefficients. Returns the fitted values at the basis rows.
pub(crate) struct PenalizedSmoother {
    basis: Matrix<f64>,
    system: Matrix<f64>,
}

impl PenalizedSmoother {
    pub(crate) fn new(basis: Matrix<f64>, penalty: f64) -> Self {
        let p = basis.ncols();
        let mut system = basis.transpose().matmul(&basis);
        if penalty > 0.0 && p >= 3 {
            for r in 0..p - 2 {
                let d = [(r, 1.0), (r + 1, -2.0), (r + 2, 1.0)];
                for &(a, da) in &d {
                    for &(b, db) in &d {
                        system[(a, b)] += penalty * da * db;
                    }
                }
            }
        }
        Self { basis, system }
    }

    pub(crate) fn fit(&self, y: &[f64]) -> Option<Vec<f64>> {
        let rhs = self.basis.transpose().matvec(y);
        let c = solve(&self.system, &rhs)?;
        Some(self.basis.matvec(&c))
    }
}
