use super::{Boundary, WarpingPath};
use crate::align::AlignError;
use crate::linalg::Matrix;
use crate::scalar::Real;

const START: u8 = 0;
const DIAG: u8 = 1;
const VERT: u8 = 2;
const HORIZ: u8 = 3;

/// Minimum-cost warping path through `cost` under the local constraint of
/// order `local_p` (see the module documentation for the transition set).
/// Non-finite cells are infeasible.
pub fn dtw_optimal_path<T: Real>(cost: &Matrix<T>, local_p: usize, boundary: Boundary) -> Result<WarpingPath, AlignError> {
    let (n, m) = (cost.nrows(), cost.ncols());
    if n == 0 || m == 0 {
        return Err(AlignError::SeriesTooShort { needed: 1, got: 0 });
    }
    let p = local_p;
    let idx = |i: usize, j: usize| i * m + j;
    let mut acc = vec![T::infinity(); n * m];
    let mut from = vec![START; n * m];
    if cost[(0, 0)].is_finite() {
        acc[0] = cost[(0, 0)];
    }

    // Cumulative cost entering (i, j) through a composite whose non-diagonal
    // step leaves `origin`; the traversed cells are (i-p+k, j-p+k), k = 0..=p.
    let composite = |acc: &[T], origin: usize, i: usize, j: usize| -> T {
        let mut v = acc[origin];
        if !v.is_finite() {
            return v;
        }
        for k in 0..=p {
            v = v + cost[(i - p + k, j - p + k)];
        }
        v
    };

    for i in 0..n {
        for j in 0..m {
            if (i == 0 && j == 0) || !cost[(i, j)].is_finite() {
                continue;
            }
            let mut best = T::infinity();
            let mut mv = START;
            if i >= 1 && j >= 1 {
                let v = acc[idx(i - 1, j - 1)] + cost[(i, j)];
                if v < best {
                    best = v;
                    mv = DIAG;
                }
            }
            if i > p && j >= p {
                let v = composite(&acc, idx(i - p - 1, j - p), i, j);
                if v < best {
                    best = v;
                    mv = VERT;
                }
            }
            if i >= p && j > p {
                let v = composite(&acc, idx(i - p, j - p - 1), i, j);
                if v < best {
                    best = v;
                    mv = HORIZ;
                }
            }
            acc[idx(i, j)] = best;
            from[idx(i, j)] = mv;
        }
    }

    let end_i = match boundary {
        Boundary::Closed => n - 1,
        Boundary::OpenEnd => {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..n {
                let d = acc[idx(i, m - 1)];
                if !d.is_finite() {
                    continue;
                }
                let score = d.as_f64() / (i + 1 + m) as f64;
                if best.is_none_or(|(_, s)| score < s) {
                    best = Some((i, score));
                }
            }
            best.ok_or(AlignError::NoFeasiblePath)?.0
        }
    };
    let total = acc[idx(end_i, m - 1)];
    if !total.is_finite() {
        return Err(AlignError::NoFeasiblePath);
    }

    let mut pairs = vec![(end_i, m - 1)];
    let (mut i, mut j) = (end_i, m - 1);
    loop {
        match from[idx(i, j)] {
            START => break,
            DIAG => {
                i -= 1;
                j -= 1;
            }
            mv => {
                for k in 1..=p {
                    pairs.push((i - k, j - k));
                }
                if mv == VERT {
                    i -= p + 1;
                    j -= p;
                } else {
                    i -= p;
                    j -= p + 1;
                }
            }
        }
        pairs.push((i, j));
    }
    debug_assert_eq!((i, j), (0, 0));
    pairs.reverse();
    Ok(WarpingPath { pairs, cumulative_cost: total.as_f64(), n_ref: n, n_query: m })
}
