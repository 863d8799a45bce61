use super::DtwVariant;
use crate::align::AlignError;
use crate::linalg::{solve, Matrix};
use crate::scalar::Real;

/// First differences of a smoothed copy of `series` (length `N - 1`).
/// Samples are taken as unit-spaced, so a line of slope `m` per second
/// sampled every `dt` seconds yields `m·dt`.
pub fn pretreat_derivative<T: Real>(series: &[T], variant: &DtwVariant) -> Result<Vec<T>, AlignError> {
    match *variant {
        DtwVariant::Classical => Err(AlignError::InvalidConfig(
            "the classical variant has no derivative pretreatment".into(),
        )),
        DtwVariant::DerivativeExponential { alpha } => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(AlignError::InvalidConfig("exponential smoothing factor must lie in (0, 1]".into()));
            }
            need(series.len(), 2)?;
            let a = T::lit(alpha);
            let mut s = Vec::with_capacity(series.len());
            s.push(series[0]);
            for &x in &series[1..] {
                let prev = *s.last().unwrap();
                s.push(a * x + (T::one() - a) * prev);
            }
            Ok(diff(&s))
        }
        DtwVariant::DerivativeSavitzkyGolay { window, order } => {
            let s = savitzky_golay_smooth(series, window, order)?;
            Ok(diff(&s))
        }
        DtwVariant::DerivativePiecewiseLinear { segments } => {
            if segments == 0 {
                return Err(AlignError::InvalidConfig("piecewise-linear needs at least one segment".into()));
            }
            let n = series.len();
            need(n, (2 * segments).max(2))?;
            let mut out = vec![T::zero(); n - 1];
            for s in 0..segments {
                let (lo, hi) = (s * n / segments, (s + 1) * n / segments);
                let slope = ls_slope(&series[lo..hi]);
                for d in out.iter_mut().take(hi.min(n - 1)).skip(lo) {
                    *d = slope;
                }
            }
            Ok(out)
        }
    }
}

/// Savitzky-Golay smoothing. Interior points use the centred window; the
/// first and last `window / 2` points are evaluated on the polynomial fitted
/// to the first and last full window.
pub fn savitzky_golay_smooth<T: Real>(series: &[T], window: usize, order: usize) -> Result<Vec<T>, AlignError> {
    if window % 2 == 0 || window <= order {
        return Err(AlignError::InvalidConfig(format!(
            "Savitzky-Golay needs an odd window larger than the order (window {window}, order {order})"
        )));
    }
    let n = series.len();
    need(n, window)?;
    let half = window / 2;
    let weights = sg_weights(window, order);
    let apply = |row: &[f64], start: usize| -> T {
        row.iter()
            .zip(&series[start..start + window])
            .map(|(&w, &x)| T::lit(w) * x)
            .sum()
    };
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let v = if k < half {
            apply(&weights[k], 0)
        } else if k + half >= n {
            apply(&weights[window - (n - k)], n - window)
        } else {
            apply(&weights[half], k - half)
        };
        out.push(v);
    }
    Ok(out)
}

/// Row `p` holds the weights that evaluate, at window position `p`, the
/// least-squares polynomial fitted to the whole window.
fn sg_weights(window: usize, order: usize) -> Vec<Vec<f64>> {
    let half = (window / 2) as f64;
    let v: Vec<Vec<f64>> = (0..window)
        .map(|i| {
            let x = (i as f64 - half) / half.max(1.0);
            (0..=order).map(|d| x.powi(d as i32)).collect()
        })
        .collect();
    let vm = Matrix::from_rows(&v);
    let gram = vm.transpose().matmul(&vm);
    (0..window)
        .map(|p| {
            let z = solve(&gram, &v[p]).expect("Vandermonde Gram matrix is non-singular for distinct nodes");
            vm.matvec(&z)
        })
        .collect()
}

fn ls_slope<T: Real>(ys: &[T]) -> T {
    let n = T::count(ys.len());
    let xm = (n - T::one()) / T::lit(2.0);
    let ym = ys.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (k, &y) in ys.iter().enumerate() {
        let dx = T::count(k) - xm;
        sxy = sxy + dx * (y - ym);
        sxx = sxx + dx * dx;
    }
    sxy / sxx
}

fn diff<T: Real>(s: &[T]) -> Vec<T> {
    s.windows(2).map(|w| w[1] - w[0]).collect()
}

fn need(got: usize, needed: usize) -> Result<(), AlignError> {
    if got < needed {
        Err(AlignError::SeriesTooShort { needed, got })
    } else {
        Ok(())
    }
}

/// Applies the variant's pretreatment; the classical variant passes values through.
pub(crate) fn pretreat<T: Real>(series: &[T], variant: &DtwVariant) -> Result<Vec<T>, AlignError> {
    match variant {
        DtwVariant::Classical => Ok(series.to_vec()),
        v => pretreat_derivative(series, v),
    }
}
