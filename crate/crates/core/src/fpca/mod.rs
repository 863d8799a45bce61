//! Functional PCA of aligned trajectories.
//!
//! Curves live on the aligned grid with quadrature weights `w` (trapezoid
//! rule in grid coordinates by default). For centred data `X_c` (I × N) the
//! weighted matrix `Y = X_c W^{1/2} / sqrt(I-1)` is decomposed by SVD,
//! `Y = U S Vᵀ`; eigenvalues are `s²`, eigenfunctions `φ = W^{-1/2} v` (so
//! `φᵀ W φ = 1`) and scores `ξ = X_c W φ`. All energies are per `I - 1`:
//! the total centred quadrature energy of the training set divided by
//! `I - 1` equals the sum of all eigenvalues.

mod spline;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::AlignedBatchSet;
use crate::ingest::Grid;
use crate::landmarks::FeatureMatrix;
use crate::linalg::{canonical_sign, svd, Matrix};
use crate::scalar::Real;
use spline::{bspline_basis, PenalizedSmoother};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FpcaError {
    #[error("grid has {got} points; the basis needs at least {needed}")]
    TooFewPointsForBasis { needed: usize, got: usize },
    #[error("FPCA needs at least 2 batches, got {0}")]
    TooFewBatches(usize),
    #[error("series has {got} points, model grid has {expected}")]
    GridMismatch { expected: usize, got: usize },
    #[error("aligned set has no tag `{0}`")]
    UnknownTag(String),
    #[error("batch `{batch}` has a non-finite aligned value for tag `{tag}`")]
    NonFiniteValue { batch: String, tag: String },
    #[error("{0} scores given but the model has {1} components")]
    TooManyScores(usize, usize),
    #[error("invalid smoothing configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Use the aligned values as they are.
    #[default]
    None,
    /// Clamped B-splines of `order` with `n_knots` equally spaced distinct knots.
    Bspline { order: usize, n_knots: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SmoothingConfig {
    pub basis: Basis,
    /// Weight of the squared second differences of the spline coefficients.
    pub penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Components {
    /// Smallest K whose cumulative explained variance reaches the cutoff.
    Cutoff(f64),
    Fixed(usize),
}

impl Default for Components {
    fn default() -> Self {
        Components::Cutoff(0.95)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Trapezoid weights on the grid coordinates.
    #[default]
    Trapezoid,
    /// Unit weight per grid point; FPCA then coincides with ordinary PCA.
    Uniform,
}

impl Quadrature {
    pub fn weights<T: Real>(self, grid: &[T]) -> Vec<T> {
        let n = grid.len();
        match self {
            Quadrature::Uniform => vec![T::one(); n],
            Quadrature::Trapezoid => {
                if n < 2 {
                    return vec![T::one(); n];
                }
                let half = T::lit(0.5);
                (0..n)
                    .map(|k| {
                        let lo = if k == 0 { grid[0] } else { grid[k - 1] };
                        let hi = if k + 1 == n { grid[n - 1] } else { grid[k + 1] };
                        (hi - lo) * half
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FpcaModel<T> {
    pub tag: String,
    pub grid: Grid<T>,
    pub batch_ids: Vec<String>,
    pub weights: Vec<T>,
    pub mean_curve: Vec<T>,
    /// K × N, one eigenfunction per row.
    pub eigenfunctions: Matrix<T>,
    /// Retained eigenvalues, non-increasing.
    pub eigenvalues: Vec<T>,
    /// Every eigenvalue of the decomposition (at most `min(I, N)`).
    pub spectrum: Vec<T>,
    /// I × K.
    pub scores: Matrix<T>,
    pub smoothing: SmoothingConfig,
    pub components: Components,
    pub quadrature: Quadrature,
}

impl<T: Real> FpcaModel<T> {
    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn total_variance(&self) -> T {
        self.spectrum.iter().copied().sum()
    }
}

/// Replaces each batch's series of `tag` by its penalized B-spline fit on the grid.
pub fn smooth<T: Real>(aligned: &AlignedBatchSet<T>, tag: &str, config: &SmoothingConfig) -> Result<Matrix<T>, FpcaError> {
    let j = aligned.tag_index(tag).ok_or_else(|| FpcaError::UnknownTag(tag.to_string()))?;
    let n = aligned.grid.len();
    for (b, id) in aligned.batch_ids.iter().enumerate() {
        if aligned.values[b][j].len() != n {
            return Err(FpcaError::GridMismatch { expected: n, got: aligned.values[b][j].len() });
        }
        if aligned.values[b][j].iter().any(|v| !v.is_finite()) {
            return Err(FpcaError::NonFiniteValue { batch: id.clone(), tag: tag.to_string() });
        }
    }
    let rows: Vec<Vec<T>> = aligned.values.iter().map(|b| b[j].clone()).collect();
    match config.basis {
        Basis::None => Ok(Matrix::from_rows(&rows)),
        Basis::Bspline { order, n_knots } => {
            if order < 2 || n_knots < order {
                return Err(FpcaError::InvalidConfig(format!(
                    "need order >= 2 and n_knots >= order (order {order}, n_knots {n_knots})"
                )));
            }
            if !(config.penalty >= 0.0) {
                return Err(FpcaError::InvalidConfig("penalty must be >= 0".into()));
            }
            let n_basis = n_knots + order - 2;
            if n < n_basis {
                return Err(FpcaError::TooFewPointsForBasis { needed: n_basis, got: n });
            }
            let xs: Vec<f64> = aligned.grid.points().iter().map(|v| v.as_f64()).collect();
            let basis = bspline_basis(&xs, xs[0], xs[n - 1], order, n_knots);
            let smoother = PenalizedSmoother::new(basis, config.penalty);
            let fitted = rows
                .iter()
                .map(|r| {
                    let y: Vec<f64> = r.iter().map(|v| v.as_f64()).collect();
                    smoother
                        .fit(&y)
                        .map(|f| f.into_iter().map(T::lit).collect::<Vec<T>>())
                        .ok_or_else(|| FpcaError::InvalidConfig("spline system is singular".into()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Matrix::from_rows(&fitted))
        }
    }
}

/// Fits FPCA to an I × N matrix of curves on `grid`.
pub fn fit_fpca<T: Real>(
    curves: &Matrix<T>,
    grid: &Grid<T>,
    tag: &str,
    batch_ids: &[String],
    components: Components,
    quadrature: Quadrature,
    smoothing: SmoothingConfig,
) -> Result<FpcaModel<T>, FpcaError> {
    let (i_n, n) = (curves.nrows(), curves.ncols());
    if i_n < 2 {
        return Err(FpcaError::TooFewBatches(i_n));
    }
    if n != grid.len() {
        return Err(FpcaError::GridMismatch { expected: grid.len(), got: n });
    }
    if let Components::Cutoff(c) = components {
        if !(c > 0.0 && c <= 1.0) {
            return Err(FpcaError::InvalidConfig("variance cutoff must lie in (0, 1]".into()));
        }
    }
    let weights = quadrature.weights(grid.points());
    let mean_curve: Vec<T> = (0..n)
        .map(|c| (0..i_n).map(|r| curves[(r, c)]).sum::<T>() / T::count(i_n))
        .collect();
    let scale = T::count(i_n - 1).sqrt();
    let sqrt_w: Vec<T> = weights.iter().map(|w| w.sqrt()).collect();
    let mut y = Matrix::zeros(i_n, n);
    for r in 0..i_n {
        for c in 0..n {
            y[(r, c)] = (curves[(r, c)] - mean_curve[c]) * sqrt_w[c] / scale;
        }
    }
    let dec = svd(&y);
    let spectrum: Vec<T> = dec.s.iter().map(|&s| (s * s).max(T::zero())).collect();
    let total: T = spectrum.iter().copied().sum();
    let k = match components {
        Components::Fixed(k) => k.min(spectrum.len()),
        Components::Cutoff(c) => {
            if !(total > T::zero()) {
                0
            } else {
                let mut acc = T::zero();
                let mut k = spectrum.len();
                for (idx, &l) in spectrum.iter().enumerate() {
                    acc = acc + l;
                    // Guard against rounding just below the cutoff.
                    if (acc / total).as_f64() >= c - 1e-12 {
                        k = idx + 1;
                        break;
                    }
                }
                k
            }
        }
    };
    let mut eigenfunctions = Matrix::zeros(k, n);
    for a in 0..k {
        let mut phi: Vec<T> = (0..n).map(|c| dec.v[(c, a)] / sqrt_w[c]).collect();
        canonical_sign(&mut phi);
        eigenfunctions.row_mut(a).copy_from_slice(&phi);
    }
    let mut model = FpcaModel {
        tag: tag.to_string(),
        grid: grid.clone(),
        batch_ids: batch_ids.to_vec(),
        weights,
        mean_curve,
        eigenfunctions,
        eigenvalues: spectrum[..k].to_vec(),
        spectrum,
        scores: Matrix::zeros(i_n, k),
        smoothing,
        components,
        quadrature,
    };
    for r in 0..i_n {
        let s = project(&model, curves.row(r))?;
        model.scores.row_mut(r).copy_from_slice(&s);
    }
    Ok(model)
}

/// Smooths one tag of an aligned set and fits FPCA to it.
pub fn fit_fpca_tag<T: Real>(
    aligned: &AlignedBatchSet<T>,
    tag: &str,
    smoothing: &SmoothingConfig,
    components: Components,
    quadrature: Quadrature,
) -> Result<FpcaModel<T>, FpcaError> {
    let curves = smooth(aligned, tag, smoothing)?;
    fit_fpca(&curves, &aligned.grid, tag, &aligned.batch_ids, components, quadrature, *smoothing)
}

/// Scores of a curve: quadrature inner products of `series - mean` with each eigenfunction.
pub fn project<T: Real>(model: &FpcaModel<T>, series: &[T]) -> Result<Vec<T>, FpcaError> {
    let n = model.mean_curve.len();
    if series.len() != n {
        return Err(FpcaError::GridMismatch { expected: n, got: series.len() });
    }
    Ok((0..model.n_components())
        .map(|a| {
            let phi = model.eigenfunctions.row(a);
            (0..n)
                .map(|c| (series[c] - model.mean_curve[c]) * model.weights[c] * phi[c])
                .sum()
        })
        .collect())
}

/// `mean + Σ_k scores_k φ_k` over the given (leading) scores.
pub fn reconstruct<T: Real>(model: &FpcaModel<T>, scores: &[T]) -> Result<Vec<T>, FpcaError> {
    if scores.len() > model.n_components() {
        return Err(FpcaError::TooManyScores(scores.len(), model.n_components()));
    }
    let mut out = model.mean_curve.clone();
    for (a, &s) in scores.iter().enumerate() {
        for (o, &p) in out.iter_mut().zip(model.eigenfunctions.row(a)) {
            *o = *o + s * p;
        }
    }
    Ok(out)
}

/// Fraction of the total (untruncated) variance per retained component, and
/// the running sum. All zeros when the total variance is zero.
pub fn explained_variance<T: Real>(model: &FpcaModel<T>) -> (Vec<f64>, Vec<f64>) {
    let total = model.total_variance().as_f64();
    let fractions: Vec<f64> = model
        .eigenvalues
        .iter()
        .map(|l| if total > 0.0 { l.as_f64() / total } else { 0.0 })
        .collect();
    let cumulative = fractions
        .iter()
        .scan(0.0, |acc, f| {
            *acc += f;
            Some(*acc)
        })
        .collect();
    (fractions, cumulative)
}

/// Quadrature-weighted squared norm, per `I - 1`, of the residuals left by
/// the first `k` components over the training curves.
pub fn residual_energy<T: Real>(model: &FpcaModel<T>, curves: &Matrix<T>, k: usize) -> Result<f64, FpcaError> {
    let mut e = 0.0;
    for r in 0..curves.nrows() {
        let s = project(model, curves.row(r))?;
        let rec = reconstruct(model, &s[..k.min(s.len())])?;
        e += curves
            .row(r)
            .iter()
            .zip(&rec)
            .zip(&model.weights)
            .map(|((x, y), w)| ((*x - *y) * (*x - *y) * *w).as_f64())
            .sum::<f64>();
    }
    Ok(e / (curves.nrows() as f64 - 1.0))
}

/// Scores of several models side by side, columns `tag|FPC{k}` (k from 1).
/// The models must share their batch order.
pub fn scores_feature_matrix<T: Real>(models: &[FpcaModel<T>]) -> FeatureMatrix<T> {
    let rows = models.first().map(|m| m.batch_ids.clone()).unwrap_or_default();
    let columns: Vec<String> = models
        .iter()
        .flat_map(|m| (1..=m.n_components()).map(move |k| format!("{}|FPC{k}", m.tag)))
        .collect();
    let values = (0..rows.len())
        .flat_map(|r| models.iter().flat_map(move |m| m.scores.row(r).iter().map(|&v| Some(v))))
        .collect();
    FeatureMatrix::new(rows, columns, values).expect("tags are unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::AlignmentMethod;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn aligned(rows: Vec<Vec<f64>>) -> AlignedBatchSet<f64> {
        let n = rows[0].len();
        AlignedBatchSet {
            grid: Grid::indices(n).unwrap(),
            tags: vec!["x".into()],
            batch_ids: (0..rows.len()).map(|i| format!("b{i}")).collect(),
            time_maps: vec![vec![0.0; n]; rows.len()],
            values: rows.into_iter().map(|r| vec![r]).collect(),
            method: AlignmentMethod::Imported,
            warnings: vec![],
        }
    }

    fn spline(order: usize, n_knots: usize, penalty: f64) -> SmoothingConfig {
        SmoothingConfig { basis: Basis::Bspline { order, n_knots }, penalty }
    }

    #[test]
    fn basis_none_is_identity() {
        let a = aligned(vec![vec![1.0, 2.0, 4.0], vec![0.0, -1.0, 3.0]]);
        assert_eq!(smooth(&a, "x", &SmoothingConfig::default()).unwrap().to_rows(), vec![vec![1.0, 2.0, 4.0], vec![0.0, -1.0, 3.0]]);
    }

    #[test]
    fn basis_partitions_unity_and_reproduces_lines() {
        let xs: Vec<f64> = (0..57).map(|k| k as f64 * 0.3).collect();
        for order in 2..=5 {
            let b = bspline_basis(&xs, xs[0], xs[56], order, 9);
            for r in 0..xs.len() {
                assert!((b.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            let a = aligned(vec![xs.iter().map(|x| 2.0 - 0.5 * x).collect()]);
            let s = smooth(&a, "x", &spline(order, 9, 0.0)).unwrap();
            for (x, v) in xs.iter().zip(s.row(0)) {
                assert!((v - (2.0 - 0.5 * x)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn noisy_sine_is_denoised() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = Normal::new(0.0, 0.1).unwrap();
        let n = 200;
        let clean: Vec<f64> = (0..n).map(|k| (k as f64 / n as f64 * std::f64::consts::TAU).sin()).collect();
        let noisy: Vec<f64> = clean.iter().map(|c| c + e.sample(&mut rng)).collect();
        let s = smooth(&aligned(vec![noisy]), "x", &spline(4, 20, 0.0)).unwrap();
        let rmse = (s.row(0).iter().zip(&clean).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!(rmse < 0.1, "{rmse}");
    }

    #[test]
    fn too_few_points() {
        let a = aligned(vec![vec![1.0; 5]]);
        assert_eq!(smooth(&a, "x", &spline(4, 5, 0.0)), Err(FpcaError::TooFewPointsForBasis { needed: 7, got: 5 }));
    }

    #[test]
    fn identical_batches_have_no_variance() {
        let curve: Vec<f64> = (0..20).map(|k| (k as f64).sqrt()).collect();
        let a = aligned(vec![curve.clone(); 4]);
        let m = fit_fpca_tag(&a, "x", &SmoothingConfig::default(), Components::default(), Quadrature::Trapezoid).unwrap();
        assert_eq!(m.mean_curve, curve);
        assert_eq!(m.n_components(), 0);
        assert!(m.spectrum.iter().all(|&l| l == 0.0));
        assert_eq!(explained_variance(&m), (vec![], vec![]));
    }

    fn two_component(ratio_sd: f64) -> (AlignedBatchSet<f64>, Vec<f64>) {
        let n = 101;
        let t: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = Normal::new(0.0, 1.0).unwrap();
        let rows = (0..400)
            .map(|_| {
                let (a, b) = (z.sample(&mut rng) * ratio_sd, z.sample(&mut rng));
                t.iter()
                    .map(|&x| 1.0 + x + a * (std::f64::consts::PI * x).sin() + b * (std::f64::consts::TAU * x).sin())
                    .collect()
            })
            .collect();
        (aligned(rows), t)
    }

    #[test]
    fn spectrum_ratio_nine_to_one() {
        let (a, _) = two_component(3.0);
        let m = fit_fpca_tag(&a, "x", &SmoothingConfig::default(), Components::Fixed(2), Quadrature::Trapezoid).unwrap();
        let (f, c) = explained_variance(&m);
        assert!((f[0] - 0.9).abs() < 0.02 && (f[1] - 0.1).abs() < 0.02, "{f:?}");
        assert!(c[1] <= 1.0 + 1e-12);
    }

    #[test]
    fn projection_and_reconstruction() {
        let (a, _) = two_component(2.0);
        let m = fit_fpca_tag(&a, "x", &SmoothingConfig::default(), Components::Fixed(3), Quadrature::Trapezoid).unwrap();
        assert!(project(&m, &m.mean_curve).unwrap().iter().all(|s| s.abs() < 1e-12));
        let shifted: Vec<f64> = m.mean_curve.iter().zip(m.eigenfunctions.row(0)).map(|(u, p)| u + 2.0 * p).collect();
        let s = project(&m, &shifted).unwrap();
        assert!((s[0] - 2.0).abs() < 1e-6 && s[1].abs() < 1e-6 && s[2].abs() < 1e-6);
        let again = project(&m, &a.values[7][0]).unwrap();
        for (x, y) in again.iter().zip(m.scores.row(7)) {
            assert!((x - y).abs() < 1e-8);
        }
        assert_eq!(reconstruct(&m, &[]).unwrap(), m.mean_curve);
        assert!(matches!(project(&m, &[1.0]), Err(FpcaError::GridMismatch { .. })));
    }

    #[test]
    fn cutoff_picks_k() {
        // Spectrum (4, 2, 1, 1): cumulative 0.5, 0.75, 0.875, 1.
        let n = 8;
        let basis: Vec<Vec<f64>> = (0..4)
            .map(|k| (0..n).map(|c| if c == 2 * k { 1.0 } else { 0.0 }).collect())
            .collect();
        let sd = [2.0f64, 2f64.sqrt(), 1.0, 1.0];
        // Two rows ±sd per component give sample variance sd² with I - 1 = 7 after centring.
        let mut rows = Vec::new();
        for k in 0..4 {
            for sign in [1.0, -1.0] {
                let amp = sign * sd[k] * (7.0f64 / 2.0).sqrt();
                rows.push(basis[k].iter().map(|b| b * amp).collect::<Vec<f64>>());
            }
        }
        let m = fit_fpca_tag(&aligned(rows), "x", &SmoothingConfig::default(), Components::Cutoff(0.85), Quadrature::Uniform).unwrap();
        assert_eq!(m.n_components(), 3);
        for (l, want) in m.spectrum.iter().zip([4.0, 2.0, 1.0, 1.0]) {
            assert!((l - want).abs() < 1e-9, "{:?}", m.spectrum);
        }
    }
}
