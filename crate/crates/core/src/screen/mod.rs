//! Random-forest predictor screening with a synthetic noise threshold.
//!
//! A column of standard-normal noise is appended to the features, a forest
//! of regression trees is grown, and every feature whose contribution beats
//! the noise column's is selected.
//!
//! A feature's contribution is the reduction in squared error produced by the
//! splits on it, summed over all trees. With bootstrap sampling the reduction
//! is measured on each tree's out-of-bag rows using the node means learned
//! in-bag, so splits that merely fit noise score zero or below; without
//! bootstrap the in-bag reduction is used. Per-feature totals are clamped at
//! zero and normalized to sum to one (over the real features and the noise
//! column together) whenever any total is positive.

mod tree;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landmarks::FeatureMatrix;
use crate::scalar::{median, Real};
pub use tree::RegressionTree;
use tree::TreeParams;

pub const NOISE_FEATURE: &str = "__noise__";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScreenError {
    #[error("need at least 5 rows with a finite target, got {0}")]
    TooFewRows(usize),
    #[error("target has {target} values but the feature matrix has {rows} rows")]
    LengthMismatch { target: usize, rows: usize },
    #[error("no features to screen")]
    NoFeatures,
    #[error("invalid forest configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Fraction of features tried at each split.
    pub feature_subsample: f64,
    pub row_bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: None,
            min_samples_leaf: 3,
            feature_subsample: 1.0 / 3.0,
            row_bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    fn validate(&self) -> Result<(), ScreenError> {
        if self.n_trees == 0 {
            return Err(ScreenError::InvalidConfig("n_trees must be >= 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(ScreenError::InvalidConfig("min_samples_leaf must be >= 1".into()));
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return Err(ScreenError::InvalidConfig("feature_subsample must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Rows with a finite target, features imputed by column medians, stored column-major.
#[derive(Debug, Clone, PartialEq)]
struct Prepared {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    imputed_cells: usize,
    dropped_rows: usize,
}

fn prepare<T: Real>(features: &FeatureMatrix<T>, target: &[Option<T>]) -> Result<Prepared, ScreenError> {
    if target.len() != features.nrows() {
        return Err(ScreenError::LengthMismatch { target: target.len(), rows: features.nrows() });
    }
    if features.ncols() == 0 {
        return Err(ScreenError::NoFeatures);
    }
    let rows: Vec<usize> = (0..features.nrows())
        .filter(|&r| target[r].is_some_and(|v| v.is_finite()))
        .collect();
    if rows.len() < 5 {
        return Err(ScreenError::TooFewRows(rows.len()));
    }
    let y: Vec<f64> = rows.iter().map(|&r| target[r].unwrap().as_f64()).collect();
    let mut imputed = 0;
    let x = (0..features.ncols())
        .map(|c| {
            let col: Vec<Option<f64>> = rows
                .iter()
                .map(|&r| features.get(r, c).map(|v| v.as_f64()).filter(|v| v.is_finite()))
                .collect();
            let present: Vec<f64> = col.iter().flatten().copied().collect();
            let fill = if present.is_empty() { 0.0 } else { median(&present) };
            col.into_iter()
                .map(|v| {
                    v.unwrap_or_else(|| {
                        imputed += 1;
                        fill
                    })
                })
                .collect()
        })
        .collect();
    Ok(Prepared { x, y, imputed_cells: imputed, dropped_rows: features.nrows() - rows.len() })
}

/// An ensemble of regression trees.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub feature_names: Vec<String>,
    pub trees: Vec<RegressionTree>,
    /// Per tree, the rows (of the prepared data) not drawn into its sample.
    out_of_bag: Vec<Vec<usize>>,
    config: ForestConfig,
    data: Prepared,
}

impl Forest {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Coefficient of determination on the rows used for fitting.
    pub fn training_r2(&self) -> f64 {
        let y = &self.data.y;
        let m = y.iter().sum::<f64>() / y.len() as f64;
        let tss: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
        let rss: f64 = (0..y.len())
            .map(|r| {
                let row: Vec<f64> = self.data.x.iter().map(|c| c[r]).collect();
                (y[r] - self.predict(&row)).powi(2)
            })
            .sum();
        if tss > 0.0 {
            1.0 - rss / tss
        } else {
            1.0
        }
    }

    pub fn n_splits(&self) -> usize {
        self.trees.iter().map(RegressionTree::n_splits).sum()
    }
}

/// Fits a regression forest. Rows whose target is missing or non-finite are
/// dropped; missing feature cells take their column's median.
pub fn fit_forest<T: Real>(features: &FeatureMatrix<T>, target: &[Option<T>], config: &ForestConfig) -> Result<Forest, ScreenError> {
    config.validate()?;
    let data = prepare(features, target)?;
    let n = data.y.len();
    let p = data.x.len();
    let params = TreeParams {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        n_try: ((config.feature_subsample * p as f64).round() as usize).clamp(1, p),
    };
    let grown: Vec<(RegressionTree, Vec<usize>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let (idx, oob) = if config.row_bootstrap {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut drawn = vec![false; n];
                idx.iter().for_each(|&i| drawn[i] = true);
                (idx, (0..n).filter(|&i| !drawn[i]).collect())
            } else {
                ((0..n).collect(), Vec::new())
            };
            (RegressionTree::fit(&data.x, &data.y, idx, &params, &mut rng), oob)
        })
        .collect();
    let (trees, out_of_bag) = grown.into_iter().unzip();
    Ok(Forest {
        feature_names: features.columns.clone(),
        trees,
        out_of_bag,
        config: config.clone(),
        data,
    })
}

/// Normalized contribution of every feature, in column order.
pub fn contribution_ranking(forest: &Forest) -> Vec<(String, f64)> {
    let p = forest.feature_names.len();
    let all: Vec<usize> = (0..forest.data.y.len()).collect();
    let per_tree: Vec<Vec<f64>> = forest
        .trees
        .par_iter()
        .zip(&forest.out_of_bag)
        .map(|(tree, oob)| {
            let mut acc = vec![0.0; p];
            let rows = if forest.config.row_bootstrap { oob } else { &all };
            tree.sse_reduction(&forest.data.x, &forest.data.y, rows, &mut acc);
            acc
        })
        .collect();
    let mut total = vec![0.0; p];
    for acc in &per_tree {
        for (t, a) in total.iter_mut().zip(acc) {
            *t += a;
        }
    }
    total.iter_mut().for_each(|v| *v = v.max(0.0));
    let sum: f64 = total.iter().sum();
    if sum > 0.0 {
        total.iter_mut().for_each(|v| *v /= sum);
    }
    forest.feature_names.iter().cloned().zip(total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub target_name: String,
    /// Real features in column order.
    pub contributions: Vec<(String, f64)>,
    pub noise_contribution: f64,
    /// Features beating the noise column, by descending contribution.
    pub selected: Vec<String>,
    pub config: ForestConfig,
    pub seed: u64,
    pub rows_used: usize,
    pub rows_dropped: usize,
    pub imputed_cells: usize,
    pub notes: Vec<String>,
}

impl ScreeningReport {
    /// Real features by descending contribution; ties keep column order.
    pub fn ranking(&self) -> Vec<(String, f64)> {
        let mut r = self.contributions.clone();
        r.sort_by(|a, b| b.1.total_cmp(&a.1));
        r
    }
}

/// Appends the noise column, fits a forest and selects features whose
/// contribution strictly exceeds the noise column's.
pub fn screen_predictors<T: Real>(
    features: &FeatureMatrix<T>,
    target: &[Option<T>],
    target_name: &str,
    config: &ForestConfig,
) -> Result<ScreeningReport, ScreenError> {
    if features.columns.iter().any(|c| c == NOISE_FEATURE) {
        return Err(ScreenError::InvalidConfig(format!("feature name `{NOISE_FEATURE}` is reserved")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(u64::MAX);
    let noise: Vec<Option<T>> = (0..features.nrows())
        .map(|_| Some(T::lit(rng.sample::<f64, _>(StandardNormal))))
        .collect();
    let noise_col = FeatureMatrix::new(features.rows.clone(), vec![NOISE_FEATURE.into()], noise)
        .expect("single column is unique");
    let augmented = features.hstack(&noise_col).expect("rows match by construction");
    let forest = fit_forest(&augmented, target, config)?;
    let mut contributions = contribution_ranking(&forest);
    let (_, noise_contribution) = contributions.pop().expect("noise column is last");

    let mut notes = Vec::new();
    if forest.n_splits() == 0 {
        notes.push("no tree split: the target is constant or too small for min_samples_leaf".into());
    }
    if forest.data.imputed_cells > 0 {
        notes.push(format!("{} missing feature cells imputed with column medians", forest.data.imputed_cells));
    }
    if forest.data.dropped_rows > 0 {
        notes.push(format!("{} rows without a finite target dropped", forest.data.dropped_rows));
    }
    let mut report = ScreeningReport {
        target_name: target_name.to_string(),
        contributions,
        noise_contribution,
        selected: Vec::new(),
        config: config.clone(),
        seed: config.seed,
        rows_used: forest.data.y.len(),
        rows_dropped: forest.data.dropped_rows,
        imputed_cells: forest.data.imputed_cells,
        notes,
    };
    report.selected = report
        .ranking()
        .into_iter()
        .filter(|(_, c)| *c > noise_contribution)
        .map(|(n, _)| n)
        .collect();
    Ok(report)
}
