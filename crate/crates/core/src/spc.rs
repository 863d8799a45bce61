//! Control charts: individuals charts, PCA Hotelling T² with contribution
//! decomposition, and functional MSPC on FPC scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use thiserror::Error;

use crate::align::AlignedBatchSet;
use crate::fpca::{fit_fpca_tag, scores_feature_matrix, Components, FpcaError, FpcaModel, Quadrature, SmoothingConfig};
use crate::landmarks::FeatureMatrix;
use crate::linalg::{canonical_sign, svd, Matrix};
use crate::scalar::{mean, sample_std, Real};

/// d2 constant for moving ranges of two consecutive points.
const D2: f64 = 1.128;

/// Below this many training batches the F-distribution limit is replaced by an empirical quantile.
pub const MIN_ROWS_FOR_F_LIMIT: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpcError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("need at least {needed} complete rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("every feature is constant over the training rows")]
    AllFeaturesConstant,
    #[error("observation lacks feature `{0}`")]
    MissingFeature(String),
    #[error("non-finite value for `{0}`")]
    NonFiniteValue(String),
    #[error("invalid chart configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Fpca(#[from] FpcaError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ChartPoint<T> {
    pub value: T,
    pub out_of_control: bool,
}

/// Shewhart individuals chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct UnivariateChart<T> {
    pub center: T,
    pub sigma: T,
    pub lower_limit: T,
    pub upper_limit: T,
    pub points: Vec<ChartPoint<T>>,
}

impl<T: Real> UnivariateChart<T> {
    pub fn n_flagged(&self) -> usize {
        self.points.iter().filter(|p| p.out_of_control).count()
    }
}

/// Individuals chart: centre at the mean, sigma from the average moving range.
pub fn fit_univariate<T: Real>(values: &[T]) -> Result<UnivariateChart<T>, SpcError> {
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(SpcError::NonFiniteValue(format!("point {k}")));
    }
    if values.len() < 5 {
        return Err(SpcError::TooFewPoints { needed: 5, got: values.len() });
    }
    let center = mean(values);
    let mr_bar = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<T>() / T::count(values.len() - 1);
    let sigma = mr_bar / T::lit(D2);
    let three = T::lit(3.0);
    let (lower_limit, upper_limit) = (center - three * sigma, center + three * sigma);
    let points = values
        .iter()
        .map(|&value| ChartPoint { value, out_of_control: value > upper_limit || value < lower_limit })
        .collect();
    Ok(UnivariateChart { center, sigma, lower_limit, upper_limit, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitRule {
    FDistribution,
    EmpiricalQuantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T2Config {
    /// `Fixed(A)` or a cumulative variance cutoff on the autoscaled PCA.
    pub components: Components,
    pub alpha: f64,
}

impl Default for T2Config {
    /// Every non-degenerate component, alpha 0.01.
    fn default() -> Self {
        Self { components: Components::Cutoff(1.0), alpha: 0.01 }
    }
}

/// PCA Hotelling-T² model over autoscaled features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ControlChartModel<T> {
    pub feature_names: Vec<String>,
    pub dropped_features: Vec<String>,
    pub batch_ids: Vec<String>,
    pub excluded_batches: Vec<String>,
    pub mean: Vec<T>,
    pub scale: Vec<T>,
    /// J × A, orthonormal columns.
    pub loadings: Matrix<T>,
    pub component_variances: Vec<T>,
    pub t2_limit: T,
    pub limit_rule: LimitRule,
    pub alpha: f64,
    pub training_t2: Vec<T>,
    pub config: T2Config,
    pub warnings: Vec<String>,
}

impl<T: Real> ControlChartModel<T> {
    pub fn n_components(&self) -> usize {
        self.component_variances.len()
    }

    /// Autoscaled copy of an observation given in model feature order.
    fn autoscale(&self, x: &[T]) -> Vec<T> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((&v, &m), &s)| (v - m) / s).collect()
    }

    fn scores(&self, z: &[T]) -> Vec<T> {
        (0..self.n_components())
            .map(|a| z.iter().enumerate().map(|(j, &v)| v * self.loadings[(j, a)]).sum())
            .collect()
    }

    /// T² of an observation in model feature order.
    pub fn t2_of(&self, x: &[T]) -> T {
        let t = self.scores(&self.autoscale(x));
        t.iter().zip(&self.component_variances).map(|(&t, &l)| t * t / l).sum()
    }

    /// Per-feature contributions of an observation in model feature order; they sum to its T².
    pub fn contributions_of(&self, x: &[T]) -> Vec<T> {
        let z = self.autoscale(x);
        let t = self.scores(&z);
        (0..z.len())
            .map(|j| {
                let w: T = (0..t.len()).map(|a| t[a] / self.component_variances[a] * self.loadings[(j, a)]).sum();
                w * z[j]
            })
            .collect()
    }

    pub fn flagged(&self) -> Vec<bool> {
        self.training_t2.iter().map(|&t| t > self.t2_limit).collect()
    }

    /// Pulls this model's features out of an observation map.
    pub fn observation(&self, observation: &BTreeMap<String, T>) -> Result<Vec<T>, SpcError> {
        self.feature_names
            .iter()
            .map(|f| {
                let v = *observation.get(f).ok_or_else(|| SpcError::MissingFeature(f.clone()))?;
                if v.is_finite() { Ok(v) } else { Err(SpcError::NonFiniteValue(f.clone())) }
            })
            .collect()
    }

    /// Pulls this model's features out of one row of a feature matrix.
    pub fn row_observation(&self, features: &FeatureMatrix<T>, row: usize) -> Result<Vec<T>, SpcError> {
        self.feature_names
            .iter()
            .map(|f| {
                let c = features.column_index(f).ok_or_else(|| SpcError::MissingFeature(f.clone()))?;
                let v = features.get(row, c).ok_or_else(|| SpcError::MissingFeature(f.clone()))?;
                if v.is_finite() { Ok(v) } else { Err(SpcError::NonFiniteValue(f.clone())) }
            })
            .collect()
    }
}

/// Linear-interpolation sample quantile (the usual "type 7" definition).
pub fn quantile_type7(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Phase I limit `A(I-1)(I+1)/(I(I-A)) · F_{1-α}(A, I-A)`.
pub fn f_limit(a: usize, i: usize, alpha: f64) -> f64 {
    let (af, i_f) = (a as f64, i as f64);
    let f = FisherSnedecor::new(af, i_f - af).expect("positive degrees of freedom");
    af * (i_f - 1.0) * (i_f + 1.0) / (i_f * (i_f - af)) * f.inverse_cdf(1.0 - alpha)
}

/// Fits a T² chart on the complete rows of `features`.
pub fn fit_t2<T: Real>(features: &FeatureMatrix<T>, config: &T2Config) -> Result<ControlChartModel<T>, SpcError> {
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(SpcError::InvalidConfig("alpha must lie in (0, 1)".into()));
    }
    match config.components {
        Components::Fixed(0) => return Err(SpcError::InvalidConfig("need at least one component".into())),
        Components::Cutoff(c) if !(c > 0.0 && c <= 1.0) => {
            return Err(SpcError::InvalidConfig("variance cutoff must lie in (0, 1]".into()))
        }
        _ => {}
    }
    let mut warnings = Vec::new();
    let (mut batch_ids, mut excluded_batches, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for (r, id) in features.rows.iter().enumerate() {
        let row: Option<Vec<T>> = (0..features.ncols()).map(|c| features.get(r, c).filter(|v| v.is_finite())).collect();
        match row {
            Some(row) => {
                batch_ids.push(id.clone());
                rows.push(row);
            }
            None => excluded_batches.push(id.clone()),
        }
    }
    if !excluded_batches.is_empty() {
        warnings.push(format!("{} batch(es) with missing values left out of training", excluded_batches.len()));
    }
    let i_n = rows.len();
    if i_n < 3 {
        return Err(SpcError::TooFewRows { needed: 3, got: i_n });
    }
    let (mut feature_names, mut dropped_features, mut mean_v, mut scale, mut kept) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (c, name) in features.columns.iter().enumerate() {
        let col: Vec<T> = rows.iter().map(|r| r[c]).collect();
        let (m, s) = (mean(&col), sample_std(&col));
        // Treat spreads at rounding level relative to the mean as zero.
        if s > m.abs() * T::epsilon() * T::lit(16.0) && s > T::min_positive_value() {
            feature_names.push(name.clone());
            mean_v.push(m);
            scale.push(s);
            kept.push(c);
        } else {
            dropped_features.push(name.clone());
        }
    }
    if !dropped_features.is_empty() {
        warnings.push(format!("dropped zero-variance features: {}", dropped_features.join(", ")));
    }
    if kept.is_empty() {
        return Err(SpcError::AllFeaturesConstant);
    }
    let j_n = kept.len();
    let mut z = Matrix::zeros(i_n, j_n);
    for (r, row) in rows.iter().enumerate() {
        for (k, &c) in kept.iter().enumerate() {
            z[(r, k)] = (row[c] - mean_v[k]) / scale[k];
        }
    }
    let dec = svd(&z);
    let s0 = dec.s.first().copied().unwrap_or(T::zero());
    let rank = dec.s.iter().take_while(|&&s| s > s0 * T::epsilon().sqrt()).count();
    let denom = T::count(i_n - 1);
    let variances: Vec<T> = dec.s[..rank].iter().map(|&s| s * s / denom).collect();
    let a = match config.components {
        Components::Fixed(a) => {
            if a > rank {
                warnings.push(format!("requested {a} components but the autoscaled data have rank {rank}"));
            }
            a.min(rank)
        }
        Components::Cutoff(c) => {
            let total: T = variances.iter().copied().sum();
            let mut acc = T::zero();
            variances
                .iter()
                .position(|&l| {
                    acc = acc + l;
                    (acc / total).as_f64() >= c - 1e-12
                })
                .map_or(rank, |k| k + 1)
        }
    };
    if i_n < a + 2 {
        return Err(SpcError::TooFewRows { needed: a + 2, got: i_n });
    }
    let mut loadings = Matrix::zeros(j_n, a);
    for k in 0..a {
        let mut p = dec.v.column(k);
        canonical_sign(&mut p);
        for (j, v) in p.into_iter().enumerate() {
            loadings[(j, k)] = v;
        }
    }
    let mut model = ControlChartModel {
        feature_names,
        dropped_features,
        batch_ids,
        excluded_batches,
        mean: mean_v,
        scale,
        loadings,
        component_variances: variances[..a].to_vec(),
        t2_limit: T::zero(),
        limit_rule: LimitRule::FDistribution,
        alpha: config.alpha,
        training_t2: Vec::new(),
        config: *config,
        warnings,
    };
    model.training_t2 = rows
        .iter()
        .map(|row| model.t2_of(&kept.iter().map(|&c| row[c]).collect::<Vec<T>>()))
        .collect();
    if i_n >= MIN_ROWS_FOR_F_LIMIT {
        model.t2_limit = T::lit(f_limit(a, i_n, config.alpha));
    } else {
        let t2: Vec<f64> = model.training_t2.iter().map(|t| t.as_f64()).collect();
        model.t2_limit = T::lit(quantile_type7(&t2, 1.0 - config.alpha));
        model.limit_rule = LimitRule::EmpiricalQuantile;
        model
            .warnings
            .push(format!("{i_n} training batches (< {MIN_ROWS_FOR_F_LIMIT}): empirical quantile limit used"));
    }
    Ok(model)
}

/// T² of an observation keyed by feature name.
pub fn t2_score<T: Real>(model: &ControlChartModel<T>, observation: &BTreeMap<String, T>) -> Result<T, SpcError> {
    Ok(model.t2_of(&model.observation(observation)?))
}

/// Per-feature T² contributions `Σ_a (t_a/λ_a) p_ja z_j`, in model feature order.
pub fn t2_contributions<T: Real>(
    model: &ControlChartModel<T>,
    observation: &BTreeMap<String, T>,
) -> Result<Vec<(String, T)>, SpcError> {
    let c = model.contributions_of(&model.observation(observation)?);
    Ok(model.feature_names.iter().cloned().zip(c).collect())
}

/// Contributions of every row of `features` (batches × model features).
/// Rows lacking a model feature are masked.
pub fn contribution_heatmap<T: Real>(model: &ControlChartModel<T>, features: &FeatureMatrix<T>) -> FeatureMatrix<T> {
    let values = (0..features.nrows())
        .flat_map(|r| match model.row_observation(features, r) {
            Ok(x) => model.contributions_of(&x).into_iter().map(Some).collect::<Vec<_>>(),
            Err(_) => vec![None; model.feature_names.len()],
        })
        .collect();
    FeatureMatrix::new(features.rows.clone(), model.feature_names.clone(), values).expect("model features are unique")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MspcConfig {
    pub smoothing: SmoothingConfig,
    pub fpca_components: Components,
    pub quadrature: Quadrature,
    pub chart: T2Config,
}

impl Default for MspcConfig {
    fn default() -> Self {
        Self {
            smoothing: SmoothingConfig::default(),
            fpca_components: Components::Cutoff(0.95),
            quadrature: Quadrature::Trapezoid,
            chart: T2Config::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FunctionalMspc<T> {
    pub fpca: Vec<FpcaModel<T>>,
    pub scores: FeatureMatrix<T>,
    pub chart: ControlChartModel<T>,
    /// Per training batch (chart order), contributions summed per tag.
    pub tag_contributions: Vec<BTreeMap<String, T>>,
}

/// Sums feature contributions by the tag prefix before `|`.
pub fn aggregate_by_tag<T: Real>(names: &[String], contributions: &[T]) -> BTreeMap<String, T> {
    let mut out = BTreeMap::new();
    for (n, &c) in names.iter().zip(contributions) {
        let tag = n.split_once('|').map_or(n.as_str(), |(t, _)| t);
        let e = out.entry(tag.to_string()).or_insert(T::zero());
        *e = *e + c;
    }
    out
}

/// FPCA per tag, FPC scores concatenated as features, then a T² chart on them.
pub fn functional_mspc<T: Real>(
    aligned: &AlignedBatchSet<T>,
    tags: &[String],
    config: &MspcConfig,
) -> Result<FunctionalMspc<T>, SpcError> {
    if aligned.n_batches() < 5 {
        return Err(SpcError::TooFewRows { needed: 5, got: aligned.n_batches() });
    }
    if tags.is_empty() {
        return Err(SpcError::InvalidConfig("no tags given".into()));
    }
    let fpca = tags
        .iter()
        .map(|t| fit_fpca_tag(aligned, t, &config.smoothing, config.fpca_components, config.quadrature))
        .collect::<Result<Vec<_>, _>>()?;
    let scores = scores_feature_matrix(&fpca);
    if scores.ncols() == 0 {
        return Err(SpcError::AllFeaturesConstant);
    }
    let chart = fit_t2(&scores, &config.chart)?;
    let tag_contributions = chart
        .batch_ids
        .iter()
        .map(|id| {
            let r = scores.row_index(id).expect("chart batches come from the score matrix");
            let x = chart.row_observation(&scores, r).expect("training rows are complete");
            let mut agg = aggregate_by_tag(&chart.feature_names, &chart.contributions_of(&x));
            for t in tags {
                agg.entry(t.clone()).or_insert(T::zero());
            }
            agg
        })
        .collect();
    Ok(FunctionalMspc { fpca, scores, chart, tag_contributions })
}
