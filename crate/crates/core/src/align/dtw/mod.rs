//! Dynamic time warping.
//!
//! Paths are lists of `(reference index, query index)` pairs over an
//! `N_ref × N_query` cost matrix.
//!
//! # Local constraint
//!
//! The Sakoe-Chiba slope constraint of order `P` is encoded as three composite
//! transitions into cell `(i, j)`:
//!
//! * diagonal, from `(i-1, j-1)`;
//! * vertical composite, from `(i-P-1, j-P)`: one reference-only step followed
//!   by `P` diagonal steps;
//! * horizontal composite, from `(i-P, j-P-1)`: one query-only step followed
//!   by `P` diagonal steps.
//!
//! A composite adds the cost of every cell it traverses (the `P + 1` cells
//! after its origin). `P = 0` reduces to the unconstrained step set
//! `{(1,1), (1,0), (0,1)}`. Because every non-diagonal step is immediately
//! followed by `P` diagonal ones, each query index maps to at most `2` reference
//! indices (and vice versa) whenever `P ≥ 1`. Ties are broken toward the
//! diagonal, then the vertical, then the horizontal transition.
//!
//! # Open end
//!
//! With [`Boundary::OpenEnd`] the path must consume the whole query but may
//! stop at any reference index `i`. The end cell minimizes
//! `D(i, N_query - 1) / (i + 1 + N_query)`, the cumulative cost divided by the
//! length of an unconstrained path ending there; the raw minimum would always
//! favour stopping early.

mod band;
mod cost;
mod path;
mod pretreat;
mod tune;
mod warp;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use band::{envelope_band, Band};
pub use cost::dtw_cost_matrix;
pub use path::dtw_optimal_path;
pub use pretreat::{pretreat_derivative, savitzky_golay_smooth};
pub use tune::{choose_local_p, PSelection};
pub use warp::{dtw_align, stagewise_dtw, DtwAlignment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DtwVariant {
    #[default]
    Classical,
    /// Exponential smoothing with factor `alpha`, then first differences.
    DerivativeExponential { alpha: f64 },
    /// Savitzky-Golay smoothing (odd `window`, polynomial `order`), then first differences.
    DerivativeSavitzkyGolay { window: usize, order: usize },
    /// Least-squares line on each of `segments` equal pieces; the derivative is the piece's slope.
    DerivativePiecewiseLinear { segments: usize },
}

impl DtwVariant {
    pub fn is_derivative(&self) -> bool {
        !matches!(self, DtwVariant::Classical)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GlobalBand {
    #[default]
    None,
    /// Cells with `|j - i·(N_query-1)/(N_ref-1)| ≤ width`.
    SakoeChiba { width: usize },
    /// Parallelogram with local slopes in `[1/2, 2]` from both corners.
    Itakura,
    /// Explicit per-reference-index query ranges, e.g. from [`envelope_band`].
    Envelope { band: Band },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Closed,
    OpenEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Standardize every tag by the reference batch's mean and sample std.
    #[default]
    PerTagStd,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtwConfig {
    pub variant: DtwVariant,
    pub local_p: usize,
    pub global_band: GlobalBand,
    pub boundary: Boundary,
    /// Tag weights; empty means every tag with weight 1. Tags absent from a
    /// non-empty map do not enter the distance.
    pub weights: BTreeMap<String, f64>,
    pub normalize: Normalization,
}

impl Default for DtwConfig {
    fn default() -> Self {
        Self {
            variant: DtwVariant::Classical,
            local_p: 1,
            global_band: GlobalBand::None,
            boundary: Boundary::Closed,
            weights: BTreeMap::new(),
            normalize: Normalization::PerTagStd,
        }
    }
}

/// A monotone alignment between a reference and a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpingPath {
    /// `(reference index, query index)` in path order.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of the cost-matrix cells along `pairs`.
    pub cumulative_cost: f64,
    pub n_ref: usize,
    pub n_query: usize,
}

impl WarpingPath {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of query indices mapped to at least `min_run` reference indices.
    pub fn singularities(&self, min_run: usize) -> usize {
        let mut count = 0;
        let mut k = 0;
        while k < self.pairs.len() {
            let j = self.pairs[k].1;
            let mut run = 0;
            while k < self.pairs.len() && self.pairs[k].1 == j {
                run += 1;
                k += 1;
            }
            if run >= min_run {
                count += 1;
            }
        }
        count
    }

    /// Mean of `|i / N_ref - j / N_query|` over the pairs.
    pub fn distortion(&self) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        let (nr, nq) = (self.n_ref as f64, self.n_query as f64);
        self.pairs
            .iter()
            .map(|&(i, j)| (i as f64 / nr - j as f64 / nq).abs())
            .sum::<f64>()
            / self.pairs.len() as f64
    }

    /// Cumulative cost divided by the number of pairs.
    pub fn normalized_cost(&self) -> f64 {
        if self.pairs.is_empty() {
            0.0
        } else {
            self.cumulative_cost / self.pairs.len() as f64
        }
    }

    /// Checks monotonicity, the step pattern for `local_p` and the boundary
    /// anchoring. Returns a description of the first violation.
    pub fn check(&self, local_p: usize, boundary: Boundary) -> Result<(), String> {
        let Some(&first) = self.pairs.first() else {
            return Err("empty path".into());
        };
        if first != (0, 0) {
            return Err(format!("path starts at {first:?}"));
        }
        let last = *self.pairs.last().unwrap();
        if last.1 + 1 != self.n_query || last.0 >= self.n_ref {
            return Err(format!("path ends at {last:?}"));
        }
        if boundary == Boundary::Closed && last.0 + 1 != self.n_ref {
            return Err(format!("closed path ends at {last:?}"));
        }
        let mut owed = 0usize;
        for w in self.pairs.windows(2) {
            let step = (w[1].0 as isize - w[0].0 as isize, w[1].1 as isize - w[0].1 as isize);
            match step {
                (1, 1) => owed = owed.saturating_sub(1),
                (1, 0) | (0, 1) => {
                    if owed > 0 {
                        return Err(format!("non-diagonal step at {:?} before {owed} owed diagonals", w[1]));
                    }
                    owed = local_p;
                }
                _ => return Err(format!("illegal step {step:?} at {:?}", w[1])),
            }
        }
        if owed > 0 {
            return Err("path ends inside a composite step".into());
        }
        Ok(())
    }

    /// Re-sums `cost` along the pairs in path order.
    pub fn resum<T: crate::scalar::Real>(&self, cost: &crate::linalg::Matrix<T>) -> f64 {
        self.pairs.iter().map(|&(i, j)| cost[(i, j)].as_f64()).sum()
    }
}

/// Per-batch outcome of an alignment against the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDiagnostics {
    pub batch_id: String,
    pub cumulative_cost: f64,
    pub normalized_cost: f64,
    pub distortion: f64,
    pub path_length: usize,
    /// Query samples mapped onto five or more reference samples.
    pub singularities: usize,
    /// Per-phase costs for stage-wise alignment; empty otherwise.
    pub phase_costs: Vec<f64>,
}

impl PathDiagnostics {
    pub(crate) fn from_path(batch_id: &str, path: &WarpingPath, phase_costs: Vec<f64>) -> Self {
        Self {
            batch_id: batch_id.to_string(),
            cumulative_cost: path.cumulative_cost,
            normalized_cost: path.normalized_cost(),
            distortion: path.distortion(),
            path_length: path.len(),
            singularities: path.singularities(5),
            phase_costs,
        }
    }
}
