//! Synchronization of variable-duration batches onto one shared time index.
//!
//! Three families are provided:
//!
//! * [`align_by_triggers`] warps each phase linearly onto a fixed number of
//!   grid points, so phase boundaries coincide across batches.
//! * [`align_by_indicator`] re-parameterizes every batch by a monotone
//!   progress variable instead of time.
//! * [`dtw_align`] and [`stagewise_dtw`] warp each batch onto a reference
//!   batch with dynamic time warping, with Sakoe-Chiba local constraints,
//!   global bands, open-end boundaries, derivative pretreatments and per-tag
//!   weights.

mod dtw;
mod indicator;
mod io;
mod reference;
mod triggers;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{BatchRecord, Grid, IngestError};
use crate::linalg::Matrix;
use crate::scalar::Real;

pub use dtw::{
    choose_local_p, dtw_align, dtw_cost_matrix, dtw_optimal_path, envelope_band, pretreat_derivative,
    savitzky_golay_smooth, stagewise_dtw, Band, Boundary, DtwAlignment, DtwConfig, DtwVariant, GlobalBand,
    Normalization, PSelection, PathDiagnostics, WarpingPath,
};
pub use indicator::align_by_indicator;
pub use io::{read_aligned_csv, write_aligned_csv, AlignmentSidecar};
pub use reference::select_reference;
pub use triggers::{align_by_triggers, PhaseLengthMode, PointsPerPhase, TriggerAlignmentConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("batch `{0}` has a different phase sequence than the first batch")]
    InconsistentPhaseSequence(String),
    #[error("batch `{batch}` lacks phase `{phase}`")]
    PhaseMissing { batch: String, phase: String },
    #[error("batch `{batch}`: indicator reverses by {reversal:.4} of its range")]
    NonMonotoneIndicator { batch: String, reversal: f64 },
    #[error("batch `{0}`: indicator start/end values are incompatible with the cohort")]
    IncompatibleEndpoints(String),
    #[error("no eligible reference batch")]
    NoEligibleBatch,
    #[error("tag `{0}` has zero variance in the reference; cannot standardize")]
    ZeroVarianceTag(String),
    #[error("no tag carries a positive weight")]
    EmptyTagSet,
    #[error("no warping path satisfies the local, global and boundary constraints")]
    NoFeasiblePath,
    #[error("series of length {got} is too short; need at least {needed}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("envelope needs at least one warping path on a common reference length")]
    EmptyPathSet,
    #[error("every candidate local constraint is infeasible")]
    AllCandidatesInfeasible,
    #[error("unknown batch `{0}`")]
    UnknownBatch(String),
    #[error("batch `{batch}` has no samples for tag `{tag}`")]
    MissingTag { batch: String, tag: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Provenance of an [`AlignedBatchSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum AlignmentMethod {
    Triggers {
        config: TriggerAlignmentConfig,
        points_per_phase: Vec<(String, usize)>,
    },
    Indicator {
        tag: String,
        n_points: usize,
        tolerance: f64,
        /// Indicator value at each grid index.
        levels: Vec<f64>,
    },
    Dtw {
        reference: String,
        config: DtwConfig,
    },
    StagewiseDtw {
        reference: String,
        config: DtwConfig,
    },
    /// Read back from CSV without a sidecar.
    Imported,
}

/// Batches resampled onto one grid. `values[b][j][n]` is tag `j` of batch `b`
/// at grid index `n`; `time_maps[b][n]` is the original time (seconds from
/// batch start) that grid index `n` corresponds to in batch `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AlignedBatchSet<T> {
    pub grid: Grid<T>,
    pub tags: Vec<String>,
    pub batch_ids: Vec<String>,
    pub values: Vec<Vec<Vec<T>>>,
    pub time_maps: Vec<Vec<T>>,
    pub method: AlignmentMethod,
    pub warnings: Vec<String>,
}

impl<T: Real> AlignedBatchSet<T> {
    pub fn n_batches(&self) -> usize {
        self.batch_ids.len()
    }

    pub fn tag_index(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    pub fn batch_index(&self, id: &str) -> Option<usize> {
        self.batch_ids.iter().position(|b| b == id)
    }

    pub fn series(&self, batch: usize, tag: usize) -> &[T] {
        &self.values[batch][tag]
    }

    /// I × N matrix of one tag's aligned values.
    pub fn tag_matrix(&self, tag: &str) -> Option<Matrix<T>> {
        let j = self.tag_index(tag)?;
        let rows: Vec<Vec<T>> = self.values.iter().map(|b| b[j].clone()).collect();
        Some(Matrix::from_rows(&rows))
    }
}

/// One batch's multivariate samples on a common per-batch timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples<T> {
    pub times: Vec<T>,
    /// `values[j][k]`: tag `j` at sample `k`.
    pub values: Vec<Vec<T>>,
}

impl<T: Real> Samples<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Restricts to samples with index in `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            times: self.times[range.clone()].to_vec(),
            values: self.values.iter().map(|v| v[range.clone()].to_vec()).collect(),
        }
    }
}

/// Collects `tags` of a batch onto the union of their timestamps, linearly
/// interpolating each tag where it was not sampled. When all tags share
/// timestamps this is exactly the recorded data.
pub fn native_samples<T: Real>(batch: &BatchRecord<T>, tags: &[String]) -> Result<Samples<T>, AlignError> {
    let mut stamps: Vec<T> = Vec::new();
    for tag in tags {
        let s = batch.series.get(tag).ok_or_else(|| AlignError::MissingTag {
            batch: batch.batch_id.clone(),
            tag: tag.clone(),
        })?;
        stamps.extend_from_slice(&s.times);
    }
    stamps.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    stamps.dedup();
    let values = tags
        .iter()
        .map(|tag| {
            let s = &batch.series[tag];
            stamps
                .iter()
                .map(|&t| crate::ingest::resample::interp_linear(&s.times, &s.values, t))
                .collect()
        })
        .collect();
    Ok(Samples { times: stamps, values })
}

/// Verifies that every batch shares the first batch's phase-name sequence.
pub(crate) fn common_phase_sequence<T: Real>(batches: &[BatchRecord<T>]) -> Result<Vec<String>, AlignError> {
    let Some(first) = batches.first() else {
        return Err(AlignError::NoEligibleBatch);
    };
    let names: Vec<String> = first.phases.iter().map(|p| p.name.clone()).collect();
    for b in &batches[1..] {
        let other: Vec<String> = b.phases.iter().map(|p| p.name.clone()).collect();
        if other == names {
            continue;
        }
        let present: BTreeSet<&String> = other.iter().collect();
        if other.len() < names.len() {
            if let Some(missing) = names.iter().find(|n| !present.contains(n)) {
                return Err(AlignError::PhaseMissing {
                    batch: b.batch_id.clone(),
                    phase: missing.clone(),
                });
            }
        }
        return Err(AlignError::InconsistentPhaseSequence(b.batch_id.clone()));
    }
    Ok(names)
}

pub(crate) fn weight_map(weights: &BTreeMap<String, f64>, tags: &[String]) -> Result<Vec<(String, f64)>, AlignError> {
    if weights.is_empty() {
        if tags.is_empty() {
            return Err(AlignError::EmptyTagSet);
        }
        return Ok(tags.iter().map(|t| (t.clone(), 1.0)).collect());
    }
    for (t, &w) in weights {
        if !tags.contains(t) {
            return Err(AlignError::InvalidConfig(format!("weight given for unknown tag `{t}`")));
        }
        if !(w >= 0.0) || !w.is_finite() {
            return Err(AlignError::InvalidConfig(format!("weight for `{t}` must be finite and >= 0")));
        }
    }
    let out: Vec<(String, f64)> = weights
        .iter()
        .filter(|(_, &w)| w > 0.0)
        .map(|(t, &w)| (t.clone(), w))
        .collect();
    if out.is_empty() {
        return Err(AlignError::EmptyTagSet);
    }
    Ok(out)
}
