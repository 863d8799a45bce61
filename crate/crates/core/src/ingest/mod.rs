//! Batch data model, CSV loading, validation, resampling and batchwise unfolding.
//!
//! A [`BatchDataset`] holds the three kinds of data recorded per batch run:
//! initial conditions (Z, one scalar per name), ragged trajectories (X, one
//! time series per tag) and final quality (Y, one scalar per name). Times are
//! stored as seconds relative to the batch start, which is the start of the
//! first phase.

mod load;
pub(crate) mod resample;
mod unfold;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub use load::{load_dataset, load_from_readers, parse_timestamp, LoadOptions};
pub use resample::{count_outside_span, resample_to_grid, ResampleMethod};
pub use unfold::{fold_batchwise, unfold_batchwise, UnfoldedMatrix};
pub use validate::{validate, BatchSummary, CoverageSide, Issue, IssueKind, ValidationReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file}: unknown column `{column}` (use lax columns to keep it as metadata)")]
    UnknownColumn { file: String, column: String },
    #[error("{file}:{line}: cannot parse {field} from `{value}`")]
    BadValue {
        file: String,
        line: u64,
        field: String,
        value: String,
    },
    #[error("batch `{batch}`, tag `{tag}`: timestamps are not strictly increasing")]
    NonMonotoneTimestamps { batch: String, tag: String },
    #[error("batch `{batch}`: phases overlap or are not contiguous ({detail})")]
    OverlappingPhases { batch: String, detail: String },
    #[error("batch `{batch}`: phase order indices must be 0..P-1 without gaps")]
    PhaseOrderGap { batch: String },
    #[error("events reference batch `{0}` which has no trajectory data")]
    UnknownBatchInEvents(String),
    #[error("batch `{0}` has trajectory data but no phase events")]
    MissingEvents(String),
    #[error("{file}: row for unknown batch `{batch}`")]
    UnknownBatch { file: String, batch: String },
    #[error("batch `{batch}`, tag `{tag}`: duplicate sample at t={time}")]
    DuplicateSample {
        batch: String,
        tag: String,
        time: String,
    },
    #[error("duplicate batch id `{0}`")]
    DuplicateBatch(String),
    #[error("batch `{batch}`, tag `{tag}`: sample at t={time} lies outside the batch span")]
    SampleOutsideBatch {
        batch: String,
        tag: String,
        time: String,
    },
    #[error("series is empty")]
    EmptySeries,
    #[error("series has a single point; at least two are needed to interpolate")]
    SinglePointSeries,
    #[error("grid needs at least two strictly increasing points")]
    InvalidGrid,
    #[error("aligned batches do not share one grid and tag set")]
    HeterogeneousGrids,
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

/// Strictly increasing sample positions, in aligned (dimensionless) time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Grid<T> {
    points: Vec<T>,
}

impl<T: Real> Grid<T> {
    pub fn new(points: Vec<T>) -> Result<Self, IngestError> {
        if points.len() < 2
            || points.iter().any(|p| !p.is_finite())
            || points.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(IngestError::InvalidGrid);
        }
        Ok(Self { points })
    }

    /// The index grid `0, 1, …, n-1`.
    pub fn indices(n: usize) -> Result<Self, IngestError> {
        Self::new((0..n).map(T::count).collect())
    }

    /// `n` equally spaced points from `lo` to `hi` inclusive.
    pub fn linspace(lo: T, hi: T, n: usize) -> Result<Self, IngestError> {
        if n < 2 {
            return Err(IngestError::InvalidGrid);
        }
        let step = (hi - lo) / T::count(n - 1);
        let mut pts: Vec<T> = (0..n).map(|k| lo + step * T::count(k)).collect();
        pts[n - 1] = hi;
        Self::new(pts)
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One tag's samples within a batch; times are seconds from batch start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Series<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> Series<T> {
    /// Builds a series, checking that times are strictly increasing.
    pub fn new(times: Vec<T>, values: Vec<T>) -> Result<Self, IngestError> {
        if times.len() != values.len() {
            return Err(IngestError::EmptySeries);
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(IngestError::NonMonotoneTimestamps {
                batch: String::new(),
                tag: String::new(),
            });
        }
        Ok(Self { times, values })
    }

    pub fn from_pairs(pairs: &[(T, T)]) -> Result<Self, IngestError> {
        Self::new(
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Median spacing between consecutive samples, if there are at least two.
    pub fn median_interval(&self) -> Option<T> {
        if self.times.len() < 2 {
            return None;
        }
        let d: Vec<T> = self.times.windows(2).map(|w| w[1] - w[0]).collect();
        Some(crate::scalar::median(&d))
    }
}

/// A recipe stage delimited by automation triggers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PhaseEvent<T> {
    pub name: String,
    pub order: usize,
    pub start: T,
    pub end: T,
}

impl<T: Real> PhaseEvent<T> {
    pub fn duration(&self) -> T {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BatchRecord<T> {
    pub batch_id: String,
    /// Absolute start in the source clock (seconds), used for chronological ordering.
    pub absolute_start: f64,
    pub series: BTreeMap<String, Series<T>>,
    pub phases: Vec<PhaseEvent<T>>,
}

/// Contiguity slack when comparing one phase's end against the next one's start.
fn phase_tolerance<T: Real>(span: T) -> T {
    T::lit(1e-9) * (T::one() + span.abs())
}

impl<T: Real> BatchRecord<T> {
    /// Builds a record, sorting phases by order and checking that they are
    /// contiguous, non-overlapping and numbered `0..P-1`, and that every sample
    /// lies inside the batch span.
    pub fn new(
        batch_id: impl Into<String>,
        series: BTreeMap<String, Series<T>>,
        mut phases: Vec<PhaseEvent<T>>,
    ) -> Result<Self, IngestError> {
        let batch_id = batch_id.into();
        if phases.is_empty() {
            return Err(IngestError::MissingEvents(batch_id));
        }
        phases.sort_by_key(|p| p.order);
        for (k, p) in phases.iter().enumerate() {
            if p.order != k {
                return Err(IngestError::PhaseOrderGap { batch: batch_id });
            }
            if !(p.end > p.start) {
                return Err(IngestError::OverlappingPhases {
                    batch: batch_id,
                    detail: format!("phase `{}` ends at or before its start", p.name),
                });
            }
        }
        let span = phases[phases.len() - 1].end - phases[0].start;
        let tol = phase_tolerance(span);
        for w in phases.windows(2) {
            if (w[0].end - w[1].start).abs() > tol {
                return Err(IngestError::OverlappingPhases {
                    batch: batch_id,
                    detail: format!(
                        "`{}` ends at {} but `{}` starts at {}",
                        w[0].name, w[0].end, w[1].name, w[1].start
                    ),
                });
            }
        }
        let (lo, hi) = (phases[0].start, phases[phases.len() - 1].end);
        for (tag, s) in &series {
            if s.times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(IngestError::NonMonotoneTimestamps {
                    batch: batch_id,
                    tag: tag.clone(),
                });
            }
            if let Some(t) = s.times.iter().find(|&&t| t < lo - tol || t > hi + tol) {
                return Err(IngestError::SampleOutsideBatch {
                    batch: batch_id,
                    tag: tag.clone(),
                    time: t.to_string(),
                });
            }
        }
        Ok(Self {
            batch_id,
            absolute_start: 0.0,
            series,
            phases,
        })
    }

    pub fn start(&self) -> T {
        self.phases[0].start
    }

    pub fn end(&self) -> T {
        self.phases[self.phases.len() - 1].end
    }

    pub fn duration(&self) -> T {
        self.end() - self.start()
    }

    pub fn phase_names(&self) -> Vec<&str> {
        self.phases.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn phase(&self, name: &str) -> Option<&PhaseEvent<T>> {
        self.phases.iter().find(|p| p.name == name)
    }

    /// Whether `t` belongs to phase `idx` under the half-open `[start, end)`
    /// convention, with the final phase closed on the right.
    pub fn in_phase(&self, idx: usize, t: T) -> bool {
        let p = &self.phases[idx];
        if idx + 1 == self.phases.len() {
            t >= p.start && t <= p.end
        } else {
            t >= p.start && t < p.end
        }
    }
}

/// The ragged I × J × N_i tensor plus per-batch Z and Y tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BatchDataset<T> {
    pub batches: Vec<BatchRecord<T>>,
    pub tags: Vec<String>,
    pub z_table: BTreeMap<String, BTreeMap<String, T>>,
    pub y_table: BTreeMap<String, BTreeMap<String, T>>,
    pub metadata: BTreeMap<String, BTreeMap<String, String>>,
    /// Non-fatal observations made while loading.
    pub notes: Vec<String>,
}

impl<T: Real> BatchDataset<T> {
    /// Assembles a dataset from already validated records. Batches are sorted
    /// by absolute start; the tag list is the sorted union over batches.
    pub fn new(
        mut batches: Vec<BatchRecord<T>>,
        z_table: BTreeMap<String, BTreeMap<String, T>>,
        y_table: BTreeMap<String, BTreeMap<String, T>>,
    ) -> Result<Self, IngestError> {
        let mut seen = BTreeSet::new();
        for b in &batches {
            if !seen.insert(b.batch_id.clone()) {
                return Err(IngestError::DuplicateBatch(b.batch_id.clone()));
            }
        }
        for (file, table) in [("Z", &z_table), ("Y", &y_table)] {
            if let Some(id) = table.keys().find(|id| !seen.contains(*id)) {
                return Err(IngestError::UnknownBatch {
                    file: file.to_string(),
                    batch: id.clone(),
                });
            }
        }
        batches.sort_by(|a, b| {
            a.absolute_start
                .partial_cmp(&b.absolute_start)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let tags: BTreeSet<String> = batches
            .iter()
            .flat_map(|b| b.series.keys().cloned())
            .collect();
        Ok(Self {
            batches,
            tags: tags.into_iter().collect(),
            z_table,
            y_table,
            metadata: BTreeMap::new(),
            notes: Vec::new(),
        })
    }

    pub fn batch(&self, id: &str) -> Option<&BatchRecord<T>> {
        self.batches.iter().find(|b| b.batch_id == id)
    }

    pub fn batch_ids(&self) -> Vec<String> {
        self.batches.iter().map(|b| b.batch_id.clone()).collect()
    }

    pub fn n_batches(&self) -> usize {
        self.batches.len()
    }

    /// Target values for `name` in batch order; `None` where a batch lacks it.
    pub fn y_column(&self, name: &str) -> Vec<Option<T>> {
        self.batches
            .iter()
            .map(|b| self.y_table.get(&b.batch_id).and_then(|m| m.get(name)).copied())
            .collect()
    }
}
