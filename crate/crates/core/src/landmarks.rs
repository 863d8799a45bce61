//! Per-phase scalar summaries ("landmarks") and phase-duration KPIs.
//!
//! Feature columns are named `tag|phase|transform|statistic`; the whole-batch
//! scope uses the phase label `batch`. Durations are `duration|<phase>` and
//! `duration|total`. Cells that cannot be computed are masked (`None`).

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{resample::interp_linear, BatchDataset, BatchRecord, Series};
use crate::scalar::{mean, median, sample_std, Real};

pub const WHOLE_BATCH: &str = "batch";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("feature spec needs at least one statistic and one transform")]
    EmptySpec,
    #[error("duplicate feature column `{0}`")]
    DuplicateColumn(String),
    #[error("feature matrices have different rows")]
    RowMismatch,
    #[error("feature csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    Max,
    Min,
    Range,
    Std,
    First,
    Last,
    Median,
    /// Median absolute deviation from the median (unscaled).
    Mad,
    /// Least-squares slope against time.
    Slope,
    /// Coefficient of variation `std / |mean|`; masked when `|mean| < 1e-12`.
    Cv,
}

impl Statistic {
    pub const ALL: [Statistic; 11] = [
        Statistic::Mean,
        Statistic::Max,
        Statistic::Min,
        Statistic::Range,
        Statistic::Std,
        Statistic::First,
        Statistic::Last,
        Statistic::Median,
        Statistic::Mad,
        Statistic::Slope,
        Statistic::Cv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Max => "max",
            Statistic::Min => "min",
            Statistic::Range => "range",
            Statistic::Std => "std",
            Statistic::First => "first",
            Statistic::Last => "last",
            Statistic::Median => "median",
            Statistic::Mad => "mad",
            Statistic::Slope => "slope",
            Statistic::Cv => "cv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Raw,
    /// First differences divided by the sample spacing, placed at interval midpoints.
    Derivative,
    /// Running integral (trapezoid rule on the linear interpolant, value·seconds)
    /// from the start of the scope, sampled at in-scope times and at the scope end.
    Integral,
}

impl Transform {
    pub fn name(self) -> &'static str {
        match self {
            Transform::Raw => "raw",
            Transform::Derivative => "derivative",
            Transform::Integral => "integral",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub statistics: Vec<Statistic>,
    pub transforms: Vec<Transform>,
    pub per_phase: bool,
    pub whole_batch: bool,
    /// Restrict to these tags; `None` uses every tag.
    pub tags: Option<Vec<String>>,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            statistics: vec![
                Statistic::Mean,
                Statistic::Max,
                Statistic::Min,
                Statistic::Range,
                Statistic::Std,
                Statistic::First,
                Statistic::Last,
                Statistic::Median,
                Statistic::Mad,
                Statistic::Slope,
            ],
            transforms: vec![Transform::Raw],
            per_phase: true,
            whole_batch: true,
            tags: None,
        }
    }
}

/// One row per batch; `values` is row-major with `None` for masked cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FeatureMatrix<T> {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Option<T>>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(rows: Vec<String>, columns: Vec<String>, values: Vec<Option<T>>) -> Result<Self, FeatureError> {
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c) {
                return Err(FeatureError::DuplicateColumn(c.clone()));
            }
        }
        assert_eq!(values.len(), rows.len() * columns.len(), "feature matrix shape");
        Ok(Self { rows, columns, values })
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<T> {
        self.values[row * self.columns.len() + col]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.rows.iter().position(|r| r == id)
    }

    /// Cell by batch id and column name.
    pub fn value(&self, row: &str, column: &str) -> Option<T> {
        self.get(self.row_index(row)?, self.column_index(column)?)
    }

    pub fn column(&self, col: usize) -> Vec<Option<T>> {
        (0..self.nrows()).map(|r| self.get(r, col)).collect()
    }

    pub fn n_masked(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Columns of `self` followed by those of `other`; rows must match in order.
    pub fn hstack(&self, other: &Self) -> Result<Self, FeatureError> {
        if self.rows != other.rows {
            return Err(FeatureError::RowMismatch);
        }
        let mut values = Vec::with_capacity(self.values.len() + other.values.len());
        for r in 0..self.nrows() {
            values.extend_from_slice(&self.values[r * self.ncols()..(r + 1) * self.ncols()]);
            values.extend_from_slice(&other.values[r * other.ncols()..(r + 1) * other.ncols()]);
        }
        let mut columns = self.columns.clone();
        columns.extend(other.columns.iter().cloned());
        Self::new(self.rows.clone(), columns, values)
    }

    /// CSV with a leading `batch_id` column; masked cells are empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| FeatureError::Csv(e.to_string());
        let mut header = vec!["batch_id".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(err)?;
        for (r, id) in self.rows.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend((0..self.ncols()).map(|c| self.get(r, c).map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| FeatureError::Csv(e.to_string()))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, FeatureError> {
        let mut r = csv::Reader::from_reader(reader);
        let err = |e: csv::Error| FeatureError::Csv(e.to_string());
        let header = r.headers().map_err(err)?.clone();
        if header.get(0) != Some("batch_id") {
            return Err(FeatureError::Csv("first column must be `batch_id`".into()));
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(err)?;
            rows.push(rec.get(0).unwrap_or_default().to_string());
            for cell in rec.iter().skip(1) {
                let cell = cell.trim();
                values.push(if cell.is_empty() {
                    None
                } else {
                    Some(cell.parse::<T>().map_err(|_| FeatureError::Csv(format!("bad number `{cell}`")))?)
                });
            }
        }
        Self::new(rows, columns, values)
    }
}

pub fn feature_name(tag: &str, phase: &str, transform: Transform, statistic: Statistic) -> String {
    format!("{tag}|{phase}|{}|{}", transform.name(), statistic.name())
}

/// Landmark features for every batch.
pub fn compute_landmarks<T: Real>(dataset: &BatchDataset<T>, spec: &FeatureSpec) -> Result<FeatureMatrix<T>, FeatureError> {
    if spec.statistics.is_empty() || spec.transforms.is_empty() || !(spec.per_phase || spec.whole_batch) {
        return Err(FeatureError::EmptySpec);
    }
    let tags: Vec<String> = spec.tags.clone().unwrap_or_else(|| dataset.tags.clone());
    let phases = phase_union(dataset);
    let mut scopes: Vec<Option<&str>> = Vec::new();
    if spec.per_phase {
        scopes.extend(phases.iter().map(|p| Some(p.as_str())));
    }
    if spec.whole_batch {
        scopes.push(None);
    }
    let mut columns = Vec::new();
    for tag in &tags {
        for scope in &scopes {
            for &tr in &spec.transforms {
                for &st in &spec.statistics {
                    columns.push(feature_name(tag, scope.unwrap_or(WHOLE_BATCH), tr, st));
                }
            }
        }
    }
    let rows: Vec<Vec<Option<T>>> = dataset
        .batches
        .par_iter()
        .map(|b| {
            let mut row = Vec::with_capacity(columns.len());
            for tag in &tags {
                for scope in &scopes {
                    let window = b.series.get(tag).and_then(|s| scope_window(b, s, *scope));
                    for &tr in &spec.transforms {
                        let sample = window.as_ref().map(|w| w.transformed(tr));
                        for &st in &spec.statistics {
                            row.push(sample.as_ref().and_then(|(t, v)| statistic(st, t, v)));
                        }
                    }
                }
            }
            row
        })
        .collect();
    FeatureMatrix::new(dataset.batch_ids(), columns, rows.into_iter().flatten().collect())
}

/// Per-phase durations plus the batch total, in seconds.
pub fn compute_durations<T: Real>(dataset: &BatchDataset<T>) -> FeatureMatrix<T> {
    let phases = phase_union(dataset);
    let mut columns: Vec<String> = phases.iter().map(|p| format!("duration|{p}")).collect();
    columns.push("duration|total".into());
    let mut values = Vec::with_capacity(dataset.n_batches() * columns.len());
    for b in &dataset.batches {
        let mut total = T::zero();
        for p in &phases {
            let d = b.phase(p).map(|ph| ph.duration());
            total = total + d.unwrap_or_else(T::zero);
            values.push(d);
        }
        values.push(Some(total));
    }
    FeatureMatrix::new(dataset.batch_ids(), columns, values).expect("phase names are unique")
}

/// Phase names in order of first appearance across batches.
fn phase_union<T: Real>(dataset: &BatchDataset<T>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for b in &dataset.batches {
        for p in &b.phases {
            if !out.contains(&p.name) {
                out.push(p.name.clone());
            }
        }
    }
    out
}

/// Samples of one tag inside one scope, with the full series kept for integration.
struct Window<'a, T> {
    series: &'a Series<T>,
    start: T,
    end: T,
    times: Vec<T>,
    values: Vec<T>,
}

fn scope_window<'a, T: Real>(b: &BatchRecord<T>, s: &'a Series<T>, scope: Option<&str>) -> Option<Window<'a, T>> {
    let (start, end, idx) = match scope {
        None => (b.start(), b.end(), None),
        Some(name) => {
            let k = b.phases.iter().position(|p| p.name == name)?;
            (b.phases[k].start, b.phases[k].end, Some(k))
        }
    };
    let (times, values): (Vec<T>, Vec<T>) = s
        .times
        .iter()
        .zip(&s.values)
        .filter(|(&t, _)| match idx {
            Some(k) => b.in_phase(k, t),
            None => true,
        })
        .map(|(&t, &v)| (t, v))
        .unzip();
    if times.is_empty() {
        return None;
    }
    Some(Window { series: s, start, end, times, values })
}

impl<T: Real> Window<'_, T> {
    fn transformed(&self, tr: Transform) -> (Vec<T>, Vec<T>) {
        match tr {
            Transform::Raw => (self.times.clone(), self.values.clone()),
            Transform::Derivative => {
                let two = T::lit(2.0);
                self.times
                    .windows(2)
                    .zip(self.values.windows(2))
                    .map(|(t, v)| ((t[0] + t[1]) / two, (v[1] - v[0]) / (t[1] - t[0])))
                    .unzip()
            }
            Transform::Integral => {
                let mut at = self.times.clone();
                if *at.last().unwrap() < self.end {
                    at.push(self.end);
                }
                let vals = at.iter().map(|&t| integral(self.series, self.start, t)).collect();
                (at, vals)
            }
        }
    }
}

/// Integral of the series' linear interpolant (clamped outside its span) over `[a, b]`.
fn integral<T: Real>(s: &Series<T>, a: T, b: T) -> T {
    if b <= a {
        return T::zero();
    }
    let f = |t: T| interp_linear(&s.times, &s.values, t);
    let half = T::lit(0.5);
    let mut knots = vec![a];
    knots.extend(s.times.iter().copied().filter(|&t| t > a && t < b));
    knots.push(b);
    knots
        .windows(2)
        .map(|w| (w[1] - w[0]) * (f(w[0]) + f(w[1])) * half)
        .sum()
}

fn statistic<T: Real>(st: Statistic, times: &[T], v: &[T]) -> Option<T> {
    if v.is_empty() {
        return None;
    }
    let max = || v.iter().copied().fold(T::neg_infinity(), T::max);
    let min = || v.iter().copied().fold(T::infinity(), T::min);
    let out = match st {
        Statistic::Mean => mean(v),
        Statistic::Max => max(),
        Statistic::Min => min(),
        Statistic::Range => max() - min(),
        Statistic::Std => {
            if v.len() < 2 {
                return None;
            }
            sample_std(v)
        }
        Statistic::First => v[0],
        Statistic::Last => v[v.len() - 1],
        Statistic::Median => median(v),
        Statistic::Mad => {
            let m = median(v);
            median(&v.iter().map(|&x| (x - m).abs()).collect::<Vec<_>>())
        }
        Statistic::Slope => {
            if v.len() < 2 {
                return None;
            }
            let (tm, vm) = (mean(times), mean(v));
            let (mut sxy, mut sxx) = (T::zero(), T::zero());
            for (&t, &x) in times.iter().zip(v) {
                sxy = sxy + (t - tm) * (x - vm);
                sxx = sxx + (t - tm) * (t - tm);
            }
            if !(sxx > T::zero()) {
                return None;
            }
            sxy / sxx
        }
        Statistic::Cv => {
            if v.len() < 2 {
                return None;
            }
            let m = mean(v);
            if m.abs() < T::lit(1e-12) {
                return None;
            }
            sample_std(v) / m.abs()
        }
    };
    out.is_finite().then_some(out)
}
