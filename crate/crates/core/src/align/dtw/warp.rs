use rayon::prelude::*;

use super::cost::dtw_cost_matrix;
use super::path::dtw_optimal_path;
use super::{Boundary, DtwConfig, GlobalBand, PathDiagnostics, WarpingPath};
use crate::align::{common_phase_sequence, native_samples, AlignError, AlignedBatchSet, AlignmentMethod, Samples};
use crate::ingest::{BatchDataset, BatchRecord, Grid};
use crate::scalar::Real;

/// Result of warping every batch onto a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct DtwAlignment<T> {
    pub reference: String,
    /// Successfully aligned batches (the reference included).
    pub aligned: AlignedBatchSet<T>,
    /// Paths in raw sample indices, in the order of `aligned.batch_ids`.
    pub paths: Vec<WarpingPath>,
    pub diagnostics: Vec<PathDiagnostics>,
    /// Batches that could not be aligned.
    pub failures: Vec<(String, AlignError)>,
}

/// Warps every batch onto the time index of `reference_id`.
///
/// Each reference sample `i` receives the mean of the query samples the path
/// maps to it; a query sample mapped to several reference samples is
/// repeated. With an open end, reference samples past the path's end are NaN.
/// Derivative variants only shape the distance: the warped values are the
/// raw samples, and a path found on the `(N-1) × (M-1)` derivative matrix is
/// shifted by one sample and anchored at `(0, 0)`.
pub fn dtw_align<T: Real>(
    dataset: &BatchDataset<T>,
    reference_id: &str,
    config: &DtwConfig,
) -> Result<DtwAlignment<T>, AlignError> {
    let reference = dataset
        .batch(reference_id)
        .ok_or_else(|| AlignError::UnknownBatch(reference_id.to_string()))?;
    let tags = &dataset.tags;
    let ref_samples = native_samples(reference, tags)?;
    // Surface configuration and reference problems once rather than per batch.
    align_pair(&ref_samples, &ref_samples, tags, config)?;

    let results: Vec<Result<(Samples<T>, WarpingPath), AlignError>> = dataset
        .batches
        .par_iter()
        .map(|b| {
            let q = native_samples(b, tags)?;
            let path = align_pair(&ref_samples, &q, tags, config)?;
            Ok((q, path))
        })
        .collect();

    let mut out = Assembler::new(ref_samples.len(), tags.clone());
    let mut failures = Vec::new();
    for (b, r) in dataset.batches.iter().zip(results) {
        match r {
            Ok((q, path)) => {
                let diag = PathDiagnostics::from_path(&b.batch_id, &path, Vec::new());
                out.push(&b.batch_id, &q, path, diag);
            }
            Err(e) => failures.push((b.batch_id.clone(), e)),
        }
    }
    out.finish(
        reference_id,
        AlignmentMethod::Dtw { reference: reference_id.to_string(), config: config.clone() },
        failures,
    )
}

/// Runs DTW separately inside every phase with closed boundaries and
/// concatenates the per-phase paths, so phase boundaries of every batch land
/// on the reference's boundary indices.
pub fn stagewise_dtw<T: Real>(
    dataset: &BatchDataset<T>,
    reference_id: &str,
    config: &DtwConfig,
) -> Result<DtwAlignment<T>, AlignError> {
    if matches!(config.global_band, GlobalBand::Envelope { .. }) {
        return Err(AlignError::InvalidConfig("an envelope band spans the whole batch; use it with whole-batch DTW".into()));
    }
    common_phase_sequence(&dataset.batches)?;
    let reference = dataset
        .batch(reference_id)
        .ok_or_else(|| AlignError::UnknownBatch(reference_id.to_string()))?;
    let tags = &dataset.tags;
    let phase_cfg = DtwConfig { boundary: Boundary::Closed, ..config.clone() };
    let ref_samples = native_samples(reference, tags)?;
    let ref_segments = phase_segments(reference, &ref_samples)?;
    for seg in &ref_segments {
        align_pair(seg, seg, tags, &phase_cfg)?;
    }

    let results: Vec<Result<(Samples<T>, WarpingPath, Vec<f64>), AlignError>> = dataset
        .batches
        .par_iter()
        .map(|b| {
            let q = native_samples(b, tags)?;
            let q_segments = phase_segments(b, &q)?;
            let (mut ro, mut qo) = (0, 0);
            let mut pairs = Vec::new();
            let mut costs = Vec::with_capacity(ref_segments.len());
            for (rs, qs) in ref_segments.iter().zip(&q_segments) {
                let p = align_pair(rs, qs, tags, &phase_cfg)?;
                pairs.extend(p.pairs.iter().map(|&(i, j)| (i + ro, j + qo)));
                costs.push(p.cumulative_cost);
                ro += rs.len();
                qo += qs.len();
            }
            let path = WarpingPath { pairs, cumulative_cost: costs.iter().sum(), n_ref: ro, n_query: qo };
            Ok((q, path, costs))
        })
        .collect();

    let mut out = Assembler::new(ref_samples.len(), tags.clone());
    let mut failures = Vec::new();
    for (b, r) in dataset.batches.iter().zip(results) {
        match r {
            Ok((q, path, costs)) => {
                let diag = PathDiagnostics::from_path(&b.batch_id, &path, costs);
                out.push(&b.batch_id, &q, path, diag);
            }
            Err(e) => failures.push((b.batch_id.clone(), e)),
        }
    }
    out.finish(
        reference_id,
        AlignmentMethod::StagewiseDtw { reference: reference_id.to_string(), config: config.clone() },
        failures,
    )
}

/// Path between two sample sets in raw sample indices.
fn align_pair<T: Real>(
    reference: &Samples<T>,
    query: &Samples<T>,
    tags: &[String],
    config: &DtwConfig,
) -> Result<WarpingPath, AlignError> {
    let cost = dtw_cost_matrix(reference, query, tags, config)?;
    let path = dtw_optimal_path(&cost, config.local_p, config.boundary)?;
    if !config.variant.is_derivative() {
        return Ok(path);
    }
    let mut pairs = Vec::with_capacity(path.pairs.len() + 1);
    pairs.push((0, 0));
    pairs.extend(path.pairs.iter().map(|&(i, j)| (i + 1, j + 1)));
    Ok(WarpingPath {
        pairs,
        cumulative_cost: path.cumulative_cost,
        n_ref: reference.len(),
        n_query: query.len(),
    })
}

fn phase_segments<T: Real>(batch: &BatchRecord<T>, samples: &Samples<T>) -> Result<Vec<Samples<T>>, AlignError> {
    let mut out = Vec::with_capacity(batch.phases.len());
    let mut k = 0;
    for p in 0..batch.phases.len() {
        let start = k;
        while k < samples.len() && batch.in_phase(p, samples.times[k]) {
            k += 1;
        }
        if k == start {
            return Err(AlignError::SeriesTooShort { needed: 1, got: 0 });
        }
        out.push(samples.slice(start..k));
    }
    Ok(out)
}

struct Assembler<T> {
    n_ref: usize,
    tags: Vec<String>,
    batch_ids: Vec<String>,
    values: Vec<Vec<Vec<T>>>,
    time_maps: Vec<Vec<T>>,
    paths: Vec<WarpingPath>,
    diagnostics: Vec<PathDiagnostics>,
}

impl<T: Real> Assembler<T> {
    fn new(n_ref: usize, tags: Vec<String>) -> Self {
        Self {
            n_ref,
            tags,
            batch_ids: Vec::new(),
            values: Vec::new(),
            time_maps: Vec::new(),
            paths: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    fn push(&mut self, id: &str, query: &Samples<T>, path: WarpingPath, diag: PathDiagnostics) {
        let mut sums = vec![vec![T::zero(); self.n_ref]; self.tags.len()];
        let mut tsum = vec![T::zero(); self.n_ref];
        let mut count = vec![0usize; self.n_ref];
        for &(i, j) in &path.pairs {
            for (s, v) in sums.iter_mut().zip(&query.values) {
                s[i] = s[i] + v[j];
            }
            tsum[i] = tsum[i] + query.times[j];
            count[i] += 1;
        }
        let div = |s: T, c: usize| if c == 0 { T::nan() } else { s / T::count(c) };
        self.values
            .push(sums.into_iter().map(|s| s.into_iter().zip(&count).map(|(s, &c)| div(s, c)).collect()).collect());
        self.time_maps.push(tsum.into_iter().zip(&count).map(|(s, &c)| div(s, c)).collect());
        self.batch_ids.push(id.to_string());
        self.paths.push(path);
        self.diagnostics.push(diag);
    }

    fn finish(
        self,
        reference: &str,
        method: AlignmentMethod,
        failures: Vec<(String, AlignError)>,
    ) -> Result<DtwAlignment<T>, AlignError> {
        let warnings = failures.iter().map(|(b, e)| format!("batch `{b}` not aligned: {e}")).collect();
        Ok(DtwAlignment {
            reference: reference.to_string(),
            aligned: AlignedBatchSet {
                grid: Grid::indices(self.n_ref)?,
                tags: self.tags,
                batch_ids: self.batch_ids,
                values: self.values,
                time_maps: self.time_maps,
                method,
                warnings,
            },
            paths: self.paths,
            diagnostics: self.diagnostics,
            failures,
        })
    }
}
