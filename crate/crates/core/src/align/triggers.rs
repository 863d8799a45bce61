use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{common_phase_sequence, AlignError, AlignedBatchSet, AlignmentMethod};
use crate::ingest::{resample::interp_linear, BatchDataset, Grid};
use crate::scalar::{median, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointsPerPhase {
    Uniform(usize),
    PerPhase(BTreeMap<String, usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhaseLengthMode {
    /// Every phase gets its configured number of points.
    #[default]
    Equal,
    /// The configured total is redistributed in proportion to each phase's
    /// median duration across batches (at least two points per phase).
    MedianDuration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerAlignmentConfig {
    pub points_per_phase: PointsPerPhase,
    pub phase_length_mode: PhaseLengthMode,
}

impl Default for TriggerAlignmentConfig {
    fn default() -> Self {
        Self {
            points_per_phase: PointsPerPhase::Uniform(100),
            phase_length_mode: PhaseLengthMode::Equal,
        }
    }
}

fn phase_points<T: Real>(
    dataset: &BatchDataset<T>,
    names: &[String],
    config: &TriggerAlignmentConfig,
) -> Result<Vec<usize>, AlignError> {
    let configured: Vec<usize> = names
        .iter()
        .map(|n| match &config.points_per_phase {
            PointsPerPhase::Uniform(k) => Ok(*k),
            PointsPerPhase::PerPhase(m) => m
                .get(n)
                .copied()
                .ok_or_else(|| AlignError::InvalidConfig(format!("no point count for phase `{n}`"))),
        })
        .collect::<Result<_, _>>()?;
    if let Some(k) = configured.iter().find(|&&k| k < 2) {
        return Err(AlignError::InvalidConfig(format!("phases need at least 2 points, got {k}")));
    }
    match config.phase_length_mode {
        PhaseLengthMode::Equal => Ok(configured),
        PhaseLengthMode::MedianDuration => {
            let total: usize = configured.iter().sum();
            let medians: Vec<f64> = (0..names.len())
                .map(|p| {
                    let d: Vec<T> = dataset.batches.iter().map(|b| b.phases[p].duration()).collect();
                    median(&d).as_f64()
                })
                .collect();
            let sum: f64 = medians.iter().sum();
            Ok(medians
                .iter()
                .map(|m| ((total as f64 * m / sum).round() as usize).max(2))
                .collect())
        }
    }
}

/// Phase-wise linear warping between automation triggers.
///
/// Phase `p` occupies grid indices `offset_p .. offset_p + n_p`; index
/// `offset_p` is the phase start in every batch. Inside a non-final phase,
/// index `offset_p + k` maps to `start + duration * k / n_p`; the final phase
/// uses `k / (n_p - 1)` so its last index lands on the batch end.
pub fn align_by_triggers<T: Real>(
    dataset: &BatchDataset<T>,
    config: &TriggerAlignmentConfig,
) -> Result<AlignedBatchSet<T>, AlignError> {
    let names = common_phase_sequence(&dataset.batches)?;
    let counts = phase_points(dataset, &names, config)?;
    let total: usize = counts.iter().sum();
    let grid = Grid::indices(total)?;
    let n_phases = names.len();

    let mut values = Vec::with_capacity(dataset.n_batches());
    let mut time_maps = Vec::with_capacity(dataset.n_batches());
    let mut warnings = Vec::new();
    for b in &dataset.batches {
        let mut times = Vec::with_capacity(total);
        for (p, &n_p) in counts.iter().enumerate() {
            let ph = &b.phases[p];
            let denom = if p + 1 == n_phases { n_p - 1 } else { n_p };
            for k in 0..n_p {
                let frac = T::count(k) / T::count(denom);
                times.push(if p + 1 == n_phases && k == n_p - 1 {
                    ph.end
                } else {
                    ph.start + ph.duration() * frac
                });
            }
        }
        let mut per_tag = Vec::with_capacity(dataset.tags.len());
        for tag in &dataset.tags {
            let s = b.series.get(tag).ok_or_else(|| AlignError::MissingTag {
                batch: b.batch_id.clone(),
                tag: tag.clone(),
            })?;
            let (lo, hi) = (s.times[0], s.times[s.len() - 1]);
            let clamped = times.iter().filter(|&&t| t < lo || t > hi).count();
            if clamped > 0 {
                warnings.push(format!(
                    "batch `{}`, tag `{tag}`: {clamped} grid point(s) outside the sampled span were clamped",
                    b.batch_id
                ));
            }
            per_tag.push(times.iter().map(|&t| interp_linear(&s.times, &s.values, t)).collect());
        }
        values.push(per_tag);
        time_maps.push(times);
    }

    Ok(AlignedBatchSet {
        grid,
        tags: dataset.tags.clone(),
        batch_ids: dataset.batch_ids(),
        values,
        time_maps,
        method: AlignmentMethod::Triggers {
            config: config.clone(),
            points_per_phase: names.into_iter().zip(counts).collect(),
        },
        warnings,
    })
}
