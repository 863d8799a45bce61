use serde::{Deserialize, Serialize};

use super::{dtw_align, DtwConfig};
use crate::align::AlignError;
use crate::ingest::BatchDataset;
use crate::scalar::Real;

/// Objective value of each candidate `P`; `None` marks an infeasible candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PSelection {
    pub p: usize,
    pub lambda: f64,
    pub table: Vec<(usize, Option<f64>)>,
}

/// Chooses the local constraint order minimizing, averaged over the
/// non-reference batches, the per-step path cost plus `lambda` times the
/// time distortion `mean |i/N_ref - j/N_query|`. A candidate is infeasible
/// when any batch fails to align; ties go to the smallest `P`.
pub fn choose_local_p<T: Real>(
    dataset: &BatchDataset<T>,
    reference_id: &str,
    config: &DtwConfig,
    candidates: &[usize],
    lambda: f64,
) -> Result<PSelection, AlignError> {
    if candidates.len() < 2 {
        return Err(AlignError::InvalidConfig("need at least two candidate values of P".into()));
    }
    if !(lambda >= 0.0) {
        return Err(AlignError::InvalidConfig("lambda must be >= 0".into()));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut table = Vec::with_capacity(sorted.len());
    let mut best: Option<(usize, f64)> = None;
    for &p in &sorted {
        let cfg = DtwConfig { local_p: p, ..config.clone() };
        let objective = match dtw_align(dataset, reference_id, &cfg) {
            Ok(a) if a.failures.is_empty() => {
                let scores: Vec<f64> = a
                    .aligned
                    .batch_ids
                    .iter()
                    .zip(&a.paths)
                    .filter(|(id, _)| *id != reference_id || a.paths.len() == 1)
                    .map(|(_, path)| path.normalized_cost() + lambda * path.distortion())
                    .collect();
                Some(scores.iter().sum::<f64>() / scores.len() as f64)
            }
            Ok(_) | Err(AlignError::NoFeasiblePath) => None,
            Err(e) => return Err(e),
        };
        if let Some(v) = objective {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((p, v));
            }
        }
        table.push((p, objective));
    }
    let (p, _) = best.ok_or(AlignError::AllCandidatesInfeasible)?;
    Ok(PSelection { p, lambda, table })
}
