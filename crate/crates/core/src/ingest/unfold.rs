use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::align::AlignedBatchSet;
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Batchwise-unfolded I × (J·N) matrix. Columns are tag-major, then grid index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct UnfoldedMatrix<T> {
    pub matrix: Matrix<T>,
    pub batch_ids: Vec<String>,
    /// `(tag, grid index)` per column.
    pub columns: Vec<(String, usize)>,
}

pub fn unfold_batchwise<T: Real>(aligned: &AlignedBatchSet<T>) -> Result<UnfoldedMatrix<T>, IngestError> {
    let n = aligned.grid.len();
    let j = aligned.tags.len();
    if aligned.values.len() != aligned.batch_ids.len()
        || aligned
            .values
            .iter()
            .any(|b| b.len() != j || b.iter().any(|s| s.len() != n))
    {
        return Err(IngestError::HeterogeneousGrids);
    }
    let mut data = Vec::with_capacity(aligned.values.len() * j * n);
    for batch in &aligned.values {
        for series in batch {
            data.extend_from_slice(series);
        }
    }
    let columns = aligned
        .tags
        .iter()
        .flat_map(|t| (0..n).map(move |k| (t.clone(), k)))
        .collect();
    Ok(UnfoldedMatrix {
        matrix: Matrix::from_row_major(aligned.values.len(), j * n, data),
        batch_ids: aligned.batch_ids.clone(),
        columns,
    })
}

/// Inverse of [`unfold_batchwise`]: returns `[batch][tag][grid]` values.
pub fn fold_batchwise<T: Real>(unfolded: &UnfoldedMatrix<T>, n_tags: usize) -> Result<Vec<Vec<Vec<T>>>, IngestError> {
    let cols = unfolded.matrix.ncols();
    if n_tags == 0 || cols % n_tags != 0 {
        return Err(IngestError::HeterogeneousGrids);
    }
    let n = cols / n_tags;
    Ok((0..unfolded.matrix.nrows())
        .map(|i| {
            unfolded
                .matrix
                .row(i)
                .chunks(n)
                .map(<[T]>::to_vec)
                .collect()
        })
        .collect())
}
