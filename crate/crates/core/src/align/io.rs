use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{AlignError, AlignedBatchSet, AlignmentMethod, PathDiagnostics, WarpingPath};
use crate::ingest::{Grid, IngestError};
use crate::scalar::Real;

/// JSON companion of an aligned CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSidecar {
    pub method: AlignmentMethod,
    pub reference: Option<String>,
    /// How a composite local-constraint step is costed.
    pub composite_step_cost: String,
    pub grid: Vec<f64>,
    pub batch_ids: Vec<String>,
    /// NaN (unmapped) entries are stored as null.
    pub time_maps: Vec<Vec<Option<f64>>>,
    /// Per batch, `(reference index, query index)` pairs; empty for non-DTW methods.
    pub paths: BTreeMap<String, Vec<(usize, usize)>>,
    pub diagnostics: Vec<PathDiagnostics>,
    pub warnings: Vec<String>,
}

impl AlignmentSidecar {
    pub fn new<T: Real>(
        set: &AlignedBatchSet<T>,
        reference: Option<&str>,
        paths: &[WarpingPath],
        diagnostics: &[PathDiagnostics],
    ) -> Self {
        Self {
            method: set.method.clone(),
            reference: reference.map(str::to_string),
            composite_step_cost: "sum_of_traversed_cells".into(),
            grid: set.grid.points().iter().map(|v| v.as_f64()).collect(),
            batch_ids: set.batch_ids.clone(),
            time_maps: set
                .time_maps
                .iter()
                .map(|m| m.iter().map(|v| Some(v.as_f64()).filter(|x| !x.is_nan())).collect())
                .collect(),
            paths: set
                .batch_ids
                .iter()
                .zip(paths)
                .map(|(b, p)| (b.clone(), p.pairs.clone()))
                .collect(),
            diagnostics: diagnostics.to_vec(),
            warnings: set.warnings.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Row {
    batch_id: String,
    grid_index: usize,
    tag: String,
    value: String,
}

/// Writes long-format `batch_id,grid_index,tag,value` rows, batch-major then tag then grid index.
pub fn write_aligned_csv<T: Real, W: Write>(set: &AlignedBatchSet<T>, writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| IngestError::Io { path: "aligned csv".into(), message: e.to_string() };
    for (b, id) in set.batch_ids.iter().enumerate() {
        for (j, tag) in set.tags.iter().enumerate() {
            for (n, v) in set.values[b][j].iter().enumerate() {
                w.serialize(Row { batch_id: id.clone(), grid_index: n, tag: tag.clone(), value: v.to_string() })
                    .map_err(io)?;
            }
        }
    }
    w.flush().map_err(|e| IngestError::Io { path: "aligned csv".into(), message: e.to_string() })
}

/// Reads the CSV written by [`write_aligned_csv`]. Batches and tags keep
/// their order of first appearance. Without a sidecar the grid is the index
/// grid, the method is `Imported` and time maps are NaN.
pub fn read_aligned_csv<T: Real, R: Read>(
    reader: R,
    sidecar: Option<&AlignmentSidecar>,
) -> Result<AlignedBatchSet<T>, AlignError> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r
        .headers()
        .map_err(|e| IngestError::Io { path: FILE.into(), message: e.to_string() })?
        .clone();
    for col in ["batch_id", "grid_index", "tag", "value"] {
        if !headers.iter().any(|h| h == col) {
            return Err(IngestError::MissingColumn { file: FILE.into(), column: col.into() }.into());
        }
    }
    let mut batch_ids: Vec<String> = Vec::new();
    let mut tags: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), BTreeMap<usize, T>> = BTreeMap::new();
    for (line, rec) in r.deserialize::<Row>().enumerate() {
        let bad = |field: &str, value: String| IngestError::BadValue {
            file: FILE.into(),
            line: line as u64 + 2,
            field: field.into(),
            value,
        };
        let row = rec.map_err(|e| bad("row", e.to_string()))?;
        let value: T = row.value.trim().parse().map_err(|_| bad("value", row.value.clone()))?;
        let b = position_or_push(&mut batch_ids, &row.batch_id);
        let j = position_or_push(&mut tags, &row.tag);
        if cells.entry((b, j)).or_default().insert(row.grid_index, value).is_some() {
            return Err(IngestError::DuplicateSample {
                batch: row.batch_id,
                tag: row.tag,
                time: row.grid_index.to_string(),
            }
            .into());
        }
    }
    let n = cells.values().map(|m| m.len()).max().unwrap_or(0);
    let mut values = vec![vec![Vec::new(); tags.len()]; batch_ids.len()];
    for b in 0..batch_ids.len() {
        for j in 0..tags.len() {
            let m = cells.get(&(b, j)).ok_or(IngestError::HeterogeneousGrids)?;
            if m.len() != n || m.keys().copied().ne(0..n) {
                return Err(IngestError::HeterogeneousGrids.into());
            }
            values[b][j] = m.values().copied().collect();
        }
    }
    let (grid, method, time_maps, warnings) = match sidecar {
        Some(s) => {
            if s.grid.len() != n || s.batch_ids != batch_ids {
                return Err(AlignError::InvalidConfig("sidecar does not match the aligned CSV".into()));
            }
            (
                Grid::new(s.grid.iter().map(|&v| T::lit(v)).collect())?,
                s.method.clone(),
                s.time_maps
                    .iter()
                    .map(|m| m.iter().map(|v| v.map_or(T::nan(), T::lit)).collect())
                    .collect(),
                s.warnings.clone(),
            )
        }
        None => (Grid::indices(n)?, AlignmentMethod::Imported, vec![vec![T::nan(); n]; batch_ids.len()], Vec::new()),
    };
    Ok(AlignedBatchSet { grid, tags, batch_ids, values, time_maps, method, warnings })
}

const FILE: &str = "aligned csv";

fn position_or_push(v: &mut Vec<String>, s: &str) -> usize {
    match v.iter().position(|x| x == s) {
        Some(k) => k,
        None => {
            v.push(s.to_string());
            v.len() - 1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> AlignedBatchSet<f64> {
        AlignedBatchSet {
            grid: Grid::indices(3).unwrap(),
            tags: vec!["t".into(), "a".into()],
            batch_ids: vec!["z".into(), "b".into()],
            values: vec![
                vec![vec![1.0, 2.5, -3.0], vec![0.1, 0.2, f64::NAN]],
                vec![vec![4.0, 5.0, 6.0], vec![1e-300, 2.0, 3.0]],
            ],
            time_maps: vec![vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 4.0]],
            method: AlignmentMethod::Imported,
            warnings: vec![],
        }
    }

    #[test]
    fn round_trip_with_sidecar() {
        let s = set();
        let mut buf = Vec::new();
        write_aligned_csv(&s, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("batch_id,grid_index,tag,value\nz,0,t,1\n"));
        let side = AlignmentSidecar::new(&s, None, &[], &[]);
        let back: AlignedBatchSet<f64> = read_aligned_csv(buf.as_slice(), Some(&side)).unwrap();
        assert_eq!(back.batch_ids, s.batch_ids);
        assert_eq!(back.tags, s.tags);
        assert_eq!(back.time_maps, s.time_maps);
        assert!(back.values[0][1][2].is_nan());
        assert_eq!(back.values[1], s.values[1]);
    }

    #[test]
    fn missing_cell_is_rejected() {
        let csv = "batch_id,grid_index,tag,value\na,0,x,1\na,1,x,2\nb,0,x,1\n";
        assert!(matches!(
            read_aligned_csv::<f64, _>(csv.as_bytes(), None),
            Err(AlignError::Ingest(IngestError::HeterogeneousGrids))
        ));
    }
}
