use serde::{Deserialize, Serialize};

use super::{GlobalBand, WarpingPath};
use crate::align::AlignError;

/// Inclusive query-index range `[lo, hi]` allowed at each reference index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Band {
    pub ranges: Vec<(usize, usize)>,
}

impl Band {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.ranges.get(i).is_some_and(|&(lo, hi)| lo <= j && j <= hi)
    }

    /// Whether every pair of `path` lies inside the band.
    pub fn admits(&self, path: &WarpingPath) -> bool {
        path.pairs.iter().all(|&(i, j)| self.contains(i, j))
    }
}

/// Hull of the cells visited by `paths` at each reference index, widened so
/// that the lower and upper edges are both non-decreasing. Reference indices
/// no path reaches (open-end paths) inherit the closure of their neighbours.
pub fn envelope_band(paths: &[WarpingPath]) -> Result<Band, AlignError> {
    let Some(first) = paths.first() else {
        return Err(AlignError::EmptyPathSet);
    };
    let n = first.n_ref;
    if n == 0 || paths.iter().any(|p| p.n_ref != n) {
        return Err(AlignError::EmptyPathSet);
    }
    let mut lo = vec![usize::MAX; n];
    let mut hi = vec![0usize; n];
    let mut seen = vec![false; n];
    for p in paths {
        for &(i, j) in &p.pairs {
            lo[i] = lo[i].min(j);
            hi[i] = hi[i].max(j);
            seen[i] = true;
        }
    }
    // Running max of the upper edge from the left, running min of the lower edge from the right.
    let mut run = 0;
    for i in 0..n {
        if seen[i] {
            run = run.max(hi[i]);
        }
        hi[i] = run;
    }
    let max_q = paths.iter().map(|p| p.n_query.saturating_sub(1)).max().unwrap_or(0);
    let mut run = max_q;
    for i in (0..n).rev() {
        if seen[i] {
            run = run.min(lo[i]);
        }
        lo[i] = run.min(hi[i]);
    }
    Ok(Band { ranges: lo.into_iter().zip(hi).collect() })
}

/// Feasible query range for each reference row of an `n × m` matrix.
/// `shift` re-indexes an envelope built on raw samples for a derivative
/// matrix, whose cell `(i, j)` stands for raw cell `(i + 1, j + 1)`.
pub(crate) fn row_ranges(
    band: &GlobalBand,
    n: usize,
    m: usize,
    shift: usize,
) -> Result<Option<Vec<(usize, usize)>>, AlignError> {
    match band {
        GlobalBand::None => Ok(None),
        GlobalBand::SakoeChiba { width } => {
            let slope = if n > 1 { (m as f64 - 1.0) / (n as f64 - 1.0) } else { 0.0 };
            let w = *width as f64;
            Ok(Some(
                (0..n)
                    .map(|i| {
                        let c = i as f64 * slope;
                        let lo = (c - w - 1e-9).ceil().max(0.0) as usize;
                        let hi = ((c + w + 1e-9).floor() as usize).min(m - 1);
                        (lo, hi)
                    })
                    .collect(),
            ))
        }
        GlobalBand::Itakura => {
            let (ni, mi) = (n as i64 - 1, m as i64 - 1);
            Ok(Some(
                (0..n as i64)
                    .map(|i| {
                        // j ≤ 2i, 2j ≥ i, and the same from the far corner.
                        let hi = (2 * i).min(mi - (ni - i + 1) / 2).min(mi);
                        let lo = ((i + 1) / 2).max(mi - 2 * (ni - i)).max(0);
                        if hi < lo {
                            (1, 0)
                        } else {
                            (lo as usize, hi as usize)
                        }
                    })
                    .collect(),
            ))
        }
        GlobalBand::Envelope { band } => {
            if band.len() != n + shift {
                return Err(AlignError::InvalidConfig(format!(
                    "envelope band covers {} reference samples, reference has {}",
                    band.len(),
                    n + shift
                )));
            }
            Ok(Some(
                band.ranges[shift..]
                    .iter()
                    .map(|&(lo, hi)| {
                        let lo = lo.saturating_sub(shift);
                        let hi = hi.saturating_sub(shift).min(m.saturating_sub(1));
                        if hi < lo {
                            (1, 0)
                        } else {
                            (lo, hi)
                        }
                    })
                    .collect(),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(pairs: Vec<(usize, usize)>) -> WarpingPath {
        let n_ref = pairs.iter().map(|p| p.0).max().unwrap() + 1;
        let n_query = pairs.iter().map(|p| p.1).max().unwrap() + 1;
        WarpingPath { pairs, cumulative_cost: 0.0, n_ref, n_query }
    }

    #[test]
    fn diagonal_gives_zero_width() {
        let b = envelope_band(&[path((0..6).map(|k| (k, k)).collect())]).unwrap();
        assert_eq!(b.ranges, (0..6).map(|k| (k, k)).collect::<Vec<_>>());
    }

    #[test]
    fn hull_contains_both_sides() {
        let above = path(vec![(0, 0), (0, 1), (1, 2), (2, 3), (3, 3)]);
        let below = path(vec![(0, 0), (1, 0), (2, 1), (3, 2), (3, 3)]);
        let b = envelope_band(&[above.clone(), below.clone()]).unwrap();
        assert!(b.admits(&above) && b.admits(&below));
        assert_eq!(b.ranges[1], (0, 2));
    }

    #[test]
    fn no_paths() {
        assert_eq!(envelope_band(&[]), Err(AlignError::EmptyPathSet));
    }

    #[test]
    fn sakoe_chiba_width_zero_is_diagonal() {
        let r = row_ranges(&GlobalBand::SakoeChiba { width: 0 }, 5, 5, 0).unwrap().unwrap();
        assert_eq!(r, (0..5).map(|k| (k, k)).collect::<Vec<_>>());
    }

    #[test]
    fn itakura_is_a_parallelogram() {
        let r = row_ranges(&GlobalBand::Itakura, 7, 7, 0).unwrap().unwrap();
        assert_eq!(r[0], (0, 0));
        assert_eq!(r[6], (6, 6));
        for (i, &(lo, hi)) in r.iter().enumerate() {
            for j in lo..=hi {
                let (i, j) = (i as i64, j as i64);
                assert!(j <= 2 * i && 2 * j >= i);
                assert!(6 - j <= 2 * (6 - i) && 2 * (6 - j) >= 6 - i);
            }
        }
        assert_eq!(r[3], (2, 4));
    }
}
