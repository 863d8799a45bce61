use serde::{Deserialize, Serialize};

use super::{Grid, IngestError, Series};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    Linear,
    /// Zero-order hold: the last sample at or before each grid point.
    Previous,
}

/// Evaluates a series on `grid`. Grid points outside the sampled span take
/// the nearest endpoint value; use [`count_outside_span`] to report them.
pub fn resample_to_grid<T: Real>(
    series: &Series<T>,
    grid: &Grid<T>,
    method: ResampleMethod,
) -> Result<Vec<T>, IngestError> {
    resample_at(&series.times, &series.values, grid.points(), method)
}

/// Number of grid points that fall outside `[first, last]` sample time.
pub fn count_outside_span<T: Real>(series: &Series<T>, grid: &Grid<T>) -> usize {
    match (series.times.first(), series.times.last()) {
        (Some(&lo), Some(&hi)) => grid.points().iter().filter(|&&g| g < lo || g > hi).count(),
        _ => grid.len(),
    }
}

pub(crate) fn resample_at<T: Real>(
    times: &[T],
    values: &[T],
    at: &[T],
    method: ResampleMethod,
) -> Result<Vec<T>, IngestError> {
    match times.len() {
        0 => return Err(IngestError::EmptySeries),
        1 => return Err(IngestError::SinglePointSeries),
        _ => {}
    }
    let n = times.len();
    Ok(at
        .iter()
        .map(|&g| {
            if g <= times[0] {
                return values[0];
            }
            if g >= times[n - 1] {
                return values[n - 1];
            }
            // Largest k with times[k] <= g.
            let k = times.partition_point(|&t| t <= g) - 1;
            match method {
                ResampleMethod::Previous => values[k],
                ResampleMethod::Linear => {
                    let w = (g - times[k]) / (times[k + 1] - times[k]);
                    values[k] + w * (values[k + 1] - values[k])
                }
            }
        })
        .collect())
}

/// Linear interpolation at a single point with endpoint clamping.
pub(crate) fn interp_linear<T: Real>(times: &[T], values: &[T], g: T) -> T {
    let n = times.len();
    if n == 1 || g <= times[0] {
        return values[0];
    }
    if g >= times[n - 1] {
        return values[n - 1];
    }
    let k = times.partition_point(|&t| t <= g) - 1;
    let w = (g - times[k]) / (times[k + 1] - times[k]);
    values[k] + w * (values[k + 1] - values[k])
}
