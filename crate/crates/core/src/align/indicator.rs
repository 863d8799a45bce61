use super::{AlignError, AlignedBatchSet, AlignmentMethod};
use crate::ingest::{resample::interp_linear, BatchDataset, Grid};
use crate::scalar::Real;

/// Re-parameterizes every batch by a monotone progress variable.
///
/// The indicator's direction is taken from its net change. Reversals (drops
/// below the running extreme) up to `tolerance` of the indicator's range are
/// removed by taking the running maximum (or minimum); larger reversals are
/// an error. Grid index `k` corresponds to the `k`-th of `n_points` equally
/// spaced indicator levels spanning the range common to all batches, and
/// every tag is sampled at the time the indicator first reaches that level.
pub fn align_by_indicator<T: Real>(
    dataset: &BatchDataset<T>,
    indicator_tag: &str,
    n_points: usize,
    tolerance: f64,
) -> Result<AlignedBatchSet<T>, AlignError> {
    if n_points < 2 {
        return Err(AlignError::InvalidConfig("indicator alignment needs at least 2 points".into()));
    }
    if !(tolerance >= 0.0) {
        return Err(AlignError::InvalidConfig("tolerance must be >= 0".into()));
    }
    let tol = T::lit(tolerance);

    // Monotone, direction-normalized (increasing) indicator per batch.
    let mut curves = Vec::with_capacity(dataset.n_batches());
    let mut direction = None;
    for b in &dataset.batches {
        let s = b.series.get(indicator_tag).ok_or_else(|| AlignError::MissingTag {
            batch: b.batch_id.clone(),
            tag: indicator_tag.to_string(),
        })?;
        if s.len() < 2 {
            return Err(AlignError::SeriesTooShort { needed: 2, got: s.len() });
        }
        let net = s.values[s.len() - 1] - s.values[0];
        let up = net >= T::zero();
        match direction {
            None => direction = Some(up),
            Some(d) if d != up => return Err(AlignError::IncompatibleEndpoints(b.batch_id.clone())),
            _ => {}
        }
        let sign = if up { T::one() } else { -T::one() };
        let oriented: Vec<T> = s.values.iter().map(|&v| v * sign).collect();
        let range = oriented.iter().fold(T::neg_infinity(), |a, &v| a.max(v))
            - oriented.iter().fold(T::infinity(), |a, &v| a.min(v));
        if !(range > T::zero()) {
            return Err(AlignError::IncompatibleEndpoints(b.batch_id.clone()));
        }
        let mut run = oriented[0];
        let mut worst = T::zero();
        let mut mono = Vec::with_capacity(oriented.len());
        for &v in &oriented {
            run = run.max(v);
            worst = worst.max(run - v);
            mono.push(run);
        }
        let reversal = worst / range;
        if reversal > tol {
            return Err(AlignError::NonMonotoneIndicator {
                batch: b.batch_id.clone(),
                reversal: reversal.as_f64(),
            });
        }
        curves.push((s.times.clone(), mono));
    }
    let up = direction.unwrap_or(true);

    let lo = curves.iter().map(|c| c.1[0]).fold(T::neg_infinity(), T::max);
    let hi = curves.iter().map(|c| c.1[c.1.len() - 1]).fold(T::infinity(), T::min);
    if !(hi > lo) {
        return Err(AlignError::IncompatibleEndpoints(dataset.batches[0].batch_id.clone()));
    }
    let span = hi - lo;
    for (b, (_, mono)) in dataset.batches.iter().zip(&curves) {
        let start_off = (mono[0] - lo).abs();
        let end_off = (mono[mono.len() - 1] - hi).abs();
        if start_off > tol * span || end_off > tol * span {
            return Err(AlignError::IncompatibleEndpoints(b.batch_id.clone()));
        }
    }

    let levels = Grid::linspace(lo, hi, n_points)?;
    let grid = Grid::indices(n_points)?;
    let mut values = Vec::with_capacity(dataset.n_batches());
    let mut time_maps = Vec::with_capacity(dataset.n_batches());
    for (b, (times, mono)) in dataset.batches.iter().zip(&curves) {
        let crossing: Vec<T> = levels.points().iter().map(|&g| first_crossing(times, mono, g)).collect();
        let mut per_tag = Vec::with_capacity(dataset.tags.len());
        for tag in &dataset.tags {
            let s = b.series.get(tag).ok_or_else(|| AlignError::MissingTag {
                batch: b.batch_id.clone(),
                tag: tag.clone(),
            })?;
            per_tag.push(crossing.iter().map(|&t| interp_linear(&s.times, &s.values, t)).collect());
        }
        values.push(per_tag);
        time_maps.push(crossing);
    }

    let sign = if up { 1.0 } else { -1.0 };
    Ok(AlignedBatchSet {
        grid,
        tags: dataset.tags.clone(),
        batch_ids: dataset.batch_ids(),
        values,
        time_maps,
        method: AlignmentMethod::Indicator {
            tag: indicator_tag.to_string(),
            n_points,
            tolerance,
            levels: levels.points().iter().map(|v| v.as_f64() * sign).collect(),
        },
        warnings: Vec::new(),
    })
}

/// Time at which a non-decreasing curve first reaches `level`.
fn first_crossing<T: Real>(times: &[T], mono: &[T], level: T) -> T {
    if level <= mono[0] {
        return times[0];
    }
    let k = mono.partition_point(|&m| m < level);
    if k >= mono.len() {
        return times[times.len() - 1];
    }
    let (m0, m1) = (mono[k - 1], mono[k]);
    let w = (level - m0) / (m1 - m0);
    times[k - 1] + w * (times[k] - times[k - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{resample_to_grid, BatchRecord, PhaseEvent, ResampleMethod, Series};
    use std::collections::BTreeMap;

    fn batch(id: &str, times: Vec<f64>, tags: Vec<(&str, Vec<f64>)>) -> BatchRecord<f64> {
        let end = *times.last().unwrap();
        let series = tags
            .into_iter()
            .map(|(t, v)| (t.to_string(), Series::new(times.clone(), v).unwrap()))
            .collect::<BTreeMap<_, _>>();
        BatchRecord::new(id, series, vec![PhaseEvent { name: "run".into(), order: 0, start: 0.0, end }]).unwrap()
    }

    fn ds(b: Vec<BatchRecord<f64>>) -> BatchDataset<f64> {
        BatchDataset::new(b, Default::default(), Default::default()).unwrap()
    }

    #[test]
    fn time_as_indicator_is_plain_resampling() {
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let y: Vec<f64> = times.iter().map(|t| (t * 0.7).sin()).collect();
        let d = ds(vec![batch("a", times.clone(), vec![("clock", times.clone()), ("y", y.clone())])]);
        let out = align_by_indicator(&d, "clock", 33, 0.01).unwrap();
        let grid = Grid::linspace(0.0, 10.0, 33).unwrap();
        let plain = resample_to_grid(&Series::new(times, y).unwrap(), &grid, ResampleMethod::Linear).unwrap();
        let yi = out.tag_index("y").unwrap();
        for (a, b) in out.values[0][yi].iter().zip(&plain) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn double_speed_batches_align_identically() {
        // Batch A: indicator t/10 over 10 s; batch B: t/5 over 5 s.
        let ta: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let tb: Vec<f64> = (0..=100).map(|k| k as f64 * 0.05).collect();
        let ia: Vec<f64> = ta.iter().map(|t| t / 10.0).collect();
        let ib: Vec<f64> = tb.iter().map(|t| t / 5.0).collect();
        let d = ds(vec![
            batch("a", ta, vec![("ind", ia.clone()), ("copy", ia)]),
            batch("b", tb, vec![("ind", ib.clone()), ("copy", ib)]),
        ]);
        let out = align_by_indicator(&d, "ind", 41, 0.01).unwrap();
        let c = out.tag_index("copy").unwrap();
        for k in 0..41 {
            assert!((out.values[0][c][k] - out.values[1][c][k]).abs() < 1e-12);
            assert!((out.values[0][c][k] - k as f64 / 40.0).abs() < 1e-12);
        }
        assert!((out.time_maps[0][20] - 2.0 * out.time_maps[1][20]).abs() < 1e-12);
    }

    #[test]
    fn large_reversal_is_rejected() {
        let t: Vec<f64> = (0..=10).map(f64::from).collect();
        let ind = vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.4, 0.6, 0.8, 0.9, 1.0];
        let d = ds(vec![batch("a", t, vec![("ind", ind)])]);
        match align_by_indicator(&d, "ind", 10, 0.01) {
            Err(AlignError::NonMonotoneIndicator { reversal, .. }) => assert!((reversal - 0.1).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decreasing_indicator_and_endpoint_check() {
        let t: Vec<f64> = (0..=10).map(f64::from).collect();
        let down: Vec<f64> = t.iter().map(|x| 1.0 - x / 10.0).collect();
        let short: Vec<f64> = t.iter().map(|x| 1.0 - x / 20.0).collect();
        let d = ds(vec![batch("a", t.clone(), vec![("ind", down.clone())])]);
        let out = align_by_indicator(&d, "ind", 11, 0.01).unwrap();
        assert!((out.time_maps[0][5] - 5.0).abs() < 1e-12);
        let d = ds(vec![batch("a", t.clone(), vec![("ind", down)]), batch("b", t, vec![("ind", short)])]);
        assert!(matches!(align_by_indicator(&d, "ind", 11, 0.01), Err(AlignError::IncompatibleEndpoints(_))));
    }
}
