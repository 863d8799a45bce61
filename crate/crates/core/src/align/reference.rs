use super::AlignError;
use crate::ingest::BatchDataset;
use crate::scalar::Real;

/// Picks the eligible batch of median total duration (lower median for an
/// even count). Batches listed in `exclude` are skipped.
pub fn select_reference<T: Real>(dataset: &BatchDataset<T>, exclude: &[String]) -> Result<String, AlignError> {
    let mut eligible: Vec<(T, &str)> = dataset
        .batches
        .iter()
        .filter(|b| !exclude.contains(&b.batch_id))
        .map(|b| (b.duration(), b.batch_id.as_str()))
        .collect();
    if eligible.is_empty() {
        return Err(AlignError::NoEligibleBatch);
    }
    eligible.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(b.1)));
    Ok(eligible[(eligible.len() - 1) / 2].1.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{BatchRecord, PhaseEvent, Series};
    use std::collections::BTreeMap;

    fn ds(durations: &[f64]) -> BatchDataset<f64> {
        let batches = durations
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                let s = Series::new(vec![0.0, d], vec![0.0, 1.0]).unwrap();
                BatchRecord::new(
                    format!("b{k}"),
                    BTreeMap::from([("x".to_string(), s)]),
                    vec![PhaseEvent { name: "p".into(), order: 0, start: 0.0, end: d }],
                )
                .unwrap()
            })
            .collect();
        BatchDataset::new(batches, Default::default(), Default::default()).unwrap()
    }

    #[test]
    fn odd_and_even_counts() {
        assert_eq!(select_reference(&ds(&[14.0, 10.0, 12.0]), &[]).unwrap(), "b2");
        assert_eq!(select_reference(&ds(&[10.0, 12.0, 14.0, 16.0]), &[]).unwrap(), "b1");
    }

    #[test]
    fn excluded_median_is_skipped() {
        let durations: Vec<f64> = (10..=20).map(f64::from).collect();
        let d = ds(&durations);
        assert_eq!(select_reference(&d, &[]).unwrap(), "b5");
        // Remaining {10..14, 16..20}: ten values, lower median is 14.
        assert_eq!(select_reference(&d, &["b5".to_string()]).unwrap(), "b4");
    }

    #[test]
    fn nothing_eligible() {
        let d = ds(&[1.0]);
        assert_eq!(select_reference(&d, &["b0".to_string()]), Err(AlignError::NoEligibleBatch));
    }
}
