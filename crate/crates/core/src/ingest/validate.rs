use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BatchDataset;
use crate::scalar::Real;

/// Internal gaps longer than this multiple of the median sampling interval
/// are reported.
const LARGE_GAP_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageSide {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IssueKind {
    /// A tag present elsewhere in the dataset has no samples in this batch.
    MissingTag,
    /// Samples start late or stop early relative to the phase span by more
    /// than one median sampling interval.
    PhaseCoverageGap { side: CoverageSide, uncovered_seconds: f64 },
    /// An internal gap longer than five median intervals; resampling bridges
    /// it linearly.
    LargeGap { from: f64, to: f64 },
    /// A phase holds no samples of this tag.
    EmptyPhase { phase: String },
    MissingInitialConditions,
    MissingQuality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub batch_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    #[serde(flatten)]
    pub kind: IssueKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub batch_id: String,
    pub sample_counts: BTreeMap<String, usize>,
    pub n_phases: usize,
    pub duration_seconds: f64,
    pub has_initial_conditions: bool,
    pub has_quality: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
    pub summaries: Vec<BatchSummary>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    /// True when no issue was found. Summaries are informational.
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Reports data-quality problems per batch. Never fails.
///
/// Z and Y presence is only checked when the dataset carries any Z or Y data.
pub fn validate<T: Real>(dataset: &BatchDataset<T>) -> ValidationReport {
    let mut report = ValidationReport {
        notes: dataset.notes.clone(),
        ..Default::default()
    };
    let check_z = !dataset.z_table.is_empty();
    let check_y = !dataset.y_table.is_empty();
    for b in &dataset.batches {
        let issue = |tag: Option<&str>, kind| Issue {
            batch_id: b.batch_id.clone(),
            tag: tag.map(str::to_string),
            kind,
        };
        let mut counts = BTreeMap::new();
        for tag in &dataset.tags {
            let Some(s) = b.series.get(tag) else {
                report.issues.push(issue(Some(tag), IssueKind::MissingTag));
                counts.insert(tag.clone(), 0);
                continue;
            };
            counts.insert(tag.clone(), s.len());
            let (first, last) = (s.times[0], s.times[s.len() - 1]);
            let slack = s.median_interval().unwrap_or(T::zero());
            let head = first - b.start();
            let tail = b.end() - last;
            if head > slack {
                report.issues.push(issue(
                    Some(tag),
                    IssueKind::PhaseCoverageGap {
                        side: CoverageSide::Start,
                        uncovered_seconds: head.as_f64(),
                    },
                ));
            }
            if tail > slack {
                report.issues.push(issue(
                    Some(tag),
                    IssueKind::PhaseCoverageGap {
                        side: CoverageSide::End,
                        uncovered_seconds: tail.as_f64(),
                    },
                ));
            }
            if let Some(med) = s.median_interval() {
                let limit = med * T::lit(LARGE_GAP_FACTOR);
                for w in s.times.windows(2) {
                    if w[1] - w[0] > limit {
                        report.issues.push(issue(
                            Some(tag),
                            IssueKind::LargeGap {
                                from: w[0].as_f64(),
                                to: w[1].as_f64(),
                            },
                        ));
                    }
                }
            }
            for (pi, p) in b.phases.iter().enumerate() {
                if !s.times.iter().any(|&t| b.in_phase(pi, t)) {
                    report.issues.push(issue(
                        Some(tag),
                        IssueKind::EmptyPhase {
                            phase: p.name.clone(),
                        },
                    ));
                }
            }
        }
        let has_z = dataset.z_table.get(&b.batch_id).is_some_and(|m| !m.is_empty());
        let has_y = dataset.y_table.get(&b.batch_id).is_some_and(|m| !m.is_empty());
        if check_z && !has_z {
            report.issues.push(issue(None, IssueKind::MissingInitialConditions));
        }
        if check_y && !has_y {
            report.issues.push(issue(None, IssueKind::MissingQuality));
        }
        report.summaries.push(BatchSummary {
            batch_id: b.batch_id.clone(),
            sample_counts: counts,
            n_phases: b.phases.len(),
            duration_seconds: b.duration().as_f64(),
            has_initial_conditions: has_z,
            has_quality: has_y,
        });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{BatchRecord, PhaseEvent, Series};

    fn record(id: &str, tags: &[(&str, Vec<f64>)]) -> BatchRecord<f64> {
        let series = tags
            .iter()
            .map(|(t, times)| {
                let vals = times.iter().map(|x| x * 2.0).collect();
                (t.to_string(), Series::new(times.clone(), vals).unwrap())
            })
            .collect();
        let phases = vec![
            PhaseEvent { name: "a".into(), order: 0, start: 0.0, end: 5.0 },
            PhaseEvent { name: "b".into(), order: 1, start: 5.0, end: 10.0 },
        ];
        BatchRecord::new(id, series, phases).unwrap()
    }

    fn full() -> Vec<f64> {
        (0..=10).map(f64::from).collect()
    }

    #[test]
    fn conformant_dataset_gives_empty_report() {
        let ds = BatchDataset::new(
            vec![record("b1", &[("x", full()), ("torque", full())]), record("b2", &[("x", full()), ("torque", full())])],
            Default::default(),
            Default::default(),
        )
        .unwrap();
        let rep = validate(&ds);
        assert!(rep.is_empty(), "{:?}", rep.issues);
        assert_eq!(rep.summaries[0].sample_counts["x"], 11);
    }

    #[test]
    fn missing_tag_is_reported() {
        let ds = BatchDataset::new(
            vec![record("b1", &[("x", full()), ("torque", full())]), record("b2", &[("x", full())])],
            Default::default(),
            Default::default(),
        )
        .unwrap();
        let rep = validate(&ds);
        assert_eq!(
            rep.issues,
            vec![Issue { batch_id: "b2".into(), tag: Some("torque".into()), kind: IssueKind::MissingTag }]
        );
    }

    #[test]
    fn early_stop_is_a_coverage_gap() {
        let short: Vec<f64> = (0..=6).map(f64::from).collect();
        let ds = BatchDataset::new(vec![record("b1", &[("x", short)])], Default::default(), Default::default())
            .unwrap();
        let rep = validate(&ds);
        assert!(rep.issues.iter().any(|i| matches!(
            i.kind,
            IssueKind::PhaseCoverageGap { side: CoverageSide::End, uncovered_seconds } if uncovered_seconds == 4.0
        )));
    }

    #[test]
    fn long_internal_gap_and_missing_y() {
        let gappy = vec![0.0, 1.0, 2.0, 9.0, 10.0];
        let mut y = BTreeMap::new();
        y.insert("b1".to_string(), BTreeMap::from([("q".to_string(), 1.0)]));
        let ds = BatchDataset::new(
            vec![record("b1", &[("x", full())]), record("b2", &[("x", gappy)])],
            Default::default(),
            y,
        )
        .unwrap();
        let rep = validate(&ds);
        assert!(rep.issues.iter().any(|i| i.batch_id == "b2" && matches!(i.kind, IssueKind::LargeGap { .. })));
        assert!(rep.issues.iter().any(|i| i.batch_id == "b2" && i.kind == IssueKind::MissingQuality));
        assert!(!rep.issues.iter().any(|i| i.kind == IssueKind::MissingInitialConditions));
    }
}
