use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use super::{BatchDataset, BatchRecord, IngestError, PhaseEvent, Series};
use crate::scalar::Real;

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Keep unknown columns as per-batch metadata instead of rejecting them.
    pub lax_columns: bool,
}

const TRAJ_COLUMNS: [&str; 4] = ["batch_id", "timestamp", "tag", "value"];
const EVENT_COLUMNS: [&str; 5] = ["batch_id", "phase", "order", "start", "end"];
const SCALAR_COLUMNS: [&str; 3] = ["batch_id", "name", "value"];

/// Parses plain numeric seconds or an ISO-8601 timestamp into seconds.
pub fn parse_timestamp(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_micros() as f64 / 1e6);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp_micros() as f64 / 1e6);
        }
    }
    None
}

/// Loads a dataset from the long-format trajectory CSV, the phase-event CSV
/// and optional initial-condition (Z) and quality (Y) CSVs.
pub fn load_dataset<T: Real>(
    trajectories: &Path,
    events: &Path,
    z: Option<&Path>,
    y: Option<&Path>,
    options: &LoadOptions,
) -> Result<BatchDataset<T>, IngestError> {
    let open = |p: &Path| -> Result<File, IngestError> {
        File::open(p).map_err(|e| IngestError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        })
    };
    let z_file = z.map(open).transpose()?;
    let y_file = y.map(open).transpose()?;
    load_from_readers(open(trajectories)?, open(events)?, z_file, y_file, options)
}

struct Table {
    name: &'static str,
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
    extra: Vec<usize>,
}

impl Table {
    fn read<R: Read>(
        name: &'static str,
        reader: R,
        required: &[&str],
        options: &LoadOptions,
    ) -> Result<Self, IngestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_err(name, e))?
            .iter()
            .map(str::to_string)
            .collect();
        for col in required {
            if !headers.iter().any(|h| h == col) {
                return Err(IngestError::MissingColumn {
                    file: name.into(),
                    column: col.to_string(),
                });
            }
        }
        let mut extra = Vec::new();
        for (i, h) in headers.iter().enumerate() {
            if !required.contains(&h.as_str()) {
                if !options.lax_columns {
                    return Err(IngestError::UnknownColumn {
                        file: name.into(),
                        column: h.clone(),
                    });
                }
                extra.push(i);
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_err(name, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Self {
            name,
            headers,
            rows,
            extra,
        })
    }

    fn idx(&self, col: &str) -> usize {
        self.headers.iter().position(|h| h == col).expect("checked column")
    }
}

fn csv_err(file: &str, e: csv::Error) -> IngestError {
    IngestError::Io {
        path: file.to_string(),
        message: e.to_string(),
    }
}

fn bad(file: &str, line: u64, field: &str, value: &str) -> IngestError {
    IngestError::BadValue {
        file: file.into(),
        line,
        field: field.into(),
        value: value.into(),
    }
}

fn parse_num<T: Real>(file: &str, line: u64, field: &str, raw: &str) -> Result<T, IngestError> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .and_then(T::from_f64)
        .ok_or_else(|| bad(file, line, field, raw))
}

struct RawEvent {
    name: String,
    order: usize,
    start: f64,
    end: f64,
}

/// Reader-based variant of [`load_dataset`].
pub fn load_from_readers<T: Real, R1: Read, R2: Read, R3: Read, R4: Read>(
    trajectories: R1,
    events: R2,
    z: Option<R3>,
    y: Option<R4>,
    options: &LoadOptions,
) -> Result<BatchDataset<T>, IngestError> {
    let mut metadata: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();

    let ev = Table::read("events", events, &EVENT_COLUMNS, options)?;
    let (eb, ep, eo, es, ee) = (ev.idx("batch_id"), ev.idx("phase"), ev.idx("order"), ev.idx("start"), ev.idx("end"));
    let mut raw_events: BTreeMap<String, Vec<RawEvent>> = BTreeMap::new();
    for (line, rec) in &ev.rows {
        let batch = rec[eb].to_string();
        let order = rec[eo]
            .parse::<usize>()
            .map_err(|_| bad(ev.name, *line, "order", &rec[eo]))?;
        let start = parse_timestamp(&rec[es]).ok_or_else(|| bad(ev.name, *line, "start", &rec[es]))?;
        let end = parse_timestamp(&rec[ee]).ok_or_else(|| bad(ev.name, *line, "end", &rec[ee]))?;
        if end < start {
            return Err(IngestError::OverlappingPhases {
                batch,
                detail: format!("phase `{}` ends before it starts", &rec[ep]),
            });
        }
        collect_extra(&ev, rec, &batch, &mut metadata);
        raw_events.entry(batch).or_default().push(RawEvent {
            name: rec[ep].to_string(),
            order,
            start,
            end,
        });
    }

    let tr = Table::read("trajectories", trajectories, &TRAJ_COLUMNS, options)?;
    let (tb, tt, tg, tv) = (tr.idx("batch_id"), tr.idx("timestamp"), tr.idx("tag"), tr.idx("value"));
    let mut raw_series: BTreeMap<String, BTreeMap<String, Vec<(f64, T)>>> = BTreeMap::new();
    for (line, rec) in &tr.rows {
        let batch = rec[tb].to_string();
        let tag = rec[tg].to_string();
        let t = parse_timestamp(&rec[tt]).ok_or_else(|| bad(tr.name, *line, "timestamp", &rec[tt]))?;
        let v: T = parse_num(tr.name, *line, "value", &rec[tv])?;
        collect_extra(&tr, rec, &batch, &mut metadata);
        let samples = raw_series.entry(batch.clone()).or_default().entry(tag.clone()).or_default();
        if let Some(&(prev, _)) = samples.last() {
            if t == prev {
                return Err(IngestError::DuplicateSample {
                    batch,
                    tag,
                    time: rec[tt].to_string(),
                });
            }
            if t < prev {
                return Err(IngestError::NonMonotoneTimestamps { batch, tag });
            }
        }
        samples.push((t, v));
    }

    if let Some(b) = raw_events.keys().find(|b| !raw_series.contains_key(*b)) {
        return Err(IngestError::UnknownBatchInEvents(b.clone()));
    }
    if let Some(b) = raw_series.keys().find(|b| !raw_events.contains_key(*b)) {
        return Err(IngestError::MissingEvents(b.clone()));
    }

    let mut notes = Vec::new();
    let mut batches = Vec::with_capacity(raw_events.len());
    for (batch_id, mut evs) in raw_events {
        evs.sort_by_key(|e| e.order);
        let origin = evs.iter().map(|e| e.start).fold(f64::INFINITY, f64::min);
        let lo = evs.iter().map(|e| e.start).fold(f64::INFINITY, f64::min);
        let hi = evs.iter().map(|e| e.end).fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-9 * (1.0 + (hi - lo).abs());
        let phases: Vec<PhaseEvent<T>> = evs
            .iter()
            .map(|e| PhaseEvent {
                name: e.name.clone(),
                order: e.order,
                start: T::lit(e.start - origin),
                end: T::lit(e.end - origin),
            })
            .collect();
        let mut series = BTreeMap::new();
        for (tag, samples) in raw_series.remove(&batch_id).unwrap_or_default() {
            let before = samples.len();
            let kept: Vec<(f64, T)> = samples
                .into_iter()
                .filter(|(t, _)| *t >= lo - tol && *t <= hi + tol)
                .collect();
            if kept.len() < before {
                notes.push(format!(
                    "batch `{batch_id}`, tag `{tag}`: dropped {} sample(s) outside the phase span",
                    before - kept.len()
                ));
            }
            if kept.is_empty() {
                continue;
            }
            let times = kept.iter().map(|(t, _)| T::lit((t - origin).clamp(lo - origin, hi - origin))).collect();
            let values = kept.iter().map(|(_, v)| *v).collect();
            series.insert(tag, Series { times, values });
        }
        let mut rec = BatchRecord::new(batch_id, series, phases)?;
        rec.absolute_start = origin;
        batches.push(rec);
    }

    let z_table = match z {
        Some(r) => read_scalar_table::<T, _>("initial conditions", r, options, &mut metadata)?,
        None => BTreeMap::new(),
    };
    let y_table = match y {
        Some(r) => read_scalar_table::<T, _>("quality", r, options, &mut metadata)?,
        None => BTreeMap::new(),
    };

    let mut ds = BatchDataset::new(batches, z_table, y_table)?;
    ds.metadata = metadata;
    ds.notes = notes;
    Ok(ds)
}

fn collect_extra(
    table: &Table,
    rec: &csv::StringRecord,
    batch: &str,
    metadata: &mut BTreeMap<String, BTreeMap<String, String>>,
) {
    for &i in &table.extra {
        metadata
            .entry(batch.to_string())
            .or_default()
            .entry(table.headers[i].clone())
            .or_insert_with(|| rec[i].to_string());
    }
}

fn read_scalar_table<T: Real, R: Read>(
    name: &'static str,
    reader: R,
    options: &LoadOptions,
    metadata: &mut BTreeMap<String, BTreeMap<String, String>>,
) -> Result<BTreeMap<String, BTreeMap<String, T>>, IngestError> {
    let tab = Table::read(name, reader, &SCALAR_COLUMNS, options)?;
    let (b, n, v) = (tab.idx("batch_id"), tab.idx("name"), tab.idx("value"));
    let mut out: BTreeMap<String, BTreeMap<String, T>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for (line, rec) in &tab.rows {
        let batch = rec[b].to_string();
        let key = (batch.clone(), rec[n].to_string());
        if !seen.insert(key) {
            return Err(bad(name, *line, "name (duplicate)", &rec[n]));
        }
        let value: T = parse_num(name, *line, "value", &rec[v])?;
        collect_extra(&tab, rec, &batch, metadata);
        out.entry(batch).or_default().insert(rec[n].to_string(), value);
    }
    Ok(out)
}
