use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use batchkit::align::{
    align_by_indicator, align_by_triggers, choose_local_p, dtw_align, read_aligned_csv, select_reference,
    stagewise_dtw, write_aligned_csv, AlignmentSidecar, Boundary, DtwConfig, DtwVariant, GlobalBand, Normalization,
    PhaseLengthMode, PointsPerPhase, TriggerAlignmentConfig,
};
use batchkit::fpca::{explained_variance, fit_fpca_tag, scores_feature_matrix, Basis, Components, Quadrature, SmoothingConfig};
use batchkit::ingest::{load_dataset, validate, LoadOptions};
use batchkit::landmarks::{compute_durations, compute_landmarks, FeatureSpec, Statistic, Transform};
use batchkit::plot::{control_chart_svg, heatmap_svg, panels_svg, Panel, Series};
use batchkit::screen::{screen_predictors, ForestConfig, NOISE_FEATURE};
use batchkit::spc::{
    contribution_heatmap, fit_t2, fit_univariate, functional_mspc, MspcConfig, T2Config,
};
use batchkit::{AlignedBatchSet, BatchDataset, ControlChartModel, FeatureMatrix, UnivariateChart};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{digests, file_safe, OutDir, RunRecord};
use crate::{
    AlignArgs, AlignMethod, AlignedInput, BandKind, BasisKind, Command, DatasetArgs, FeaturesArgs, FpcaArgs, Globals,
    MonitorArgs, MonitorMode, PhaseLength, QuadratureKind, ScreenArgs, SmoothingArgs, Variant,
};

/// Runs one command, then writes run.json. Returns the warnings to print.
pub fn run(command: &Command, g: &Globals, out: &mut OutDir) -> Result<Vec<String>, CliError> {
    let mut warnings = Vec::new();
    let inputs: Vec<PathBuf> = match command {
        Command::Validate(a) => validate_cmd(a, g, out, &mut warnings)?,
        Command::Align(a) => align_cmd(a, g, out, &mut warnings)?,
        Command::Features(a) => features_cmd(a, g, out, &mut warnings)?,
        Command::Screen(a) => screen_cmd(a, g, out, &mut warnings)?,
        Command::Fpca(a) => fpca_cmd(a, out, &mut warnings)?,
        Command::Monitor(a) => monitor_cmd(a, out, &mut warnings)?,
    };
    let paths: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let args = match command {
        Command::Validate(a) => serde_json::to_value(a),
        Command::Align(a) => serde_json::to_value(a),
        Command::Features(a) => serde_json::to_value(a),
        Command::Screen(a) => serde_json::to_value(a),
        Command::Fpca(a) => serde_json::to_value(a),
        Command::Monitor(a) => serde_json::to_value(a),
    }
    .map_err(|e| CliError::io("run.json", e))?;
    let outputs = out.written().to_vec();
    let run = RunRecord {
        tool: "batchkit",
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        seed: g.seed,
        strict: g.strict,
        lax_columns: g.lax_columns,
        args: &args,
        inputs: digests(&paths)?,
        outputs,
        warnings: &warnings,
    };
    out.json("run.json", &run)?;
    Ok(warnings)
}

fn load(data: &DatasetArgs, g: &Globals) -> Result<BatchDataset, CliError> {
    let options = LoadOptions { lax_columns: g.lax_columns };
    Ok(load_dataset(&data.trajectories, &data.events, data.initial.as_deref(), data.quality.as_deref(), &options)?)
}

fn dataset_inputs(data: &DatasetArgs) -> Vec<PathBuf> {
    [Some(&data.trajectories), Some(&data.events), data.initial.as_ref(), data.quality.as_ref()]
        .into_iter()
        .flatten()
        .cloned()
        .collect()
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn features_csv(m: &FeatureMatrix) -> Result<Vec<u8>, CliError> {
    csv_bytes(|b| m.write_csv(b).map_err(|e| CliError::io("feature csv", e)))
}

fn validate_cmd(a: &DatasetArgs, g: &Globals, out: &mut OutDir, warnings: &mut Vec<String>) -> Result<Vec<PathBuf>, CliError> {
    let ds = load(a, g)?;
    let report = validate(&ds);
    out.json("validation.json", &report)?;
    warnings.extend(ds.notes.iter().cloned());
    if !report.issues.is_empty() {
        let msg = format!("{} data-quality issue(s); see validation.json", report.issues.len());
        if g.strict {
            return Err(CliError::Input(msg));
        }
        warnings.push(msg);
    }
    Ok(dataset_inputs(a))
}

fn dtw_config(a: &AlignArgs) -> Result<DtwConfig, CliError> {
    let variant = match a.variant {
        Variant::Classical => DtwVariant::Classical,
        Variant::Exponential => DtwVariant::DerivativeExponential { alpha: a.smoothing_alpha },
        Variant::SavitzkyGolay => DtwVariant::DerivativeSavitzkyGolay { window: a.sg_window, order: a.sg_order },
        Variant::PiecewiseLinear => DtwVariant::DerivativePiecewiseLinear { segments: a.segments },
    };
    let global_band = match a.band {
        BandKind::None => GlobalBand::None,
        BandKind::SakoeChiba => GlobalBand::SakoeChiba { width: a.band_width },
        BandKind::Itakura => GlobalBand::Itakura,
    };
    let weights = a
        .weights
        .iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("weight `{kv}` is not tag=value")))?;
            let w: f64 = v.parse().map_err(|_| CliError::Input(format!("weight `{kv}` is not a number")))?;
            Ok((k.to_string(), w))
        })
        .collect::<Result<BTreeMap<_, _>, CliError>>()?;
    Ok(DtwConfig {
        variant,
        local_p: a.local_p,
        global_band,
        boundary: if a.open_end { Boundary::OpenEnd } else { Boundary::Closed },
        weights,
        normalize: if a.no_normalize { Normalization::None } else { Normalization::PerTagStd },
    })
}

fn trigger_config(a: &AlignArgs) -> TriggerAlignmentConfig {
    TriggerAlignmentConfig {
        points_per_phase: PointsPerPhase::Uniform(a.points_per_phase),
        phase_length_mode: match a.phase_length {
            PhaseLength::Equal => PhaseLengthMode::Equal,
            PhaseLength::MedianDuration => PhaseLengthMode::MedianDuration,
        },
    }
}

struct Aligned {
    set: AlignedBatchSet,
    sidecar: AlignmentSidecar,
}

fn run_alignment(
    method: AlignMethod,
    a: &AlignArgs,
    ds: &BatchDataset,
    g: &Globals,
    out: &mut OutDir,
    warnings: &mut Vec<String>,
) -> Result<Aligned, CliError> {
    match method {
        AlignMethod::Triggers => {
            let set = align_by_triggers(ds, &trigger_config(a))?;
            let sidecar = AlignmentSidecar::new(&set, None, &[], &[]);
            Ok(Aligned { set, sidecar })
        }
        AlignMethod::Indicator => {
            let tag = a
                .indicator_tag
                .as_deref()
                .ok_or_else(|| CliError::Input("indicator alignment needs --indicator-tag".into()))?;
            let set = align_by_indicator(ds, tag, a.indicator_points, a.indicator_tolerance)?;
            let sidecar = AlignmentSidecar::new(&set, None, &[], &[]);
            Ok(Aligned { set, sidecar })
        }
        AlignMethod::Dtw | AlignMethod::StagewiseDtw => {
            let reference = match &a.reference {
                Some(r) => r.clone(),
                None => select_reference(ds, &[])?,
            };
            let mut config = dtw_config(a)?;
            if !a.choose_p.is_empty() {
                let sel = choose_local_p(ds, &reference, &config, &a.choose_p, a.lambda)?;
                config.local_p = sel.p;
                out.json("p_selection.json", &sel)?;
            }
            let res = if method == AlignMethod::Dtw {
                dtw_align(ds, &reference, &config)?
            } else {
                stagewise_dtw(ds, &reference, &config)?
            };
            for (b, e) in &res.failures {
                warnings.push(format!("batch `{b}` not aligned: {e}"));
            }
            if !res.failures.is_empty() && g.strict {
                return Err(CliError::Infeasible(format!("{} batch(es) could not be aligned", res.failures.len())));
            }
            if res.aligned.n_batches() == 0 {
                return Err(CliError::Infeasible("no batch could be aligned".into()));
            }
            let sidecar = AlignmentSidecar::new(&res.aligned, Some(&reference), &res.paths, &res.diagnostics);
            Ok(Aligned { set: res.aligned, sidecar })
        }
    }
}

fn aligned_panel(title: &str, set: &AlignedBatchSet, tag: &str) -> Panel {
    let j = set.tag_index(tag);
    Panel {
        title: title.to_string(),
        series: set
            .batch_ids
            .iter()
            .enumerate()
            .filter_map(|(b, id)| {
                let j = j?;
                Some(Series {
                    label: id.clone(),
                    points: set.grid.points().iter().copied().zip(set.values[b][j].iter().copied()).collect(),
                })
            })
            .collect(),
        ..Default::default()
    }
}

fn align_cmd(a: &AlignArgs, g: &Globals, out: &mut OutDir, warnings: &mut Vec<String>) -> Result<Vec<PathBuf>, CliError> {
    let ds = load(&a.data, g)?;
    let plot_tag = a.plot_tag.clone().or_else(|| ds.tags.first().cloned()).unwrap_or_default();
    let aligned = run_alignment(a.method, a, &ds, g, out, warnings)?;
    warnings.extend(aligned.set.warnings.iter().cloned());
    let csv = csv_bytes(|b| write_aligned_csv(&aligned.set, b).map_err(|e| CliError::io("aligned csv", e)))?;
    out.write("aligned.csv", csv)?;
    out.json("alignment.json", &aligned.sidecar)?;
    out.svg("aligned.svg", panels_svg(&[aligned_panel(&format!("{plot_tag} aligned"), &aligned.set, &plot_tag)], 1))?;
    if a.compare {
        if a.indicator_tag.is_none() {
            return Err(CliError::Input("--compare needs --indicator-tag".into()));
        }
        let unaligned = Panel {
            title: format!("{plot_tag} unaligned (seconds)"),
            series: ds
                .batches
                .iter()
                .filter_map(|b| {
                    let s = b.series.get(&plot_tag)?;
                    Some(Series {
                        label: b.batch_id.clone(),
                        points: s.times.iter().copied().zip(s.values.iter().copied()).collect(),
                    })
                })
                .collect(),
            ..Default::default()
        };
        let mut panels = vec![unaligned];
        let mut scratch = Vec::new();
        for (m, name) in [(AlignMethod::Indicator, "indicator"), (AlignMethod::Triggers, "triggers"), (AlignMethod::Dtw, "DTW")] {
            let r = run_alignment(m, a, &ds, g, out, &mut scratch)?;
            panels.push(aligned_panel(&format!("{plot_tag}: {name}"), &r.set, &plot_tag));
        }
        warnings.extend(scratch.into_iter().map(|w| format!("compare: {w}")));
        out.write("compare.svg", panels_svg(&panels, 2))?;
    }
    Ok(dataset_inputs(&a.data))
}

fn parse_named<T: Copy>(names: &[String], all: &[T], name: fn(T) -> &'static str, what: &str) -> Result<Vec<T>, CliError> {
    names
        .iter()
        .map(|n| {
            all.iter()
                .copied()
                .find(|&s| name(s) == n.trim())
                .ok_or_else(|| CliError::Input(format!("unknown {what} `{n}`")))
        })
        .collect()
}

fn features_cmd(a: &FeaturesArgs, g: &Globals, out: &mut OutDir, warnings: &mut Vec<String>) -> Result<Vec<PathBuf>, CliError> {
    let ds = load(&a.data, g)?;
    let spec = FeatureSpec {
        statistics: parse_named(&a.statistics, &Statistic::ALL, Statistic::name, "statistic")?,
        transforms: parse_named(&a.transforms, &[Transform::Raw, Transform::Derivative, Transform::Integral], Transform::name, "transform")?,
        per_phase: !a.no_per_phase,
        whole_batch: !a.no_whole_batch,
        tags: (!a.tags.is_empty()).then(|| a.tags.clone()),
    };
    let features = compute_landmarks(&ds, &spec)?;
    if features.n_masked() > 0 {
        warnings.push(format!("{} feature cell(s) masked for lack of samples", features.n_masked()));
    }
    out.write("features.csv", features_csv(&features)?)?;
    out.write("durations.csv", features_csv(&compute_durations(&ds))?)?;
    Ok(dataset_inputs(&a.data))
}

/// Reads `name`'s values from a batch_id,name,value CSV, in `rows` order.
fn read_target(path: &Path, name: &str, rows: &[String], lax: bool) -> Result<Vec<Option<f64>>, CliError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let bad = |m: String| CliError::Input(format!("{}: {m}", path.display()));
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |c: &str| headers.iter().position(|h| h == c).ok_or_else(|| bad(format!("missing column `{c}`")));
    let (ib, inm, iv) = (col("batch_id")?, col("name")?, col("value")?);
    if !lax && headers.len() > 3 {
        return Err(bad("unknown columns (use --lax-columns)".into()));
    }
    let mut values = BTreeMap::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if &rec[inm] != name {
            continue;
        }
        let v: f64 = rec[iv].parse().map_err(|_| bad(format!("line {}: bad value `{}`", line + 2, &rec[iv])))?;
        values.insert(rec[ib].to_string(), v);
    }
    if values.is_empty() {
        return Err(bad(format!("no rows for target `{name}`")));
    }
    Ok(rows.iter().map(|r| values.get(r).copied()).collect())
}

#[derive(Serialize)]
struct RankRow<'a> {
    rank: usize,
    feature: &'a str,
    contribution: f64,
    selected: bool,
}

fn screen_cmd(a: &ScreenArgs, g: &Globals, out: &mut OutDir, warnings: &mut Vec<String>) -> Result<Vec<PathBuf>, CliError> {
    let features = FeatureMatrix::read_csv(open(&a.features)?)?;
    let target = read_target(&a.quality, &a.target, &features.rows, g.lax_columns)?;
    let config = ForestConfig {
        n_trees: a.trees,
        max_depth: a.max_depth,
        min_samples_leaf: a.min_leaf,
        feature_subsample: a.feature_fraction,
        row_bootstrap: !a.no_bootstrap,
        seed: g.seed,
    };
    let report = screen_predictors(&features, &target, &a.target, &config)?;
    warnings.extend(report.notes.iter().cloned());
    out.json("screening.json", &report)?;
    let ranking = report.ranking();
    let mut rows: Vec<RankRow> = ranking
        .iter()
        .enumerate()
        .map(|(k, (f, c))| RankRow { rank: k + 1, feature: f, contribution: *c, selected: report.selected.contains(f) })
        .collect();
    rows.push(RankRow { rank: 0, feature: NOISE_FEATURE, contribution: report.noise_contribution, selected: false });
    let csv = csv_bytes(|b| {
        let mut w = csv::Writer::from_writer(b);
        for r in &rows {
            w.serialize(r).map_err(|e| CliError::io("ranking csv", e))?;
        }
        w.flush().map_err(|e| CliError::io("ranking csv", e))
    })?;
    out.write("screening_ranking.csv", csv)?;
    let values: Vec<f64> = ranking.iter().map(|(_, c)| *c).collect();
    let flags: Vec<bool> = ranking.iter().map(|(f, _)| report.selected.contains(f)).collect();
    out.svg(
        "screening.svg",
        control_chart_svg(
            &format!("contribution to {} by rank", a.target),
            &values,
            &flags,
            &[(report.noise_contribution, "noise".into())],
            false,
        ),
    )?;
    Ok(vec![a.features.clone(), a.quality.clone()])
}

fn smoothing_config(s: &SmoothingArgs) -> (SmoothingConfig, Quadrature) {
    let basis = match s.basis {
        BasisKind::None => Basis::None,
        BasisKind::Bspline => Basis::Bspline { order: s.order, n_knots: s.knots },
    };
    let q = match s.quadrature {
        QuadratureKind::Trapezoid => Quadrature::Trapezoid,
        QuadratureKind::Uniform => Quadrature::Uniform,
    };
    (SmoothingConfig { basis, penalty: s.penalty }, q)
}

fn read_aligned(input: &AlignedInput) -> Result<(AlignedBatchSet, Vec<PathBuf>), CliError> {
    let mut inputs = vec![input.aligned.clone()];
    let sidecar: Option<AlignmentSidecar> = match &input.sidecar {
        Some(p) => {
            inputs.push(p.clone());
            Some(
                serde_json::from_reader(std::io::BufReader::new(open(p)?))
                    .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
            )
        }
        None => None,
    };
    let set = read_aligned_csv(open(&input.aligned)?, sidecar.as_ref())?;
    Ok((set, inputs))
}

fn pick_tags(requested: &[String], set: &AlignedBatchSet) -> Vec<String> {
    if requested.is_empty() { set.tags.clone() } else { requested.to_vec() }
}

#[derive(Serialize)]
struct Explained {
    tag: String,
    fractions: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Serialize)]
struct FpcaReport<'a> {
    models: &'a [batchkit::FpcaModel],
    explained_variance: Vec<Explained>,
}

fn fpca_plots(out: &mut OutDir, models: &[batchkit::FpcaModel]) -> Result<(), CliError> {
    for m in models {
        let x = m.grid.points();
        let mean = Panel {
            title: format!("{}: mean curve", m.tag),
            series: vec![Series { label: "mean".into(), points: x.iter().copied().zip(m.mean_curve.iter().copied()).collect() }],
            ..Default::default()
        };
        let eig = Panel {
            title: format!("{}: eigenfunctions", m.tag),
            series: (0..m.n_components())
                .map(|k| Series {
                    label: format!("FPC{}", k + 1),
                    points: x.iter().copied().zip(m.eigenfunctions.row(k).iter().copied()).collect(),
                })
                .collect(),
            ..Default::default()
        };
        out.svg(&format!("fpca_{}.svg", file_safe(&m.tag)), panels_svg(&[mean, eig], 2))?;
    }
    Ok(())
}

fn fpca_cmd(a: &FpcaArgs, out: &mut OutDir, warnings: &mut Vec<String>) -> Result<Vec<PathBuf>, CliError> {
    let (set, inputs) = read_aligned(&a.input)?;
    let (smoothing, quadrature) = smoothing_config(&a.smoothing);
    let components = a.components.map_or(Components::Cutoff(a.cutoff), Components::Fixed);
    let models = pick_tags(&a.tags, &set)
        .iter()
        .map(|t| fit_fpca_tag(&set, t, &smoothing, components, quadrature))
        .collect::<Result<Vec<_>, _>>()?;
    for m in &models {
        if m.n_components() == 0 {
            warnings.push(format!("tag `{}` has no variance across batches", m.tag));
        }
    }
    let explained = models
        .iter()
        .map(|m| {
            let (fractions, cumulative) = explained_variance(m);
            Explained { tag: m.tag.clone(), fractions, cumulative }
        })
        .collect();
    out.json("fpca_model.json", &FpcaReport { models: &models, explained_variance: explained })?;
    out.write("fpca_scores.csv", features_csv(&scores_feature_matrix(&models))?)?;
    fpca_plots(out, &models)?;
    Ok(inputs)
}

#[derive(Serialize)]
struct BatchT2<'a> {
    batch_id: &'a str,
    t2: f64,
    flagged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    tag_contributions: Option<&'a BTreeMap<String, f64>>,
}

#[derive(Serialize)]
struct ChartReport<'a> {
    mode: MonitorMode,
    model: &'a ControlChartModel,
    batches: Vec<BatchT2<'a>>,
    flagged: Vec<&'a str>,
}

#[derive(Serialize)]
struct NamedChart<'a> {
    feature: &'a str,
    batch_ids: Vec<&'a str>,
    chart: UnivariateChart,
}

fn select_columns(features: FeatureMatrix, columns: &[String]) -> Result<FeatureMatrix, CliError> {
    if columns.is_empty() {
        return Ok(features);
    }
    let idx = columns
        .iter()
        .map(|c| features.column_index(c).ok_or_else(|| CliError::Input(format!("no feature column `{c}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let values = (0..features.nrows()).flat_map(|r| idx.iter().map(move |&c| (r, c))).map(|(r, c)| features.get(r, c)).collect();
    Ok(FeatureMatrix::new(features.rows.clone(), columns.to_vec(), values)?)
}

fn write_chart(
    out: &mut OutDir,
    mode: MonitorMode,
    chart: &ControlChartModel,
    features: &FeatureMatrix,
    tag_contributions: Option<&[BTreeMap<String, f64>]>,
) -> Result<Vec<String>, CliError> {
    let flags = chart.flagged();
    let batches: Vec<BatchT2> = chart
        .batch_ids
        .iter()
        .enumerate()
        .map(|(k, id)| BatchT2 {
            batch_id: id,
            t2: chart.training_t2[k],
            flagged: flags[k],
            tag_contributions: tag_contributions.map(|t| &t[k]),
        })
        .collect();
    let flagged: Vec<&str> = batches.iter().filter(|b| b.flagged).map(|b| b.batch_id).collect();
    let flagged_owned = flagged.iter().map(|s| s.to_string()).collect();
    out.json("chart.json", &ChartReport { mode, model: chart, batches, flagged })?;
    let heat = contribution_heatmap(chart, features);
    out.write("heatmap.csv", features_csv(&heat)?)?;
    let csv = csv_bytes(|b| {
        let mut w = csv::Writer::from_writer(b);
        let err = |e: csv::Error| CliError::io("contributions csv", e);
        w.write_record(["batch_id", "feature", "contribution"]).map_err(err)?;
        for (r, id) in heat.rows.iter().enumerate() {
            for (c, f) in heat.columns.iter().enumerate() {
                if let Some(v) = heat.get(r, c) {
                    w.write_record([id.as_str(), f.as_str(), &v.to_string()]).map_err(err)?;
                }
            }
        }
        w.flush().map_err(|e| CliError::io("contributions csv", e))
    })?;
    out.write("contributions.csv", csv)?;
    if let Some(tc) = tag_contributions {
        let tags: Vec<String> = tc.first().map(|m| m.keys().cloned().collect()).unwrap_or_default();
        let values = tc.iter().flat_map(|m| tags.iter().map(|t| m.get(t).copied())).collect();
        let m = FeatureMatrix::new(chart.batch_ids.clone(), tags, values)?;
        out.write("tag_contributions.csv", features_csv(&m)?)?;
    }
    let grid: Vec<Vec<f64>> = (0..heat.nrows()).map(|r| (0..heat.ncols()).map(|c| heat.get(r, c).unwrap_or(f64::NAN)).collect()).collect();
    out.svg("heatmap.svg", heatmap_svg("T² contributions", &heat.rows, &heat.columns, &grid))?;
    out.svg(
        "t2_chart.svg",
        control_chart_svg("Hotelling T²", &chart.training_t2, &flags, &[(chart.t2_limit, "limit".into())], true),
    )?;
    Ok(flagged_owned)
}

fn monitor_cmd(a: &MonitorArgs, out: &mut OutDir, warnings: &mut Vec<String>) -> Result<Vec<PathBuf>, CliError> {
    let chart_config = T2Config {
        components: match (a.components, a.cutoff) {
            (Some(k), _) => Components::Fixed(k),
            (None, Some(c)) => Components::Cutoff(c),
            (None, None) => T2Config::default().components,
        },
        alpha: a.alpha,
    };
    let need = |p: &Option<PathBuf>, flag: &str| {
        p.clone().ok_or_else(|| CliError::Input(format!("{:?} mode needs --{flag}", a.mode).to_lowercase()))
    };
    match a.mode {
        MonitorMode::Univariate => {
            let path = need(&a.features, "features")?;
            let features = select_columns(FeatureMatrix::read_csv(open(&path)?)?, &a.columns)?;
            let mut charts = Vec::new();
            for (c, name) in features.columns.iter().enumerate() {
                let (ids, vals): (Vec<&str>, Vec<f64>) = (0..features.nrows())
                    .filter_map(|r| features.get(r, c).filter(|v| v.is_finite()).map(|v| (features.rows[r].as_str(), v)))
                    .unzip();
                if ids.len() < features.nrows() {
                    warnings.push(format!("`{name}`: {} batch(es) without a value skipped", features.nrows() - ids.len()));
                }
                let chart = fit_univariate(&vals)?;
                for (id, p) in ids.iter().zip(&chart.points) {
                    if p.out_of_control {
                        warnings.push(format!("`{name}`: batch `{id}` outside the control limits"));
                    }
                }
                charts.push(NamedChart { feature: name, batch_ids: ids, chart });
            }
            out.json("univariate.json", &charts)?;
            let panels: Vec<Panel> = charts
                .iter()
                .map(|c| Panel {
                    title: c.feature.to_string(),
                    hlines: vec![
                        (c.chart.center, "center".into()),
                        (c.chart.lower_limit, "LCL".into()),
                        (c.chart.upper_limit, "UCL".into()),
                    ],
                    markers: c.chart.points.iter().enumerate().map(|(k, p)| (k as f64, p.value, p.out_of_control)).collect(),
                    ..Default::default()
                })
                .collect();
            out.svg("univariate.svg", panels_svg(&panels, 2))?;
            Ok(vec![path])
        }
        MonitorMode::T2 => {
            let path = need(&a.features, "features")?;
            let features = select_columns(FeatureMatrix::read_csv(open(&path)?)?, &a.columns)?;
            let chart = fit_t2(&features, &chart_config)?;
            warnings.extend(chart.warnings.iter().cloned());
            let flagged = write_chart(out, a.mode, &chart, &features, None)?;
            warnings.extend(flagged.into_iter().map(|b| format!("batch `{b}` exceeds the T² limit")));
            Ok(vec![path])
        }
        MonitorMode::Functional => {
            let aligned = need(&a.aligned, "aligned")?;
            let (set, inputs) = read_aligned(&AlignedInput { aligned, sidecar: a.sidecar.clone() })?;
            let (smoothing, quadrature) = smoothing_config(&a.smoothing);
            let config = MspcConfig {
                smoothing,
                fpca_components: Components::Cutoff(a.fpca_cutoff),
                quadrature,
                chart: chart_config,
            };
            let res = functional_mspc(&set, &pick_tags(&a.tags, &set), &config)?;
            warnings.extend(res.chart.warnings.iter().cloned());
            out.json("fpca_model.json", &res.fpca)?;
            out.write("fpca_scores.csv", features_csv(&res.scores)?)?;
            let flagged = write_chart(out, a.mode, &res.chart, &res.scores, Some(&res.tag_contributions))?;
            warnings.extend(flagged.into_iter().map(|b| format!("batch `{b}` exceeds the T² limit")));
            Ok(inputs)
        }
    }
}
