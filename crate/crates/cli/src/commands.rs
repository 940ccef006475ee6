//! Subcommand bodies. Each builds all outputs in memory, then commits them.

use std::path::Path;

use anyhow::{anyhow, Context};
use log::info;
use mobpat::grid::Grid;
use mobpat::ingest::{parse_records, parse_timestamp, to_canonical_csv, Dataset, LocationTree};
use mobpat::matrices::{
    build_frequency_matrix, build_sequence_vectors, build_time_oriented_matrix, build_timespent_matrix, derive_stays,
    sequences_to_csv, MatrixEnvelope, StayInterval, TimeBinning, TimeOrientedMatrix, TimeWindow,
};
use mobpat::predict::{
    build_flow_map, curves_to_csv, evaluate_holdout_fitted, evaluate_over_time, predict_column, EvalConfig, FlowMap,
    RnnConfig, WindowSpec,
};
use mobpat::som::{
    assign_and_aggregate, build_features, compute_umatrix, default_grid_side, detect_outstanding, init_grid, train,
    SomModel, TrainSchedule, UMatrix,
};
use mobpat::synth::{generate, SynthConfig};
use mobpat::viz::{render_flowmap, render_heatmap, render_timecube, render_umatrix, ColorRamp, RenderSpec, Trajectory};
use serde::{Deserialize, Serialize};

use crate::args::{
    ArtifactKind, ClusterArgs, EvaluateArgs, IngestArgs, InputArgs, MatricesArgs, MatrixKind, ModelArgs, PredictArgs,
    RampArg, RenderArgs, ReplayArgs, SynthArgs, TimeArgs,
};
use crate::output::{digest, sibling, usage, Outputs, Result, RunManifest};

fn load_dataset(m: &mut RunManifest, input: &InputArgs) -> Result<Dataset> {
    let tree = match &input.locations {
        Some(p) => Some(LocationTree::from_csv(m.read_input(p)?.as_slice()).with_context(|| format!("in {}", p.display()))?),
        None => None,
    };
    let bytes = m.read_input(&input.input)?;
    let d = parse_records(input.format, bytes.as_slice(), tree.as_ref())
        .with_context(|| format!("in {}", input.input.display()))?;
    info!(
        "{}: {} records, {} objects, {} locations",
        input.input.display(),
        d.records.len(),
        d.n_objects(),
        d.n_locations()
    );
    Ok(d)
}

fn flag_time(name: &str, value: &str) -> Result<i64> {
    parse_timestamp(value).ok_or_else(|| usage(format!("--{name}: `{value}` is not a timestamp")))
}

fn location_labels(d: &Dataset) -> Vec<String> {
    d.locations.nodes().iter().map(|n| n.name.clone()).collect()
}

fn object_labels(d: &Dataset) -> Vec<String> {
    d.objects.ids().to_vec()
}

struct Timeline {
    binning: TimeBinning,
    stays: Vec<StayInterval>,
}

fn timeline(d: &Dataset, time: &TimeArgs) -> Result<Timeline> {
    let binning = TimeBinning::covering(d, time.bin_seconds)?;
    let stays = derive_stays(d, time.session_timeout, Some(binning.end()));
    info!("{} bins of {} s from {}", binning.n_bins, binning.bin_seconds, binning.start);
    Ok(Timeline { binning, stays })
}

fn tom_of(d: &Dataset, t: &Timeline) -> TimeOrientedMatrix {
    build_time_oriented_matrix(&t.stays, t.binning, d.n_objects())
}

fn seed_or_default(seed: Option<u64>) -> u64 {
    seed.unwrap_or(0)
}

pub fn ingest(a: &IngestArgs, seed: Option<u64>) -> Result<()> {
    let mut m = RunManifest::new("ingest", seed_or_default(seed), a)?;
    let d = load_dataset(&mut m, &a.input)?;
    let mut out = Outputs::default();
    out.add(&a.out, to_canonical_csv(&d));
    out.add(sibling(&a.out, ".locations.csv"), d.locations.to_csv());
    m.finish(&mut out, sibling(&a.out, ".manifest.json"))?;
    out.commit()
}

pub fn synth(a: &SynthArgs, seed: Option<u64>) -> Result<()> {
    let mut m = RunManifest::new("synth", 0, a)?;
    let mut cfg = match &a.config {
        Some(p) => {
            let text = String::from_utf8(m.read_input(p)?).map_err(|_| anyhow!("{} is not UTF-8", p.display()))?;
            text.parse::<SynthConfig>().with_context(|| format!("in {}", p.display()))?
        }
        None => SynthConfig::default(),
    };
    // an explicit --seed wins over the config file
    if let Some(s) = seed {
        cfg.seed = s;
    }
    m.seed = cfg.seed;
    let (d, truth) = generate(&cfg)?;
    info!(
        "generated {} objects, {} records over {} days",
        d.n_objects(),
        d.records.len(),
        cfg.days
    );
    let mut out = Outputs::default();
    out.add(&a.out, to_canonical_csv(&d));
    out.add(sibling(&a.out, ".locations.csv"), d.locations.to_csv());
    out.add_json(sibling(&a.out, ".truth.json"), &truth)?;
    out.add(sibling(&a.out, ".config"), cfg.to_config_string());
    m.finish(&mut out, sibling(&a.out, ".manifest.json"))?;
    out.commit()
}

pub fn matrices(a: &MatricesArgs, seed: Option<u64>) -> Result<()> {
    let mut m = RunManifest::new("matrices", seed_or_default(seed), a)?;
    let d = load_dataset(&mut m, &a.input)?;
    let t = timeline(&d, &a.time)?;
    let window = TimeWindow::new(
        a.start.as_deref().map(|s| flag_time("start", s)).transpose()?.unwrap_or(t.binning.start),
        a.end.as_deref().map(|s| flag_time("end", s)).transpose()?.unwrap_or(t.binning.end()),
    )
    .map_err(|e| usage(e.to_string()))?;
    let want = |k: MatrixKind| a.which.contains(&k) || a.which.contains(&MatrixKind::All);
    let (objs, locs) = (object_labels(&d), location_labels(&d));
    let mut out = Outputs::default();
    if want(MatrixKind::Frequency) {
        let f = build_frequency_matrix(&d, window);
        let env = MatrixEnvelope::new("frequency", &f.counts, None, objs.clone(), locs.clone());
        out.add(a.out_dir.join("frequency.csv"), env.to_csv());
    }
    if want(MatrixKind::Timespent) {
        let s = build_timespent_matrix(&t.stays, window, d.n_objects(), d.n_locations());
        let env = MatrixEnvelope::new("timespent", &s.seconds, None, objs.clone(), locs.clone());
        out.add(a.out_dir.join("timespent.csv"), env.to_csv());
    }
    if want(MatrixKind::Sequence) {
        out.add(a.out_dir.join("sequences.csv"), sequences_to_csv(&build_sequence_vectors(&d), &objs));
    }
    if want(MatrixKind::Tom) {
        let tom = tom_of(&d, &t);
        let bins = (0..tom.n_bins()).map(|b| t.binning.bin_start(b).to_string()).collect();
        let env = MatrixEnvelope::new("tom", &tom.cells, Some(t.binning), objs, bins);
        out.add(a.out_dir.join("tom.csv"), env.to_csv());
    }
    m.finish(&mut out, a.out_dir.join("manifest.json"))?;
    out.commit()
}

#[derive(Serialize)]
struct SomFile<'a> {
    model: &'a SomModel,
    initial_qe: f64,
    qe_trace: &'a [f64],
}

#[derive(Serialize, Deserialize)]
struct FlagEntry {
    object_id: String,
    object: usize,
    bmu: (usize, usize),
    u_value: f64,
}

#[derive(Serialize, Deserialize)]
struct Assignment {
    object_id: String,
    bmu: (usize, usize),
}

#[derive(Serialize, Deserialize)]
struct ClusterFile {
    umatrix: UMatrix,
    hits: Grid<usize>,
    mean: f64,
    std: f64,
    k: f64,
    threshold: f64,
    assignments: Vec<Assignment>,
    flagged: Vec<FlagEntry>,
}

fn render_spec(width: u32, height: u32, ramp: RampArg, legend: bool) -> Result<RenderSpec> {
    let ramp = match ramp {
        RampArg::Sequential => ColorRamp::Sequential,
        RampArg::Diverging => ColorRamp::Diverging,
    };
    Ok(RenderSpec::new(width, height)
        .map_err(|e| usage(e.to_string()))?
        .with_ramp(ramp)
        .with_legend(legend))
}

fn trajectories(d: &Dataset, stays: &[StayInterval], objects: &[usize]) -> Vec<Trajectory> {
    objects
        .iter()
        .map(|&o| Trajectory {
            label: d.objects.id(o).to_string(),
            stays: stays.iter().filter(|s| s.object == o).cloned().collect(),
        })
        .collect()
}

pub fn cluster(a: &ClusterArgs, seed: Option<u64>) -> Result<()> {
    let seed = seed_or_default(seed);
    let mut m = RunManifest::new("cluster", seed, a)?;
    if !(a.k > 0.0) {
        return Err(usage("--k must be positive"));
    }
    let d = load_dataset(&mut m, &a.input)?;
    let t = timeline(&d, &a.time)?;
    let window = t.binning.window();
    let freq = build_frequency_matrix(&d, window);
    let spent = build_timespent_matrix(&t.stays, window, d.n_objects(), d.n_locations());
    let x = build_features(&freq, &spent, a.normalize);

    let side = default_grid_side(d.n_objects());
    let (rows, cols) = (a.rows.unwrap_or(side), a.cols.unwrap_or(side));
    if rows == 0 || cols == 0 || rows * cols < 4 {
        return Err(usage(format!("a {rows}x{cols} lattice is too small (need at least 4 nodes)")));
    }
    let base = TrainSchedule::for_grid(rows, cols, seed);
    let schedule = TrainSchedule {
        epochs: a.epochs,
        lr0: a.lr0,
        lr1: a.lr1,
        sigma0: a.sigma0.unwrap_or(base.sigma0),
        sigma1: a.sigma1,
        seed,
    };
    schedule.validate().map_err(|e| usage(e.to_string()))?;
    let grid = init_grid(rows, cols, &x, seed)?;
    let trained = train(grid, &x, &schedule)?;
    info!(
        "{}x{} SOM: quantization error {:.4} after epoch 1, {:.4} after epoch {}",
        rows,
        cols,
        trained.qe_trace.first().copied().unwrap_or(trained.initial_qe),
        trained.qe_trace.last().copied().unwrap_or(trained.initial_qe),
        trained.qe_trace.len()
    );
    let u = compute_umatrix(&trained.grid);
    let assign = assign_and_aggregate(&trained.grid, &x);
    let flags = detect_outstanding(&u, &assign, a.k);
    let (mean, std) = u.mean_std();
    info!("{} objects flagged above U = {:.4}", flags.len(), mean + a.k * std);

    let ids = d.objects.ids();
    let flagged: Vec<FlagEntry> = flags
        .iter()
        .map(|f| FlagEntry {
            object_id: ids[f.object].clone(),
            object: f.object,
            bmu: f.bmu,
            u_value: f.u_value,
        })
        .collect();
    let model = SomModel::new(&trained.grid, schedule, seed);
    let mut ucsv = String::from("row,col,u,hits\n");
    for r in 0..rows {
        for c in 0..cols {
            ucsv.push_str(&format!("{r},{c},{},{}\n", u.values[(r, c)], assign.hits[(r, c)]));
        }
    }
    let spec = RenderSpec::default();
    let flagged_nodes: Vec<_> = flags.iter().map(|f| f.bmu).collect();
    let umatrix_svg = render_umatrix(&u, Some(&assign.hits), &flagged_nodes, &spec);
    let heatmap_svg = render_heatmap(&freq, &object_labels(&d), &location_labels(&d), &spec);
    let flagged_objects: Vec<usize> = flags.iter().map(|f| f.object).collect();
    let cube_svg = render_timecube(&trajectories(&d, &t.stays, &flagged_objects), &d.locations, &spec);
    let cluster = ClusterFile {
        umatrix: u,
        hits: assign.hits.clone(),
        mean,
        std,
        k: a.k,
        threshold: mean + a.k * std,
        assignments: assign
            .bmus
            .iter()
            .enumerate()
            .map(|(i, &bmu)| Assignment {
                object_id: ids[i].clone(),
                bmu,
            })
            .collect(),
        flagged,
    };

    let mut out = Outputs::default();
    out.add_json(
        a.out_dir.join("som.json"),
        &SomFile {
            model: &model,
            initial_qe: trained.initial_qe,
            qe_trace: &trained.qe_trace,
        },
    )?;
    out.add(a.out_dir.join("umatrix.csv"), ucsv);
    out.add_json(a.out_dir.join("cluster.json"), &cluster)?;
    out.add_json(a.out_dir.join("flags.json"), &cluster.flagged)?;
    out.add(a.out_dir.join("umatrix.svg"), umatrix_svg);
    out.add(a.out_dir.join("heatmap.svg"), heatmap_svg);
    out.add(a.out_dir.join("timecube.svg"), cube_svg);
    m.finish(&mut out, a.out_dir.join("manifest.json"))?;
    out.commit()
}

fn eval_config(model: &ModelArgs, seed: u64) -> Result<EvalConfig> {
    if model.window == 0 {
        return Err(usage("--window must be positive"));
    }
    if model.models.is_empty() {
        return Err(usage("--models needs at least one model"));
    }
    Ok(EvalConfig {
        window: WindowSpec {
            width: model.window,
            ..WindowSpec::default()
        },
        rnn: RnnConfig {
            hidden: model.rnn_hidden,
            epochs: model.rnn_epochs,
            lr: model.rnn_lr,
            seed,
            ..RnnConfig::default()
        },
        seed,
        ..EvalConfig::default()
    })
}

#[derive(Serialize)]
struct PredictReport<'a> {
    split_time: i64,
    target_bin: usize,
    target_time: i64,
    binning: TimeBinning,
    flow_model: String,
    holdout: &'a mobpat::predict::HoldoutReport,
}

pub fn predict(a: &PredictArgs, seed: Option<u64>) -> Result<()> {
    let seed = seed_or_default(seed);
    let mut m = RunManifest::new("predict", seed, a)?;
    let cfg = eval_config(&a.model, seed)?;
    let split_time = flag_time("split-time", &a.split_time)?;
    let d = load_dataset(&mut m, &a.input)?;
    let t = timeline(&d, &a.time)?;
    let tom = tom_of(&d, &t);
    let split_bin = t
        .binning
        .bin_of(split_time)
        .ok_or_else(|| anyhow!("split time {split_time} lies outside the data ({}..{})", t.binning.start, t.binning.end()))?;
    let target = a.target_bin.unwrap_or(split_bin);
    let width = cfg.window.width;
    if target < width.max(1) || target >= tom.n_bins() {
        return Err(anyhow!("target bin {target} needs {width} earlier bins inside 0..{}", tom.n_bins()).into());
    }
    let l = d.n_locations();
    let (report, fitted) = evaluate_holdout_fitted(&a.model.models, &tom, l, split_bin, &cfg)?;
    for s in &report.models {
        info!("{}: accuracy {:.4} on {} windows", s.model, s.accuracy, report.n_test);
    }

    let actual = tom.cells.column(target);
    let mut columns = Vec::with_capacity(fitted.len());
    for model in &fitted {
        columns.push(predict_column(model, &tom, target, width)?);
    }
    let mut pcsv = String::from("object,actual");
    for k in &a.model.models {
        pcsv.push(',');
        pcsv.push_str(k.name());
    }
    pcsv.push('\n');
    for (i, id) in d.objects.ids().iter().enumerate() {
        pcsv.push_str(&format!("{id},{}", actual[i]));
        for col in &columns {
            pcsv.push_str(&format!(",{}", col[i]));
        }
        pcsv.push('\n');
    }

    let flow_model = a.model.models[0];
    let actual_flow = build_flow_map(&tom, target - 1, l)?;
    let predicted_flow = FlowMap::from_columns(
        &format!("predicted ({flow_model}) {}->{target}", target - 1),
        &tom.cells.column(target - 1),
        &columns[0],
        l,
    );
    let spec = RenderSpec::default();
    let doc = PredictReport {
        split_time,
        target_bin: target,
        target_time: t.binning.bin_start(target),
        binning: t.binning,
        flow_model: flow_model.to_string(),
        holdout: &report,
    };
    let mut out = Outputs::default();
    out.add_json(a.out_dir.join("report.json"), &doc)?;
    out.add(a.out_dir.join("predictions.csv"), pcsv);
    out.add_json(a.out_dir.join("flow_actual.json"), &actual_flow)?;
    out.add_json(a.out_dir.join("flow_predicted.json"), &predicted_flow)?;
    out.add(a.out_dir.join("flow_actual.svg"), render_flowmap(&actual_flow, &d.locations, &spec));
    out.add(a.out_dir.join("flow_predicted.svg"), render_flowmap(&predicted_flow, &d.locations, &spec));
    m.finish(&mut out, a.out_dir.join("manifest.json"))?;
    out.commit()
}

pub fn evaluate(a: &EvaluateArgs, seed: Option<u64>) -> Result<()> {
    let seed = seed_or_default(seed);
    let mut m = RunManifest::new("evaluate", seed, a)?;
    let cfg = eval_config(&a.model, seed)?;
    let target_time = a.target_time.as_deref().map(|s| flag_time("target-time", s)).transpose()?;
    let d = load_dataset(&mut m, &a.input)?;
    let t = timeline(&d, &a.time)?;
    let tom = tom_of(&d, &t);
    let target = match (a.target_bin, target_time) {
        (Some(b), _) => b,
        (None, Some(ts)) => t
            .binning
            .bin_of(ts)
            .ok_or_else(|| anyhow!("target time {ts} lies outside the data"))?,
        (None, None) => return Err(usage("one of --target-bin or --target-time is required")),
    };
    let report = evaluate_over_time(&a.model.models, &tom, d.n_locations(), target, &a.probe_minutes, &cfg)?;
    for r in &report.models {
        info!("{}: accuracy {:.4} at the longest probe", r.model, r.overall_accuracy);
    }
    let mut out = Outputs::default();
    out.add_json(a.out_dir.join("evaluation.json"), &report)?;
    out.add(a.out_dir.join("curves.csv"), curves_to_csv(&report));
    m.finish(&mut out, a.out_dir.join("manifest.json"))?;
    out.commit()
}

/// Reads a labelled matrix CSV (`object,<col>...`).
fn read_matrix_csv(bytes: &[u8], path: &Path) -> Result<(Grid<f64>, Vec<String>, Vec<String>)> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let cols: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != cols.len() + 1 {
            return Err(anyhow!("{} line {}: expected {} fields", path.display(), i + 2, cols.len() + 1).into());
        }
        labels.push(rec[0].to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| anyhow!("{} line {}: `{v}` is not a number", path.display(), i + 2)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((Grid::from_rows(rows, cols.len()), labels, cols))
}

pub fn render(a: &RenderArgs, seed: Option<u64>) -> Result<()> {
    let mut m = RunManifest::new("render", seed_or_default(seed), a)?;
    let spec = render_spec(a.width, a.height, a.ramp, !a.no_legend)?;
    let tree = match &a.locations {
        Some(p) => LocationTree::from_csv(m.read_input(p)?.as_slice())?,
        None => LocationTree::new(),
    };
    let svg = match a.kind {
        ArtifactKind::Umatrix => {
            let c: ClusterFile = serde_json::from_slice(&m.read_input(&a.input)?)?;
            let nodes: Vec<_> = c.flagged.iter().map(|f| f.bmu).collect();
            render_umatrix(&c.umatrix, Some(&c.hits), &nodes, &spec)
        }
        ArtifactKind::Heatmap => {
            let bytes = m.read_input(&a.input)?;
            let (mut grid, rows, cols) = read_matrix_csv(&bytes, &a.input)?;
            if a.hours {
                grid.as_mut_slice().iter_mut().for_each(|v| *v /= 3600.0);
            }
            render_heatmap(&grid, &rows, &cols, &spec)
        }
        ArtifactKind::Flowmap => {
            let f: FlowMap = serde_json::from_slice(&m.read_input(&a.input)?)?;
            render_flowmap(&f, &tree, &spec)
        }
        ArtifactKind::Timecube => {
            let input = InputArgs {
                input: a.input.clone(),
                format: a.format,
                locations: None,
            };
            let bytes = m.read_input(&input.input)?;
            let tree_ref = a.locations.as_ref().map(|_| &tree);
            let d = parse_records(input.format, bytes.as_slice(), tree_ref)?;
            let stays = derive_stays(&d, a.session_timeout, None);
            let objects = a
                .objects
                .iter()
                .map(|id| d.objects.index_of(id).ok_or_else(|| anyhow!("object `{id}` not in {}", a.input.display())))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            render_timecube(&trajectories(&d, &stays, &objects), &d.locations, &spec)
        }
    };
    let mut out = Outputs::default();
    out.add(&a.out, svg);
    m.finish(&mut out, sibling(&a.out, ".manifest.json"))?;
    out.commit()
}

#[derive(Deserialize)]
struct RecordedRun {
    subcommand: String,
    seed: u64,
    params: serde_json::Value,
    inputs: std::collections::BTreeMap<String, String>,
}

/// Runs a recorded command again with its recorded parameters and seed.
/// Paths resolve against the current directory, as they did originally.
pub fn replay(a: &ReplayArgs) -> Result<()> {
    let text = std::fs::read(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let run: RecordedRun =
        serde_json::from_slice(&text).with_context(|| format!("{} is not a run manifest", a.manifest.display()))?;
    if !a.no_verify {
        for (path, want) in &run.inputs {
            let bytes = std::fs::read(path).with_context(|| format!("reading recorded input {path}"))?;
            if &digest(&bytes) != want {
                return Err(anyhow!("{path} changed since the recorded run (digest mismatch)").into());
            }
        }
    }
    info!("replaying `{}` with seed {}", run.subcommand, run.seed);
    let seed = Some(run.seed);
    fn params<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T> {
        serde_json::from_value(v).map_err(|e| anyhow!("recorded parameters do not match this version: {e}").into())
    }
    match run.subcommand.as_str() {
        "ingest" => ingest(&params(run.params)?, seed),
        "synth" => synth(&params(run.params)?, seed),
        "matrices" => matrices(&params(run.params)?, seed),
        "cluster" => cluster(&params(run.params)?, seed),
        "predict" => predict(&params(run.params)?, seed),
        "evaluate" => evaluate(&params(run.params)?, seed),
        "render" => render(&params(run.params)?, seed),
        other => Err(anyhow!("cannot replay subcommand `{other}`").into()),
    }
}
