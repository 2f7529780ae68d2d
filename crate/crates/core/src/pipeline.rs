//! End-to-end commands over a [`PipelineConfig`]. Every command reads from
//! the traces directory or earlier outputs and writes only beneath the
//! output directory.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bc::{
    assemble_bc_set, bc_deviation_stats, continuity_inlet_profile, export_bc, parse_bc, snapshot_outlet_flows,
    velocity_to_massflow, BcError, BcType, BoundaryConditionSet, ExportMode, FluidProperties, MassFlowProfile,
    OutletFlows, VesselGeometry, NOT_ADJUSTED,
};
use crate::config::{ConfigError, PipelineConfig, RosterEntry};
use crate::dataset::{assemble_dataset, Dataset, DatasetError, DatasetRow};
use crate::features::{build_matrices, encoding_maps, split_dataset, FeatureError, PreparedData, SplitRatios};
use crate::ids::{CaseId, VesselId};
use crate::models::{
    compute_rmse, default_grid, describe_spec, fit_model, grid_search, predict_velocity_profile, EvaluationEntry,
    EvaluationReport, FittedModel, Metrics, ModelArtifact, ModelError, ModelFamily, ModelSpec,
};
use crate::oracle::{evaluate_bc_set, oracle_reports_to_csv, OracleError, OracleReport};
use crate::synth::synth_corpus;
use crate::trace::{
    choose_step_count, clean_trace, cycle_period, estimate_heart_rate, interpolate_linear, parse_digitizer_csv,
    resample_trace, uniform_times, TraceError, SINGLE_CYCLE_STEPS,
};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const DATASET_FILE: &str = "dataset.csv";
pub const MODELS_DIR: &str = "models";
pub const EVALUATION_FILE: &str = "evaluation.csv";
pub const BC_DIR: &str = "bc";
pub const PEAK_FLOWS_FILE: &str = "peak_flows.csv";
pub const ORACLE_FILE: &str = "oracle.csv";
pub const REPORT_DIR: &str = "report";
const PEAK_FLOWS_HEADER: &str = "provenance,vessel,kg_per_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Synth,
    Train,
    Evaluate,
    Bcgen,
    Oracle,
    Report,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Synth,
        Command::Ingest,
        Command::Train,
        Command::Evaluate,
        Command::Bcgen,
        Command::Oracle,
        Command::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Synth => "synth",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Bcgen => "bcgen",
            Command::Oracle => "oracle",
            Command::Report => "report",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bc(#[from] BcError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

impl PipelineError {
    /// 1 for configuration problems, 2 for unreadable or invalid data,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Bc(BcError::InvalidGeometry(_) | BcError::MissingArea(_) | BcError::InvalidFluid(_)) => 1,
            PipelineError::Model(ModelError::Artifact(_) | ModelError::Feature(_) | ModelError::Trace(_)) => 2,
            PipelineError::Model(_) | PipelineError::Oracle(_) => 3,
            PipelineError::Feature(FeatureError::NonFinite) => 3,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn data_err(path: &Path, message: impl fmt::Display) -> PipelineError {
    PipelineError::Data {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, content: &str) -> Result<PathBuf, PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, content).map_err(io_err(path))?;
    Ok(path.to_path_buf())
}

/// One digitized recording listed in the traces manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub file: String,
    pub vessel: VesselId,
    pub case: CaseId,
    pub peak_times_s: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceManifest {
    #[serde(default)]
    pub trace: Vec<ManifestEntry>,
}

pub fn run_command(command: Command, config: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    config.validate()?;
    log::info!("running {command}");
    match command {
        Command::Synth => synth(config),
        Command::Ingest => ingest(config),
        Command::Train => train(config),
        Command::Evaluate => evaluate(config),
        Command::Bcgen => bcgen(config),
        Command::Oracle => oracle(config),
        Command::Report => report(config),
    }
}

fn synth(config: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let dir = config.output_path().join("traces");
    let corpus = synth_corpus::<f64>(config.seed, config.synth_noise)?;
    let mut manifest = TraceManifest::default();
    let mut written = Vec::new();
    for entry in corpus {
        let file = format!("{}.csv", entry.name);
        let mut csv = String::from("time_s,velocity_m_per_s\n");
        for (t, v) in entry.trace.points() {
            writeln!(csv, "{t},{v}").expect("string write");
        }
        written.push(write(&dir.join(&file), &csv)?);
        manifest.trace.push(ManifestEntry {
            file,
            vessel: entry.trace.vessel,
            case: entry.trace.case,
            peak_times_s: entry.peak_times,
            step_count: None,
        });
    }
    let text = toml::to_string(&manifest).expect("manifest serializes");
    written.push(write(&dir.join(MANIFEST_FILE), &text)?);
    Ok(written)
}

pub fn load_manifest(traces_dir: &Path) -> Result<TraceManifest, PipelineError> {
    let path = traces_dir.join(MANIFEST_FILE);
    toml::from_str(&read(&path)?).map_err(|e| data_err(&path, e.message()))
}

fn ingest(config: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let dir = config.traces_path();
    let manifest = load_manifest(&dir)?;
    if manifest.trace.is_empty() {
        return Err(data_err(&dir.join(MANIFEST_FILE), "no traces listed"));
    }
    let mut traces = Vec::new();
    for entry in &manifest.trace {
        let path = dir.join(&entry.file);
        let located = |e: TraceError| data_err(&path, e);
        let raw = parse_digitizer_csv::<f64>(&read(&path)?, entry.vessel, entry.case).map_err(located)?;
        let clean = clean_trace(&raw, config.diastole_fraction).map_err(located)?;
        let hr = estimate_heart_rate(&entry.peak_times_s).map_err(located)?;
        let n = config
            .step_count
            .or(entry.step_count)
            .unwrap_or_else(|| choose_step_count(&clean, hr));
        traces.push(resample_trace(&clean, n, hr).map_err(located)?);
    }
    let dataset = assemble_dataset(&traces)?;
    log::info!("dataset shape {:?}", dataset.shape());
    Ok(vec![write(
        &config.output_path().join(DATASET_FILE),
        &dataset.to_csv_string(),
    )?])
}

pub fn load_dataset(config: &PipelineConfig) -> Result<Dataset<f64>, PipelineError> {
    let path = config.output_path().join(DATASET_FILE);
    Dataset::from_csv_str(&read(&path)?).map_err(|e| data_err(&path, e))
}

pub fn prepare(config: &PipelineConfig, dataset: &Dataset<f64>) -> Result<PreparedData<f64>, PipelineError> {
    let split = split_dataset(dataset.len(), SplitRatios::default(), config.seed)?;
    let (vessels, cases) = encoding_maps(dataset);
    Ok(build_matrices(dataset, &split, (&vessels, &cases), None)?)
}

/// Resolves each roster entry to a concrete specification, tuning where
/// requested, and returns it with its validation RMSE.
fn select_spec(
    entry: &RosterEntry,
    chosen: &BTreeMap<String, ModelSpec>,
    data: &PreparedData<f64>,
    seed: u64,
) -> Result<ModelSpec, PipelineError> {
    if entry.family == ModelFamily::Voting {
        let members = entry.members.iter().map(|m| chosen[m].clone()).collect();
        return Ok(ModelSpec::voting(members));
    }
    let mut spec = ModelSpec {
        family: entry.family,
        hyperparameters: entry.hyperparameters.clone(),
        seed,
        members: vec![],
    };
    if entry.tune {
        let mut grid = entry.grid.clone().unwrap_or_else(|| default_grid(entry.family));
        for key in entry.hyperparameters.keys() {
            grid.0.remove(key);
        }
        let mut result = grid_search(
            entry.family,
            &grid,
            &data.train,
            &data.validation,
            &data.transform,
            seed,
        )?;
        for (k, v) in &entry.hyperparameters {
            result.best.hyperparameters.insert(k.clone(), v.clone());
        }
        log::info!(
            "{}: best {} (validation RMSE {:.5} m/s)",
            entry.name,
            describe_spec(&result.best),
            result.validation_rmse
        );
        spec = result.best;
    }
    Ok(spec)
}

fn train(config: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let dataset = load_dataset(config)?;
    let data = prepare(config, &dataset)?;
    let refit = data.train.concat(&data.validation);
    let dir = config.output_path().join(MODELS_DIR);
    let mut chosen: BTreeMap<String, ModelSpec> = BTreeMap::new();
    let mut fitted: BTreeMap<String, FittedModel<f64>> = BTreeMap::new();
    let mut written = Vec::new();
    for entry in &config.roster {
        let spec = select_spec(entry, &chosen, &data, config.seed)?;
        let started = Instant::now();
        let validation_model = fit_model(&spec, &data.train)?;
        let validation_rmse = compute_rmse(
            &data
                .transform
                .inverse_target(&validation_model.predict(&data.validation.x)),
            &data.validation.velocity,
        )?;
        let model = if spec.family == ModelFamily::Voting {
            FittedModel::Voting(entry.members.iter().map(|m| fitted[m].clone()).collect())
        } else {
            fit_model(&spec, &refit)?
        };
        let test_rmse = compute_rmse(
            &data.transform.inverse_target(&model.predict(&data.test.x)),
            &data.test.velocity,
        )?;
        log::info!(
            "{}: test RMSE {test_rmse:.5} m/s, fitted in {:.2?}",
            entry.name,
            started.elapsed()
        );
        let artifact = ModelArtifact::new(&entry.name, spec.clone(), data.transform.clone(), model.clone())
            .with_metrics(Metrics {
                validation_rmse: Some(validation_rmse),
                test_rmse: Some(test_rmse),
            });
        written.push(write(&dir.join(format!("{}.json", entry.name)), &artifact.to_json()?)?);
        chosen.insert(entry.name.clone(), spec);
        fitted.insert(entry.name.clone(), model);
    }
    Ok(written)
}

pub fn load_artifact(config: &PipelineConfig, name: &str) -> Result<ModelArtifact<f64>, PipelineError> {
    let path = config.output_path().join(MODELS_DIR).join(format!("{name}.json"));
    ModelArtifact::from_json(&read(&path)?).map_err(|e| data_err(&path, e))
}

fn evaluate(config: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let dataset = load_dataset(config)?;
    let split = split_dataset(dataset.len(), SplitRatios::default(), config.seed)?;
    let test_rows: Vec<DatasetRow<f64>> = split.test.iter().map(|&i| dataset.rows[i]).collect();
    let features: Vec<_> = test_rows
        .iter()
        .map(|r| crate::features::FeatureRow {
            time: r.time,
            vessel: r.vessel,
            case: r.case,
            heart_rate: r.heart_rate,
        })
        .collect();
    let truth: Vec<f64> = test_rows.iter().map(|r| r.velocity).collect();
    let mut report = EvaluationReport::default();
    for entry in &config.roster {
        let artifact = load_artifact(config, &entry.name)?;
        let rmse = compute_rmse(&artifact.predict(&features)?, &truth)?;
        report.entries.push(EvaluationEntry {
            model: entry.name.clone(),
            family: artifact.spec.family,
            rmse,
            hyperparameters: describe_spec(&artifact.spec),
        });
    }
    Ok(vec![write(
        &config.output_path().join(EVALUATION_FILE),
        &report.to_csv_string(),
    )?])
}

pub fn load_geometry(config: &PipelineConfig) -> Result<VesselGeometry<f64>, PipelineError> {
    match &config.geometry {
        Some(p) => {
            let path = config.resolve(p);
            VesselGeometry::from_toml_str(&read(&path)?).map_err(|e| {
                PipelineError::Config(ConfigError::Invalid {
                    field: "geometry".into(),
                    message: format!("{}: {e}", path.display()),
                })
            })
        }
        None => {
            log::warn!("no geometry configured; using synthetic placeholder areas");
            Ok(VesselGeometry::synthetic())
        }
    }
}

fn fluid(config: &PipelineConfig) -> Result<FluidProperties<f64>, PipelineError> {
    Ok(FluidProperties::new(config.density, config.viscosity)?)
}

/// Models receiving BC sets: the explicit list, else the best by test RMSE.
pub fn bc_model_names(config: &PipelineConfig) -> Result<Vec<String>, PipelineError> {
    if let Some(models) = &config.bc_models {
        return Ok(models.clone());
    }
    let path = config.output_path().join(EVALUATION_FILE);
    let report = EvaluationReport::<f64>::from_csv_str(&read(&path)?).map_err(|e| data_err(&path, e))?;
    Ok(report.top(config.top_models))
}

/// Mass-flow profiles for the inlet and outlets over one evaluation cycle.
pub fn predicted_profiles(
    artifact: &ModelArtifact<f64>,
    config: &PipelineConfig,
    geometry: &VesselGeometry<f64>,
    fluid: &FluidProperties<f64>,
) -> Result<Profiles, PipelineError> {
    let mut out = BTreeMap::new();
    for vessel in VesselId::BOUNDARIES {
        let trace = predict_velocity_profile(
            artifact,
            vessel,
            config.evaluation_case,
            config.evaluation_heart_rate,
            SINGLE_CYCLE_STEPS,
        )?;
        out.insert(vessel, velocity_to_massflow(&trace, geometry, fluid)?);
    }
    Ok(out)
}

pub type Profiles = BTreeMap<VesselId, MassFlowProfile<f64>>;

/// Baseline from the measurements themselves: each vessel's peak measured
/// velocity converted to mass flow, and the first matching recording
/// stretched onto the evaluation cycle for transient export.
pub fn measured_baseline(
    dataset: &Dataset<f64>,
    config: &PipelineConfig,
    geometry: &VesselGeometry<f64>,
    fluid: &FluidProperties<f64>,
) -> Result<(OutletFlows<f64>, Profiles), PipelineError> {
    let period = cycle_period(config.evaluation_heart_rate);
    let times = uniform_times(period, SINGLE_CYCLE_STEPS);
    let segments = dataset.trace_segments();
    let mut peaks = BTreeMap::new();
    let mut profiles = BTreeMap::new();
    for vessel in VesselId::OUTLETS {
        let matching: Vec<&[DatasetRow<f64>]> = segments
            .iter()
            .copied()
            .filter(|s| s[0].vessel == vessel && s[0].case == config.evaluation_case)
            .collect();
        let first = matching.first().ok_or_else(|| {
            data_err(
                &config.output_path().join(DATASET_FILE),
                format!(
                    "no {} recording of `{vessel}` for the not-adjusted baseline",
                    config.evaluation_case
                ),
            )
        })?;
        let area = geometry.area(vessel)?;
        let peak = matching
            .iter()
            .flat_map(|s| s.iter())
            .map(|r| r.velocity)
            .fold(0.0, f64::max);
        peaks.insert(vessel, fluid.density * area * peak);
        let own_period = cycle_period(first[0].heart_rate);
        let points: Vec<(f64, f64)> = first.iter().map(|r| (r.time, r.velocity)).collect();
        let flow = times
            .iter()
            .map(|&t| fluid.density * area * interpolate_linear(&points, t * own_period / period))
            .collect();
        profiles.insert(vessel, MassFlowProfile::new(times.clone(), flow, vessel)?);
    }
    profiles.insert(VesselId::AscendingAorta, continuity_inlet_profile(&profiles)?);
    Ok((OutletFlows::from_map(&peaks)?, profiles))
}

fn bc_file_name(provenance: &str, bc_type: BcType) -> String {
    format!("{provenance}_{bc_type}.bc")
}

fn emit_sets(
    dir: &Path,
    provenance: &str,
    flows: &OutletFlows<f64>,
    mode: ExportMode,
    profiles: &Profiles,
    written: &mut Vec<PathBuf>,
) -> Result<(), PipelineError> {
    for bc_type in BcType::ALL {
        let set = assemble_bc_set(bc_type, flows, provenance)?;
        let text = export_bc(&set, mode, Some(profiles))?;
        written.push(write(&dir.join(bc_file_name(provenance, bc_type)), &text)?);
    }
    Ok(())
}

fn bcgen(config: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let geometry = load_geometry(config)?;
    let fluid = fluid(config)?;
    let names = bc_model_names(config)?;
    let dir = config.output_path().join(BC_DIR);
    if dir.exists() {
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.extension().is_some_and(|e| e == "bc") {
                fs::remove_file(&path).map_err(io_err(&path))?;
            }
        }
    }
    let mut written = Vec::new();
    let mut peak_rows = String::from(PEAK_FLOWS_HEADER);
    peak_rows.push('\n');
    let mut record = |name: &str, flows: &OutletFlows<f64>| {
        for (v, m) in flows.iter() {
            writeln!(peak_rows, "{name},{v},{m}").expect("string write");
        }
    };
    for name in &names {
        let artifact = load_artifact(config, name)?;
        let mut profiles = predicted_profiles(&artifact, config, &geometry, &fluid)?;
        let (snap, flows) = snapshot_outlet_flows(&profiles)?;
        log::info!("{name}: inlet peak at t = {:.4} s", snap.t_peak);
        profiles.insert(VesselId::AscendingAorta, continuity_inlet_profile(&profiles)?);
        emit_sets(&dir, name, &flows, config.bc_mode, &profiles, &mut written)?;
        record(name, &flows);
    }
    let dataset = load_dataset(config)?;
    let (flows, profiles) = measured_baseline(&dataset, config, &geometry, &fluid)?;
    emit_sets(&dir, NOT_ADJUSTED, &flows, config.bc_mode, &profiles, &mut written)?;
    record(NOT_ADJUSTED, &flows);
    written.push(write(&dir.join(PEAK_FLOWS_FILE), &peak_rows)?);
    Ok(written)
}

pub fn load_peak_flows(path: &Path) -> Result<BTreeMap<String, OutletFlows<f64>>, PipelineError> {
    let text = read(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(PEAK_FLOWS_HEADER) {
        return Err(data_err(path, "peak flow table header mismatch"));
    }
    let mut raw: BTreeMap<String, BTreeMap<VesselId, f64>> = BTreeMap::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let bad = || data_err(path, format!("malformed row `{line}`"));
        if cells.len() != 3 {
            return Err(bad());
        }
        let vessel: VesselId = cells[1].parse().map_err(|_| bad())?;
        let value: f64 = cells[2].parse().map_err(|_| bad())?;
        raw.entry(cells[0].to_string()).or_default().insert(vessel, value);
    }
    raw.into_iter()
        .map(|(k, m)| Ok((k, OutletFlows::from_map(&m).map_err(|e| data_err(path, e))?)))
        .collect()
}

/// Every BC file under the output directory, sorted by file name.
pub fn load_bc_sets(config: &PipelineConfig) -> Result<Vec<BoundaryConditionSet<f64>>, PipelineError> {
    let dir = config.output_path().join(BC_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(io_err(&dir))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(&dir)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "bc"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(data_err(&dir, "no BC files; run bcgen first"));
    }
    paths
        .iter()
        .map(|p| Ok(parse_bc::<f64>(&read(p)?).map_err(|e| data_err(p, e))?.set))
        .collect()
}

fn oracle(config: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let geometry = load_geometry(config)?;
    let fluid = fluid(config)?;
    let sets = load_bc_sets(config)?;
    let reference = load_peak_flows(&config.output_path().join(BC_DIR).join(PEAK_FLOWS_FILE))?;
    let reports: Vec<OracleReport<f64>> = sets
        .iter()
        .map(|s| {
            evaluate_bc_set(
                s,
                &geometry,
                &fluid,
                config.measured_coarctation_velocity,
                reference.get(&s.provenance),
            )
        })
        .collect::<Result<_, _>>()?;
    for r in reports.iter().filter(|r| r.flags_intervention()) {
        log::info!(
            "{} {}: pressure drop {:.1} mmHg exceeds the intervention threshold",
            r.provenance,
            r.bc_type,
            r.pressure_drop
        );
    }
    Ok(vec![write(
        &config.output_path().join(ORACLE_FILE),
        &oracle_reports_to_csv(&reports),
    )?])
}

fn report(config: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let sets = load_bc_sets(config)?;
    let dir = config.output_path().join(REPORT_DIR);
    let mut values = String::from("provenance,bc_type,vessel,kind,kg_per_s\n");
    for s in &sets {
        for b in s.boundaries() {
            if let Some(v) = b.value {
                writeln!(values, "{},{},{},{},{v}", s.provenance, s.bc_type, b.vessel, b.kind).expect("string write");
            }
        }
    }
    let bc3: Vec<BoundaryConditionSet<f64>> = sets
        .iter()
        .filter(|s| s.bc_type == BcType::BC3 && s.provenance != NOT_ADJUSTED)
        .cloned()
        .collect();
    let stats = bc_deviation_stats(&bc3)?;
    let mut deviation = String::from("vessel,mean_kg_per_s,mean_abs_deviation_kg_per_s,percent_deviation,n_models\n");
    for (vessel, d) in &stats {
        writeln!(
            deviation,
            "{vessel},{},{},{},{}",
            d.mean, d.mean_abs_deviation, d.percent, d.count
        )
        .expect("string write");
    }
    let full: Vec<&BoundaryConditionSet<f64>> = sets.iter().filter(|s| s.bc_type == BcType::BC3).collect();
    Ok(vec![
        write(&dir.join("bc_values.csv"), &values)?,
        write(&dir.join("deviation.csv"), &deviation)?,
        write(&dir.join("bc_values.svg"), &bar_chart_svg(&full))?,
    ])
}

/// Grouped bars: one group per boundary, one bar per provenance.
pub fn bar_chart_svg(sets: &[&BoundaryConditionSet<f64>]) -> String {
    const W: f64 = 900.0;
    const H: f64 = 420.0;
    const LEFT: f64 = 70.0;
    const BOTTOM: f64 = 60.0;
    const TOP: f64 = 30.0;
    const PALETTE: [&str; 8] = [
        "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f",
    ];
    let max = sets
        .iter()
        .flat_map(|s| s.boundaries().iter().filter_map(|b| b.value))
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let plot_h = H - BOTTOM - TOP;
    let group_w = (W - LEFT - 20.0) / VesselId::BOUNDARIES.len() as f64;
    let bar_w = group_w * 0.8 / sets.len().max(1) as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{LEFT}" y="18">Peak mass flow per boundary (kg/s)</text>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#,
        H - BOTTOM
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        H - BOTTOM,
        W - 20.0
    );
    for tick in 0..=4 {
        let v = max * tick as f64 / 4.0;
        let y = H - BOTTOM - plot_h * tick as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.3}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    for (g, vessel) in VesselId::BOUNDARIES.iter().enumerate() {
        let x0 = LEFT + g as f64 * group_w + group_w * 0.1;
        for (i, s) in sets.iter().enumerate() {
            let Some(v) = s.value(*vessel) else { continue };
            let h = plot_h * v / max;
            let _ = writeln!(
                svg,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"><title>{} {vessel}: {v}</title></rect>"#,
                x0 + i as f64 * bar_w,
                H - BOTTOM - h,
                bar_w,
                h,
                PALETTE[i % PALETTE.len()],
                s.provenance
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{vessel}</text>"#,
            x0 + group_w * 0.4,
            H - BOTTOM + 16.0
        );
    }
    for (i, s) in sets.iter().enumerate() {
        let x = LEFT + (i % 4) as f64 * 200.0;
        let y = H - 24.0 + (i / 4) as f64 * 14.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/>"#,
            y - 9.0,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{y}">{}</text>"#, x + 14.0, s.provenance);
    }
    svg.push_str("</svg>\n");
    svg
}
