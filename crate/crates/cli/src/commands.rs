//! Subcommand implementations and the error-to-exit-code policy.

use std::path::{Path, PathBuf};
use std::time::Instant;

use pyrf::edge::{run_edge, EdgeConfig, EdgeError};
use pyrf::forest::{fit_forest, ForestError, ForestModel, HyperParams};
use pyrf::optimizer::{minimize, ConstrainedProblem, ConstraintSpec, LagFill, OptimizerError};
use pyrf::plantsim::{generate_dataset, parse_config, write_config, SimError, SimPlantConfig};
use pyrf::telemetry::{
    fit_normalizer, flatten, ingest_csv, stream_to_csv_string, FlattenOptions, TelemetryError,
    TelemetrySchema,
};
use pyrf::tuner::{default_grid, grid_search, CVReport, TunerError};

use crate::manifest::RunManifest;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Schema(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Schema(m) | CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Schema(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<TelemetryError> for CliError {
    fn from(e: TelemetryError) -> Self {
        match e {
            TelemetryError::Io(_) => CliError::Io(e.to_string()),
            TelemetryError::Csv(ref c) if c.is_io_error() => CliError::Io(e.to_string()),
            _ => CliError::Schema(e.to_string()),
        }
    }
}

impl From<ForestError> for CliError {
    fn from(e: ForestError) -> Self {
        match e {
            ForestError::InvalidParams(_) => CliError::Config(e.to_string()),
            ForestError::Io(_) | ForestError::Decode(_) | ForestError::Meta(_) => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Schema(e.to_string()),
        }
    }
}

impl From<TunerError> for CliError {
    fn from(e: TunerError) -> Self {
        match e {
            TunerError::EmptyGrid | TunerError::TooFewRows { .. } => CliError::Config(e.to_string()),
            _ => CliError::Schema(e.to_string()),
        }
    }
}

impl From<OptimizerError> for CliError {
    fn from(e: OptimizerError) -> Self {
        match e {
            OptimizerError::OutOfBounds { .. }
            | OptimizerError::InvalidBudget
            | OptimizerError::GridTooLarge { .. } => CliError::Config(e.to_string()),
            OptimizerError::Schema(_) => CliError::Schema(e.to_string()),
            OptimizerError::Forest(f) => f.into(),
        }
    }
}

impl From<EdgeError> for CliError {
    fn from(e: EdgeError) -> Self {
        match e {
            EdgeError::Config(_) => CliError::Config(e.to_string()),
            EdgeError::Schema(_) | EdgeError::NoActuals => CliError::Schema(e.to_string()),
            EdgeError::Telemetry(t) => t.into(),
            EdgeError::Forest(f) => f.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn schema_from_flags(states: Option<String>, sensors: Option<String>) -> TelemetrySchema {
    let default = SimPlantConfig::schema();
    let split = |s: String| -> Vec<String> {
        s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect()
    };
    TelemetrySchema {
        state_names: states.map(split).unwrap_or(default.state_names),
        sensor_names: sensors.map(split).unwrap_or(default.sensor_names),
    }
}

fn load_sim_config(path: &Option<PathBuf>, seed: Option<u64>) -> Result<(SimPlantConfig, String), CliError> {
    let text = match path {
        Some(p) => read_file(p)?,
        None => write_config(&SimPlantConfig::default()),
    };
    let mut config = parse_config(&text)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok((config, text))
}

pub fn simulate(
    config_path: Option<PathBuf>,
    n: usize,
    out: PathBuf,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let (config, config_text) = load_sim_config(&config_path, seed)?;
    let stream = generate_dataset(&config, n)?;
    write_file(&out, &stream_to_csv_string(&stream))?;
    let mut manifest = RunManifest::new("simulate")
        .seed(config.seed)
        .config_digest(config_text.as_bytes())
        .output(&out);
    if let Some(p) = &config_path {
        manifest = manifest.input(p);
    }
    manifest.write(&out, started)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn tune(
    input: PathBuf,
    target: String,
    lag: usize,
    grid_path: Option<PathBuf>,
    k: usize,
    seed: u64,
    out: PathBuf,
    states: Option<String>,
    sensors: Option<String>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let schema = schema_from_flags(states, sensors);
    let stream = ingest_csv(&input, &schema)?;
    let table = flatten(&stream, lag, &[target.as_str()], &FlattenOptions::default())?;
    let grid: Vec<HyperParams> = match &grid_path {
        None => default_grid(),
        Some(p) => serde_json::from_str(&read_file(p)?)
            .map_err(|e| CliError::Config(format!("grid file {}: {e}", p.display())))?,
    };
    let report = grid_search(&table, &target, &grid, k, seed)?;
    write_file(&out, &report.to_json())?;
    let mut manifest = RunManifest::new("tune").seed(seed).input(&input).output(&out);
    if let Some(p) = &grid_path {
        manifest = manifest.input(p);
    }
    manifest.write(&out, started)?;
    Ok(())
}

pub struct TrainArgs {
    pub input: PathBuf,
    pub target: String,
    pub lag: usize,
    pub cv_report: Option<PathBuf>,
    pub estimators: Option<usize>,
    pub min_samples_split: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub max_depth: Option<usize>,
    pub features_per_split: Option<usize>,
    pub no_bootstrap: bool,
    pub seed: u64,
    pub out: PathBuf,
    pub states: Option<String>,
    pub sensors: Option<String>,
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut hyper = match &args.cv_report {
        Some(p) => {
            let report = CVReport::from_json(&read_file(p)?)
                .map_err(|e| CliError::Config(format!("cv report {}: {e}", p.display())))?;
            report.best_params().clone()
        }
        None => HyperParams::default(),
    };
    if let Some(v) = args.estimators {
        hyper.n_estimators = v;
    }
    if let Some(v) = args.min_samples_split {
        hyper.min_samples_split = v;
    }
    if let Some(v) = args.min_samples_leaf {
        hyper.min_samples_leaf = v;
    }
    if let Some(v) = args.max_depth {
        hyper.max_depth = Some(v);
    }
    if let Some(v) = args.features_per_split {
        hyper.features_per_split = Some(v);
    }
    if args.no_bootstrap {
        hyper.bootstrap = false;
    }
    hyper.seed = args.seed;

    let schema = schema_from_flags(args.states, args.sensors);
    let stream = ingest_csv(&args.input, &schema)?;
    let table = flatten(&stream, args.lag, &[args.target.as_str()], &FlattenOptions::default())?;
    let table = fit_normalizer(table)?;
    let model = fit_forest(&table, &args.target, &hyper)?;
    model.save(&args.out)?;

    let mut manifest = RunManifest::new("train")
        .seed(args.seed)
        .input(&args.input)
        .output(&args.out)
        .output(&pyrf::forest::sidecar_path(&args.out));
    if let Some(p) = &args.cv_report {
        manifest = manifest.input(p);
    }
    manifest.write(&args.out, started)?;
    Ok(())
}

pub fn predict(model_path: PathBuf, input: PathBuf, out: PathBuf) -> Result<(), CliError> {
    let started = Instant::now();
    let model = ForestModel::load(&model_path)?;
    let meta = &model.meta;

    // The target column is optional at inference time; include it in
    // the schema only when present so actuals ride along.
    let header = csv::Reader::from_path(&input)
        .map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?
        .headers()
        .map_err(|e| CliError::Schema(format!("{}: {e}", input.display())))?
        .clone();
    let has_target = header.iter().any(|h| h == meta.target_name);
    let schema = TelemetrySchema {
        state_names: meta.state_names.clone(),
        sensor_names: if has_target {
            vec![meta.target_name.clone()]
        } else {
            Vec::new()
        },
    };
    let stream = ingest_csv(&input, &schema)?;
    let table = flatten(&stream, meta.lag, &[], &FlattenOptions::default())?;

    let actual_by_ts: std::collections::HashMap<i64, f64> = if has_target {
        stream
            .records
            .iter()
            .filter_map(|r| Some((r.timestamp, r.sensors[0]?)))
            .collect()
    } else {
        Default::default()
    };

    let mut csv_out = String::from("timestamp,prediction,actual\n");
    for i in 0..table.n_rows {
        let ts = table.row_timestamps[i];
        let prediction = model.predict_raw(table.row(i))?;
        csv_out.push_str(&format!("{ts},{prediction},"));
        if let Some(actual) = actual_by_ts.get(&ts) {
            csv_out.push_str(&format!("{actual}"));
        }
        csv_out.push('\n');
    }
    write_file(&out, &csv_out)?;

    RunManifest::new("predict")
        .seed(model.forest.seed)
        .input(&model_path)
        .input(&input)
        .output(&out)
        .write(&out, started)?;
    Ok(())
}

fn parse_triple(spec: &str, what: &str) -> Result<(String, f64, f64), CliError> {
    let parts: Vec<&str> = spec.rsplitn(3, ':').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!(
            "{what} `{spec}` must be `<name-or-path>:<lower>:<upper>`"
        )));
    }
    let upper: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Config(format!("{what} `{spec}`: bad upper bound")))?;
    let lower: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Config(format!("{what} `{spec}`: bad lower bound")))?;
    Ok((parts[2].to_string(), lower, upper))
}

pub fn optimize(
    objective_path: PathBuf,
    constraint_specs: Vec<String>,
    bound_specs: Vec<String>,
    config_path: Option<PathBuf>,
    budget: usize,
    seed: u64,
    out: PathBuf,
) -> Result<(), CliError> {
    let started = Instant::now();
    let objective = ForestModel::load(&objective_path)?;
    let state_names = objective.meta.state_names.clone();

    let mut constraint_paths = Vec::new();
    let mut constraints = Vec::new();
    for spec in &constraint_specs {
        let (path, lower, upper) = parse_triple(spec, "constraint")?;
        let path = PathBuf::from(path);
        let model = ForestModel::load(&path)?;
        constraint_paths.push(path);
        constraints.push(ConstraintSpec { model, lower, upper });
    }

    // Decision bounds: per-state flags override plant-config defaults.
    let mut bounds: Vec<Option<(f64, f64)>> = vec![None; state_names.len()];
    if let Some(p) = &config_path {
        let (sim, _) = load_sim_config(&Some(p.clone()), None)?;
        for (i, name) in state_names.iter().enumerate() {
            if let Some(j) = pyrf::plantsim::STATE_NAMES.iter().position(|s| s == name) {
                bounds[i] = Some(sim.state_bounds[j]);
            }
        }
    }
    for spec in &bound_specs {
        let (name, lower, upper) = parse_triple(spec, "bound")?;
        let i = state_names
            .iter()
            .position(|s| *s == name)
            .ok_or_else(|| CliError::Config(format!("bound names unknown state `{name}`")))?;
        bounds[i] = Some((lower, upper));
    }
    let decision_bounds: Vec<(f64, f64)> = bounds
        .into_iter()
        .enumerate()
        .map(|(i, b)| {
            b.ok_or_else(|| {
                CliError::Config(format!(
                    "no decision bounds for state `{}`; pass --bounds or --config",
                    state_names[i]
                ))
            })
        })
        .collect::<Result<_, _>>()?;

    let problem = ConstrainedProblem::new(objective, constraints, decision_bounds, LagFill::SteadyState)?;
    let trace = minimize(&problem, budget, seed)?;

    write_file(&out, &trace.to_csv_string(&problem))?;
    let summary_path = {
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".summary.json");
        out.with_file_name(name)
    };
    write_file(&summary_path, &trace.summary_json(&problem))?;

    let mut manifest = RunManifest::new("optimize")
        .seed(seed)
        .input(&objective_path)
        .output(&out)
        .output(&summary_path);
    for p in &constraint_paths {
        manifest = manifest.input(p);
    }
    if let Some(p) = &config_path {
        manifest = manifest.input(p);
    }
    manifest.write(&out, started)?;
    Ok(())
}

pub struct EdgeSimArgs {
    pub input: PathBuf,
    pub model: PathBuf,
    pub duration: i64,
    pub period: i64,
    pub window: usize,
    pub edge_estimators: usize,
    pub edge_depth: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

pub fn edge_sim(args: EdgeSimArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let warm = ForestModel::load(&args.model)?;
    let schema = TelemetrySchema {
        state_names: warm.meta.state_names.clone(),
        sensor_names: vec![warm.meta.target_name.clone()],
    };
    let stream = ingest_csv(&args.input, &schema)?;

    let config = EdgeConfig {
        retrain_period_s: args.period,
        window: args.window,
        edge_hyper: HyperParams {
            n_estimators: args.edge_estimators,
            max_depth: Some(args.edge_depth),
            seed: args.seed,
            ..HyperParams::default()
        },
        warm_model: warm,
    };
    let run = run_edge(&config, &stream, args.duration)?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out_dir.display())))?;
    let log_path = args.out_dir.join("edge_log.csv");
    write_file(&log_path, &run.log.to_csv_string())?;
    let mut manifest = RunManifest::new("edge-sim")
        .seed(args.seed)
        .input(&args.input)
        .input(&args.model)
        .output(&log_path);
    for (id, model) in &run.models {
        let path = args.out_dir.join(format!("model_{id}.pyrf"));
        model.save(&path)?;
        manifest = manifest.output(&path);
    }
    manifest.write(&log_path, started)?;
    Ok(())
}
