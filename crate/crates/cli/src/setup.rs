//! Config sections shared by several commands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use dcdgd::consensus::{self, ConsensusMatrix};
use dcdgd::objectives::{
    load_csv_dataset, make_synthetic_five, partition_even, CsvOptions, GlobalObjective, LocalObjective,
    LogisticNonconvex, ObjectiveError,
};

use crate::{CliError, Config, ConfigError, Overrides};

/// The `[experiment]` section.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub seed: u64,
    pub trials: usize,
    pub iterations: usize,
    pub out_dir: PathBuf,
}

pub fn experiment(cfg: &Config, kind: &str, ov: &Overrides, default_trials: usize) -> Result<Experiment, CliError> {
    let found: String = cfg.require("experiment", "kind")?;
    if found != kind {
        return Err(ConfigError {
            line: None,
            key: Some("[experiment] kind".into()),
            msg: format!("this command runs `{kind}` experiments, the file declares `{found}`"),
        }
        .into());
    }
    // Keys are read even when overridden so they are not reported as unknown.
    let seed = ov.seed.unwrap_or(cfg.get_or("experiment", "seed", 0)?);
    let trials = ov.trials.unwrap_or(cfg.get_or("experiment", "trials", default_trials)?);
    let iterations = ov.iterations.unwrap_or(cfg.get_or("experiment", "iterations", 300)?);
    if trials == 0 || iterations == 0 {
        return Err(ConfigError::new("trials and iterations must be at least 1").into());
    }
    let configured = cfg.raw("experiment", "out_dir").map_or_else(|| PathBuf::from("out"), |v| cfg.resolve(&v));
    let out_dir = ov.out_dir.clone().unwrap_or(configured);
    Ok(Experiment { seed, trials, iterations, out_dir })
}

/// A validated matrix and the name it is reported under.
#[derive(Debug, Clone)]
pub struct Network {
    pub name: String,
    pub matrix: ConsensusMatrix,
}

pub fn load_network(path: &Path) -> Result<Network, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read matrix {}: {e}", path.display())))?;
    let matrix = consensus::read_matrix(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let name = path.file_stem().map_or_else(|| "matrix".into(), |s| s.to_string_lossy().into_owned());
    Ok(Network { name, matrix })
}

/// `[network] matrix = a.txt; b.txt`.
pub fn networks(cfg: &Config) -> Result<Vec<Network>, CliError> {
    let paths = cfg.paths("network", "matrix")?.ok_or_else(|| ConfigError {
        line: None,
        key: Some("[network] matrix".into()),
        msg: "required key is missing".into(),
    })?;
    paths.iter().map(|p| load_network(p)).collect()
}

/// The `[objective]` section: `kind = synthetic-five | logistic`.
pub fn objective(cfg: &Config, nodes: usize, seed: u64) -> Result<GlobalObjective, CliError> {
    let kind: String = cfg.get_or("objective", "kind", "synthetic-five".to_string())?;
    let obj = match kind.as_str() {
        "synthetic-five" => {
            if nodes != 5 {
                return Err(CliError::Input(format!("the synthetic objective has 5 nodes, the network has {nodes}")));
            }
            let dim = cfg.get_or("objective", "dim", 10usize)?;
            let obj_seed = cfg.get_or("objective", "seed", 0u64)?;
            make_synthetic_five(dim, obj_seed).map_err(objective_error)?
        }
        "logistic" => logistic(cfg, nodes, seed)?,
        other => {
            return Err(ConfigError {
                line: None,
                key: Some("[objective] kind".into()),
                msg: format!("unknown objective {other:?} (expected synthetic-five or logistic)"),
            }
            .into())
        }
    };
    with_reference(cfg, obj)
}

fn logistic(cfg: &Config, nodes: usize, seed: u64) -> Result<GlobalObjective, CliError> {
    let path = cfg.path("dataset", "path", false)?.ok_or_else(|| ConfigError {
        line: None,
        key: Some("[dataset] path".into()),
        msg: "required key is missing".into(),
    })?;
    let features = cfg.get_or("dataset", "features", 57usize)?;
    let opts = CsvOptions {
        feature_count: features,
        label_column: cfg.get_or("dataset", "label_column", features)?,
        standardize: cfg.get_or("dataset", "standardize", true)?,
        checksum: cfg.get("dataset", "checksum")?,
    };
    let rho = cfg.get_or("dataset", "rho", 0.1f64)?;
    let partition_seed = cfg.get_or("dataset", "partition_seed", seed)?;
    if !path.exists() {
        return Err(missing_dataset(&path, features));
    }
    let data = load_csv_dataset(&path, &opts).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let part = partition_even(data.len(), nodes, partition_seed).map_err(objective_error)?;
    let locals = part
        .blocks
        .iter()
        .map(|rows| Ok(Arc::new(LogisticNonconvex::new(&data, rows, rho)?) as Arc<dyn LocalObjective>))
        .collect::<Result<Vec<_>, ObjectiveError>>()
        .map_err(objective_error)?;
    GlobalObjective::new(locals).map_err(objective_error)
}

pub fn missing_dataset(path: &Path, features: usize) -> CliError {
    CliError::Input(format!(
        "dataset {} not found. Expected comma-separated text, one example per line: \
         {features} numeric feature columns followed by a 0/1 label (the layout of the UCI \
         Spambase `spambase.data` file). Nothing is downloaded; place the file there or set \
         [dataset] path.",
        path.display()
    ))
}

/// `f_ref = centralized | none | <number>`, with `f_ref_iterations` for the
/// centralized reference.
fn with_reference(cfg: &Config, obj: GlobalObjective) -> Result<GlobalObjective, CliError> {
    let policy: String = cfg.get_or("objective", "f_ref", "centralized".to_string())?;
    let iterations = cfg.get_or("objective", "f_ref_iterations", 100_000usize)?;
    match policy.as_str() {
        "none" => Ok(obj),
        "centralized" => {
            let f = obj.centralized_reference(iterations).map_err(objective_error)?;
            Ok(obj.with_f_ref(f))
        }
        number => number.parse::<f64>().map(|f| obj.clone().with_f_ref(f)).map_err(|_| {
            ConfigError {
                line: None,
                key: Some("[objective] f_ref".into()),
                msg: format!("expected centralized, none or a number, found {number:?}"),
            }
            .into()
        }),
    }
}

fn objective_error(e: ObjectiveError) -> CliError {
    CliError::Input(e.to_string())
}
