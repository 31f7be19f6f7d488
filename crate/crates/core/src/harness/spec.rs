//! Experiment files.
//!
//! An experiment is one flat `key = value` table. Solver keys (see
//! [`SolverConfig`]) and front keys (see [`FrontConfig`]) sit next to the
//! experiment keys below; every key is optional and unknown keys are errors.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `problem` | `"test1"`, `"test2"`, `"dataset"` or `"synthetic"` | `"test1"` |
//! | `sigma` | noise level of the analytic problems | `0.1` |
//! | `noise_bounded` | redraw noise until it is within `cap_f`, `cap_g` | `false` |
//! | `cap_f`, `cap_g` | noise caps | `1.0` |
//! | `shared_gradient_noise` | one gradient noise vector for all objectives | `false` |
//! | `data_path` | data file, relative to the experiment file | none |
//! | `data_format` | `"csv"` or `"libsvm"` | `"csv"` |
//! | `has_header` | CSV header row | `false` |
//! | `label_column` | CSV label column, 0-based | `0` |
//! | `label_convention` | `"plusminusone"` or `"zeroone"` | `"plusminusone"` |
//! | `sensitive_column` | feature that splits the rows into two groups, 0-based | `0` |
//! | `sensitive_value` | value of the first group (otherwise automatic) | none |
//! | `keep_sensitive` | keep the splitting feature in the model | `true` |
//! | `regularizers` | `[lambda_1, lambda_2]` | `[0.1, 0.1]` |
//! | `synthetic_rows`, `synthetic_dim`, `data_seed` | synthetic data shape and seed | `300`, `10`, `7` |
//! | `bounds` | sample-size constants: `"estimated"` or `"analytic"` | `"estimated"` |
//! | `value_bound`, `gradient_bound` | estimated constants | `1.0` |
//! | `algorithm` | `"smop"`, `"dmop"` or `"smg"` | `"smop"` |
//! | `smg_step0`, `smg_batch` | SMG step size `t0` (steps `t0 / sqrt(k + 1)`) and batch | `0.5`, `20` |
//! | `num_simulations` | independent runs, seeds `seed + i` | `10` |
//! | `parallelism` | worker threads, 0 for all cores | `0` |
//! | `x0` | start point | problem dependent |
//! | `output`, `output_format` | metric file and `"csv"` / `"json"` | none, `"csv"` |
//! | `archive_output` | front archive CSV | none |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, SolverConfig};
use crate::error::{Error, Result};
use crate::oracles::dataset::{load_dataset, DatasetFormat, DatasetOptions, LabelConvention};
use crate::oracles::{
    AnalyticProblem, FiniteSumProblem, NoiseSpec, NoisyProblem, OracleError, SampleSizeRule,
};
use crate::pareto::FrontConfig;
use crate::types::Oracle;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Smop,
    /// Deterministic trust region on exact (full-batch) information.
    Dmop,
    /// Simplified stochastic multi-gradient descent.
    Smg,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Smop => "smop",
            Algorithm::Dmop => "dmop",
            Algorithm::Smg => "smg",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = ConfigError;

    fn from_str(s: &str) -> std::result::Result<Self, ConfigError> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(ConfigError::invalid("output_format", format!("`{other}` is not csv or json"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    Analytic {
        problem: AnalyticProblem,
        noise: NoiseSpec,
    },
    Dataset {
        path: PathBuf,
        options: DatasetOptions,
        rule: SampleSizeRule,
    },
    Synthetic {
        rows: usize,
        dim: usize,
        regularizer: f64,
        data_seed: u64,
        rule: SampleSizeRule,
    },
}

impl ProblemSpec {
    /// Builds the oracle; data files are read here.
    pub fn build(&self) -> Result<Box<dyn Oracle>> {
        match self {
            ProblemSpec::Analytic { problem, noise } => {
                Ok(Box::new(NoisyProblem::new(*problem, *noise)?))
            }
            ProblemSpec::Dataset { path, options, rule } => {
                Ok(Box::new(load_dataset(path, options)?.with_rule(rule.clone())?))
            }
            ProblemSpec::Synthetic {
                rows,
                dim,
                regularizer,
                data_seed,
                rule,
            } => Ok(Box::new(
                FiniteSumProblem::synthetic(*rows, *dim, *regularizer, *data_seed)?
                    .with_rule(rule.clone())?,
            )),
        }
    }

    fn default_start(&self, dimension: usize) -> Vec<f64> {
        match self {
            ProblemSpec::Analytic {
                problem: AnalyticProblem::Test1,
                ..
            } => vec![9.0, 9.0],
            ProblemSpec::Analytic {
                problem: AnalyticProblem::Test2,
                ..
            } => vec![-0.5, 1.0],
            _ => vec![0.0; dimension],
        }
    }

    fn default_box(&self, dimension: usize) -> Vec<(f64, f64)> {
        match self {
            ProblemSpec::Analytic {
                problem: AnalyticProblem::Test1,
                ..
            } => vec![(-1.0, 6.0); 2],
            ProblemSpec::Analytic {
                problem: AnalyticProblem::Test2,
                ..
            } => vec![(-1.0, 2.0); 2],
            _ => vec![(-1.0, 1.0); dimension],
        }
    }
}

/// The experiment keys proper, before they are turned into a [`ProblemSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ExperimentKeys {
    problem: String,
    sigma: f64,
    noise_bounded: bool,
    cap_f: f64,
    cap_g: f64,
    shared_gradient_noise: bool,
    data_path: Option<String>,
    data_format: DatasetFormat,
    has_header: bool,
    label_column: usize,
    label_convention: LabelConvention,
    sensitive_column: usize,
    sensitive_value: Option<f64>,
    keep_sensitive: bool,
    regularizers: [f64; 2],
    synthetic_rows: usize,
    synthetic_dim: usize,
    data_seed: u64,
    bounds: String,
    value_bound: f64,
    gradient_bound: f64,
    algorithm: Algorithm,
    smg_step0: f64,
    smg_batch: usize,
    num_simulations: usize,
    parallelism: usize,
    x0: Option<Vec<f64>>,
    output: Option<String>,
    output_format: OutputFormat,
    archive_output: Option<String>,
}

impl Default for ExperimentKeys {
    fn default() -> Self {
        Self {
            problem: "test1".into(),
            sigma: 0.1,
            noise_bounded: false,
            cap_f: 1.0,
            cap_g: 1.0,
            shared_gradient_noise: false,
            data_path: None,
            data_format: DatasetFormat::Csv,
            has_header: false,
            label_column: 0,
            label_convention: LabelConvention::PlusMinusOne,
            sensitive_column: 0,
            sensitive_value: None,
            keep_sensitive: true,
            regularizers: [0.1, 0.1],
            synthetic_rows: 300,
            synthetic_dim: 10,
            data_seed: 7,
            bounds: "estimated".into(),
            value_bound: 1.0,
            gradient_bound: 1.0,
            algorithm: Algorithm::Smop,
            smg_step0: 0.5,
            smg_batch: 20,
            num_simulations: 10,
            parallelism: 0,
            x0: None,
            output: None,
            output_format: OutputFormat::Csv,
            archive_output: None,
        }
    }
}

/// Keys without a default value, absent from a serialized default table.
const OPTIONAL_KEYS: [&str; 5] = ["data_path", "sensitive_value", "x0", "output", "archive_output"];

/// Settings of the multi-gradient baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmgConfig {
    pub step0: f64,
    pub batch: usize,
}

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub algorithm: Algorithm,
    pub solver: SolverConfig,
    pub front: FrontConfig,
    pub smg: SmgConfig,
    pub num_simulations: usize,
    pub parallelism: usize,
    pub x0: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
    pub output_format: OutputFormat,
    pub archive_output: Option<PathBuf>,
    table: toml::Table,
}

fn parse_err(e: impl fmt::Display) -> ConfigError {
    ConfigError::Parse(e.to_string())
}

fn table_keys<T: Serialize>(value: T) -> Vec<String> {
    toml::Table::try_from(value)
        .map(|t| t.keys().cloned().collect())
        .unwrap_or_default()
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

impl ExperimentSpec {
    /// Names of every key an experiment file may contain.
    pub fn keys() -> Vec<String> {
        let mut keys = table_keys(ExperimentKeys::default());
        keys.extend(OPTIONAL_KEYS.iter().map(|k| k.to_string()));
        keys.extend(SolverConfig::keys());
        keys.extend(table_keys(FrontConfig::default()));
        keys.sort();
        keys
    }

    pub fn from_kv_str(text: &str) -> std::result::Result<Self, ConfigError> {
        Self::from_kv_str_with_overrides(text, &[], None)
    }

    /// Parses `text`, then applies `key=value` overrides. Relative data paths
    /// resolve against `base_dir`.
    pub fn from_kv_str_with_overrides(
        text: &str,
        overrides: &[String],
        base_dir: Option<&Path>,
    ) -> std::result::Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(parse_err)?;
        for item in overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                ConfigError::invalid(item.clone(), "override must look like key=value")
            })?;
            table.insert(key.trim().to_string(), parse_value(value.trim()));
        }
        Self::from_table(table, base_dir)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_kv_str_with_overrides(&text, overrides, path.parent())?)
    }

    fn from_table(table: toml::Table, base_dir: Option<&Path>) -> std::result::Result<Self, ConfigError> {
        let solver_keys = SolverConfig::keys();
        let front_keys = table_keys(FrontConfig::default());
        let (mut solver_t, mut front_t, mut rest) =
            (toml::Table::new(), toml::Table::new(), toml::Table::new());
        for (k, v) in table.clone() {
            if let Some(t) = table.get(&k).and_then(|v| v.as_table()) {
                return Err(ConfigError::invalid(k, format!("sections are not allowed ({} keys)", t.len())));
            }
            if solver_keys.contains(&k) {
                solver_t.insert(k, v);
            } else if front_keys.contains(&k) {
                front_t.insert(k, v);
            } else {
                rest.insert(k, v);
            }
        }
        let solver: SolverConfig = solver_t.try_into().map_err(parse_err)?;
        solver.validate()?;
        let front: FrontConfig = front_t.try_into().map_err(parse_err)?;
        let keys: ExperimentKeys = rest.try_into().map_err(parse_err)?;

        let rule = match keys.bounds.as_str() {
            "estimated" => SampleSizeRule::Estimated(vec![(keys.value_bound, keys.gradient_bound); 2]),
            "analytic" => SampleSizeRule::Analytic,
            other => {
                return Err(ConfigError::invalid("bounds", format!("`{other}` is not estimated or analytic")))
            }
        };
        if keys.value_bound <= 0.0 || keys.gradient_bound <= 0.0 {
            return Err(ConfigError::invalid("value_bound", "bounds must be positive"));
        }
        let problem = match keys.problem.as_str() {
            "test1" | "test2" => {
                let noise = NoiseSpec {
                    sigma: keys.sigma,
                    bounded: keys.noise_bounded,
                    cap_f: keys.cap_f,
                    cap_g: keys.cap_g,
                    shared_gradient_noise: keys.shared_gradient_noise,
                };
                noise.validate().map_err(|e| match e {
                    OracleError::InvalidParameter { field, reason } => ConfigError::invalid(field, reason),
                    other => ConfigError::invalid("sigma", other.to_string()),
                })?;
                ProblemSpec::Analytic {
                    problem: keys
                        .problem
                        .parse()
                        .map_err(|e: String| ConfigError::invalid("problem", e))?,
                    noise,
                }
            }
            "dataset" => {
                let raw = keys
                    .data_path
                    .clone()
                    .ok_or_else(|| ConfigError::invalid("data_path", "required for problem = \"dataset\""))?;
                let mut path = PathBuf::from(raw);
                if let (true, Some(dir)) = (path.is_relative(), base_dir) {
                    path = dir.join(path);
                }
                ProblemSpec::Dataset {
                    path,
                    options: DatasetOptions {
                        format: keys.data_format,
                        has_header: keys.has_header,
                        label_column: keys.label_column,
                        label_convention: keys.label_convention,
                        sensitive_column: keys.sensitive_column,
                        sensitive_value: keys.sensitive_value,
                        keep_sensitive: keys.keep_sensitive,
                        regularizers: keys.regularizers,
                    },
                    rule,
                }
            }
            "synthetic" => {
                if keys.synthetic_rows < 2 || keys.synthetic_dim == 0 {
                    return Err(ConfigError::invalid("synthetic_rows", "need at least 2 rows and 1 feature"));
                }
                ProblemSpec::Synthetic {
                    rows: keys.synthetic_rows,
                    dim: keys.synthetic_dim,
                    regularizer: keys.regularizers[0],
                    data_seed: keys.data_seed,
                    rule,
                }
            }
            other => {
                return Err(ConfigError::invalid(
                    "problem",
                    format!("`{other}` is not test1, test2, dataset or synthetic"),
                ))
            }
        };
        if keys.num_simulations == 0 {
            return Err(ConfigError::invalid("num_simulations", "must be at least 1"));
        }
        if !(keys.smg_step0 > 0.0) || keys.smg_batch == 0 {
            return Err(ConfigError::invalid("smg_step0", "step and batch must be positive"));
        }
        if let Some(x0) = &keys.x0 {
            if !x0.iter().all(|v| v.is_finite()) {
                return Err(ConfigError::invalid("x0", "coordinates must be finite"));
            }
        }
        let resolve = |p: &Option<String>| p.as_ref().map(PathBuf::from);
        Ok(Self {
            problem,
            algorithm: keys.algorithm,
            front,
            smg: SmgConfig {
                step0: keys.smg_step0,
                batch: keys.smg_batch,
            },
            num_simulations: keys.num_simulations,
            parallelism: keys.parallelism,
            x0: keys.x0.clone(),
            output: resolve(&keys.output),
            output_format: keys.output_format,
            archive_output: resolve(&keys.archive_output),
            solver,
            table,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> std::result::Result<Self, ConfigError> {
        self.solver.seed = seed;
        self.solver.validate()?;
        self.table
            .insert("seed".into(), toml::Value::Integer(seed as i64));
        Ok(self)
    }

    /// Start point, checked against the oracle's dimension.
    pub fn start(&self, dimension: usize) -> std::result::Result<Vec<f64>, ConfigError> {
        let x0 = self
            .x0
            .clone()
            .unwrap_or_else(|| self.problem.default_start(dimension));
        if x0.len() != dimension {
            return Err(ConfigError::invalid(
                "x0",
                format!("has {} coordinates, the problem has {dimension}", x0.len()),
            ));
        }
        Ok(x0)
    }

    /// Front settings with the problem's default box when none is given.
    pub fn front_config(&self, dimension: usize) -> std::result::Result<FrontConfig, ConfigError> {
        let mut front = self.front.clone();
        if front.init_box.is_empty() {
            front.init_box = self.problem.default_box(dimension);
        }
        front.validate(dimension)?;
        Ok(front)
    }

    /// The keys as given, after overrides, in canonical order.
    pub fn to_kv_string(&self) -> String {
        toml::to_string(&self.table).unwrap_or_default()
    }

    /// Every key with its effective value, defaults included.
    pub fn resolved(&self) -> toml::Table {
        let solver_keys = SolverConfig::keys();
        let front_keys = table_keys(FrontConfig::default());
        let mut all = toml::Table::try_from(ExperimentKeys::default()).unwrap_or_default();
        for (k, v) in &self.table {
            if !solver_keys.contains(k) && !front_keys.contains(k) {
                all.insert(k.clone(), v.clone());
            }
        }
        all.extend(toml::Table::try_from(&self.solver).unwrap_or_default());
        all.extend(toml::Table::try_from(&self.front).unwrap_or_default());
        all
    }
}
