//! Experiment configuration (TOML) and its resolution into runnable pieces.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Result};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use seqbudget::data::{
    generate_synthetic, read_table, CostSchedule, CostSpec, CostedDataset, SyntheticSpec, Table,
};
use seqbudget::evolution::{default_max_stages, GaConfig};
use seqbudget::oracle::DEFAULT_CAP;

/// A problem with the configuration, the dataset files or the command line.
/// Reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub dataset: DatasetConfig,
    /// Confidence a stage needs before it may classify an input.
    pub threshold: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub ga: GaOverrides,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub recovery: RecoveryConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Comma-separated file with a header row.
    pub path: Option<PathBuf>,
    /// Defaults to the last column.
    pub label_column: Option<String>,
    pub synthetic: Option<SyntheticSpec>,
    /// Cost specification file; alternatively give `[dataset.cost]` inline.
    pub cost_file: Option<PathBuf>,
    pub cost: Option<CostSpec>,
    #[serde(default)]
    pub split_seed: u64,
}

/// Any field left out takes the default for the dataset's feature count.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaOverrides {
    pub population_size: Option<usize>,
    pub mutation_rate: Option<f64>,
    pub crossover_rate: Option<f64>,
    pub elitism_fraction: Option<f64>,
    pub mutation_bias: Option<f64>,
    pub epsilon: Option<f64>,
    pub inc: Option<usize>,
    pub max_iter: Option<usize>,
    pub stall_generations: Option<usize>,
    pub max_stages: Option<usize>,
}

impl GaOverrides {
    pub fn resolve(&self, n: usize) -> GaConfig {
        let d = GaConfig::for_features(n);
        GaConfig {
            population_size: self.population_size.unwrap_or(d.population_size),
            mutation_rate: self.mutation_rate.unwrap_or(d.mutation_rate),
            crossover_rate: self.crossover_rate.unwrap_or(d.crossover_rate),
            elitism_fraction: self.elitism_fraction.unwrap_or(d.elitism_fraction),
            mutation_bias: self.mutation_bias.unwrap_or(d.mutation_bias),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            inc: self.inc.unwrap_or(d.inc),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            stall_generations: self.stall_generations.unwrap_or(d.stall_generations),
            max_stages: self.max_stages.unwrap_or_else(|| default_max_stages(n)),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Stage bound for enumeration; defaults to the GA's.
    pub max_stages: Option<usize>,
    pub cap: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryConfig {
    /// Front file written by `oracle`; defaults to `front.csv` in the output
    /// directory.
    pub front: Option<PathBuf>,
}

/// Parameter grid. A missing list means the single configured value; an
/// explicitly empty list is an error.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub population_size: Option<Vec<usize>>,
    pub mutation_rate: Option<Vec<f64>>,
    pub crossover_rate: Option<Vec<f64>>,
    pub mutation_bias: Option<Vec<f64>>,
    pub elitism_fraction: Option<Vec<f64>>,
    /// Generations per short run.
    pub max_iter: Option<usize>,
}

/// Configuration text plus where it came from.
#[derive(Debug, Clone)]
pub struct Source {
    pub text: String,
    /// Directory that relative paths in the config resolve against.
    pub base_dir: PathBuf,
    pub origin: PathBuf,
}

impl Source {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(Self {
            text,
            base_dir: absolute(&base_dir),
            origin: absolute(path),
        })
    }

    pub fn parse(&self) -> Result<Config> {
        let cfg: Config = toml::from_str(&self.text)
            .map_err(|e| usage(format!("{}: {e}", self.origin.display())))?;
        Ok(cfg)
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Hex SHA-256 over the config text, the seed list and any command-specific
/// extras, so every output can be traced to exactly one configuration.
pub fn config_hash(text: &str, seeds: &[u64], extra: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.update(b"\0seeds=");
    let list: Vec<String> = seeds.iter().map(u64::to_string).collect();
    h.update(list.join(",").as_bytes());
    h.update(b"\0");
    h.update(extra.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses `7`, `0,3,9` or an inclusive range `0-49`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || usage(format!("cannot parse seed list {s:?}; use 7, 0,3,9 or 0-49"));
    if let Some((a, b)) = s.split_once('-') {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect()
}

/// Everything a command needs about the data.
pub struct Problem {
    pub dataset: Arc<CostedDataset>,
    pub schedule: CostSchedule,
    pub description: String,
}

impl Problem {
    pub fn n_features(&self) -> usize {
        self.dataset.n_features()
    }
}

pub fn load_problem(cfg: &Config, src: &Source) -> Result<Problem> {
    let d = &cfg.dataset;
    let (table, description): (Table, String) = match (&d.path, &d.synthetic) {
        (Some(path), None) => {
            let path = src.resolve_path(path);
            if !path.is_file() {
                bail!(usage(format!("dataset file {} does not exist", path.display())));
            }
            let label = match &d.label_column {
                Some(l) => l.clone(),
                None => last_column(&path)?,
            };
            let table = read_table(&path, &label)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?;
            (table, path.display().to_string())
        }
        (None, Some(spec)) => {
            let table =
                generate_synthetic(spec).map_err(|e| usage(format!("[dataset.synthetic]: {e}")))?;
            let desc = format!(
                "synthetic n={} informative={} records={} class_sep={} noise={} seed={}",
                spec.n_features,
                spec.n_informative,
                spec.n_records,
                spec.class_sep,
                spec.label_noise_fraction,
                spec.seed
            );
            (table, desc)
        }
        _ => bail!(usage("[dataset] needs exactly one of `path` or `[dataset.synthetic]`")),
    };
    let spec = match (&d.cost_file, &d.cost) {
        (Some(file), None) => {
            let file = src.resolve_path(file);
            CostSpec::from_path(&file).map_err(|e| usage(format!("{}: {e}", file.display())))?
        }
        (None, Some(spec)) => spec.clone(),
        _ => bail!(usage("[dataset] needs exactly one of `cost_file` or `[dataset.cost]`")),
    };
    let schedule = spec
        .resolve(&table.feature_names)
        .map_err(|e| usage(format!("cost specification: {e}")))?;
    let costs = schedule.costs().map_err(|e| usage(e.to_string()))?;
    let dataset = CostedDataset::from_table(table, costs, d.split_seed)
        .map_err(|e| usage(format!("{description}: {e}")))?;
    Ok(Problem {
        dataset: Arc::new(dataset),
        schedule,
        description,
    })
}

fn last_column(path: &Path) -> Result<String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    header
        .iter()
        .next_back()
        .map(str::to_owned)
        .ok_or_else(|| usage(format!("{}: empty header", path.display())))
}

impl Config {
    /// The GA configuration for an `n`-feature problem, validated.
    pub fn ga(&self, n: usize) -> Result<GaConfig> {
        let ga = self.ga.resolve(n);
        ga.validate(n).map_err(|e| usage(format!("[ga]: {e}")))?;
        Ok(ga)
    }

    pub fn oracle_cap(&self) -> u64 {
        self.oracle.cap.unwrap_or(DEFAULT_CAP)
    }

    pub fn check(&self) -> Result<()> {
        if !(0.5..1.0).contains(&self.threshold) {
            bail!(usage(format!("threshold must lie in [0.5, 1), got {}", self.threshold)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            bail!(usage(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        Ok(())
    }
}
