//! Experiment configuration: a human-editable TOML file mirroring the
//! experiment parameters, with defaults matching the benchmark protocol
//! (beta = 1/2, all five kernels, all similarity options plus baselines).

use crate::CliError;
use attrikernel::evaluation::{AttributeOption, RankConfig};
use attrikernel::kernels::ProximityMeasure;
use attrikernel::similarity::SimilarityMeasure;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Where one dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// `<dir>/<name>.content` + `<dir>/<name>.cites`, name must be one of the
    /// four university graphs.
    WebKb { dir: PathBuf },
    /// Explicit content/cites file pair.
    Citation { content: PathBuf, cites: PathBuf },
    /// A file in the crate's canonical graph format.
    Canonical { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub name: String,
    pub source: DatasetSource,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub beta: f64,
    pub restarts: usize,
    pub output_dir: PathBuf,
    pub kernels: Vec<ProximityMeasure>,
    /// Similarity columns to evaluate per kernel ("No" meaning the plain
    /// kernel without attributes).
    pub attribute_options: Vec<AttributeOption>,
    /// Whether to run the attribute-only k-means baseline per dataset.
    pub run_kmeans: bool,
    pub datasets: Vec<DatasetSpec>,
    /// Per-kernel alpha grid overrides; empty map means defaults everywhere.
    pub alpha_overrides: BTreeMap<ProximityMeasure, Vec<f64>>,
    /// Free-energy diagonal correction (on by default; the verbatim variant
    /// keeps log(Z)/alpha with its nonzero diagonal).
    pub fe_diagonal_correction: bool,
    pub rank: RankConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            beta: 0.5,
            restarts: 10,
            output_dir: PathBuf::from("."),
            kernels: ProximityMeasure::ALL.to_vec(),
            attribute_options: AttributeOption::ALL.to_vec(),
            run_kmeans: true,
            datasets: Vec::new(),
            alpha_overrides: BTreeMap::new(),
            fe_diagonal_correction: true,
            rank: RankConfig::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    beta: Option<f64>,
    restarts: Option<usize>,
    output_dir: Option<PathBuf>,
    kernels: Option<Vec<String>>,
    similarities: Option<Vec<String>>,
    fe_diagonal_correction: Option<bool>,
    rank_include_no: Option<bool>,
    rank_include_kmeans: Option<bool>,
    #[serde(default, rename = "dataset")]
    datasets: Vec<RawDataset>,
    #[serde(default)]
    alpha_grids: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    name: String,
    kind: String,
    dir: Option<PathBuf>,
    content: Option<PathBuf>,
    cites: Option<PathBuf>,
    path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut config = ExperimentConfig::default();

        if let Some(seed) = raw.seed {
            config.seed = seed;
        }
        if let Some(beta) = raw.beta {
            if !(0.0..=1.0).contains(&beta) {
                return Err(CliError::Config(format!(
                    "beta must lie in [0, 1], got {beta}"
                )));
            }
            config.beta = beta;
        }
        if let Some(restarts) = raw.restarts {
            if restarts == 0 {
                return Err(CliError::Config("restarts must be at least 1".into()));
            }
            config.restarts = restarts;
        }
        if let Some(dir) = raw.output_dir {
            config.output_dir = dir;
        }
        if let Some(names) = raw.kernels {
            if names.is_empty() {
                return Err(CliError::Config("kernel list must not be empty".into()));
            }
            config.kernels = names
                .iter()
                .map(|name| name.parse::<ProximityMeasure>())
                .collect::<Result<_, _>>()
                .map_err(CliError::Config)?;
        }
        if let Some(names) = raw.similarities {
            let mut options = Vec::new();
            let mut run_kmeans = false;
            for name in &names {
                match name.to_ascii_lowercase().as_str() {
                    "no" | "none" => options.push(AttributeOption::None),
                    "k-means" | "kmeans" => run_kmeans = true,
                    other => {
                        let measure: SimilarityMeasure = other
                            .parse()
                            .map_err(|e| CliError::Config(format!("{e}")))?;
                        options.push(AttributeOption::Measure(measure));
                    }
                }
            }
            if options.is_empty() {
                return Err(CliError::Config(
                    "similarity list must contain at least one option".into(),
                ));
            }
            config.attribute_options = options;
            config.run_kmeans = run_kmeans;
        }
        if let Some(flag) = raw.fe_diagonal_correction {
            config.fe_diagonal_correction = flag;
        }
        if let Some(flag) = raw.rank_include_no {
            config.rank.include_no = flag;
        }
        if let Some(flag) = raw.rank_include_kmeans {
            config.rank.include_kmeans = flag;
        }

        for raw_dataset in &raw.datasets {
            config.datasets.push(parse_dataset(raw_dataset)?);
        }
        if config.datasets.is_empty() {
            return Err(CliError::Config(
                "at least one [[dataset]] is required".into(),
            ));
        }
        let mut names: Vec<&str> = config.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != config.datasets.len() {
            return Err(CliError::Config("dataset names must be unique".into()));
        }

        for (name, grid) in &raw.alpha_grids {
            let measure: ProximityMeasure = name.parse().map_err(CliError::Config)?;
            validate_grid(measure, grid)?;
            config.alpha_overrides.insert(measure, grid.clone());
        }

        Ok(config)
    }
}

fn parse_dataset(raw: &RawDataset) -> Result<DatasetSpec, CliError> {
    let source = match raw.kind.as_str() {
        "webkb" => {
            let dir = raw.dir.clone().ok_or_else(|| {
                CliError::Config(format!("dataset {:?}: webkb needs `dir`", raw.name))
            })?;
            raw.name
                .parse::<attrikernel::datasets::University>()
                .map_err(|e| CliError::Config(e.to_string()))?;
            DatasetSource::WebKb { dir }
        }
        "citation" => {
            let content = raw.content.clone().ok_or_else(|| {
                CliError::Config(format!("dataset {:?}: citation needs `content`", raw.name))
            })?;
            let cites = raw.cites.clone().ok_or_else(|| {
                CliError::Config(format!("dataset {:?}: citation needs `cites`", raw.name))
            })?;
            DatasetSource::Citation { content, cites }
        }
        "canonical" => {
            let path = raw.path.clone().ok_or_else(|| {
                CliError::Config(format!("dataset {:?}: canonical needs `path`", raw.name))
            })?;
            DatasetSource::Canonical { path }
        }
        other => {
            return Err(CliError::Config(format!(
                "dataset {:?}: unknown kind {other:?} (expected webkb, citation or canonical)",
                raw.name
            )));
        }
    };
    Ok(DatasetSpec {
        name: raw.name.clone(),
        source,
    })
}

fn validate_grid(measure: ProximityMeasure, grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(CliError::Config(format!(
            "alpha grid for {measure} must not be empty"
        )));
    }
    for &alpha in grid {
        let ok = match measure {
            ProximityMeasure::PageRank => alpha > 0.0 && alpha < 1.0,
            _ => alpha > 0.0,
        };
        if !ok {
            return Err(CliError::Config(format!(
                "alpha {alpha} is out of range for {measure}"
            )));
        }
    }
    Ok(())
}

/// Logarithmically spaced grid between `lo` and `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 || lo >= hi {
        return vec![lo];
    }
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            (ln_lo + t * (ln_hi - ln_lo)).exp()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[[dataset]]
name = "synthetic"
kind = "canonical"
path = "g.graph"
"#;

    #[test]
    fn defaults_match_protocol() {
        let config = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(config.beta, 0.5);
        assert_eq!(config.seed, 42);
        assert_eq!(config.restarts, 10);
        assert_eq!(config.kernels.len(), 5);
        assert_eq!(config.attribute_options.len(), 6);
        assert!(config.run_kmeans);
        assert!(config.fe_diagonal_correction);
    }

    #[test]
    fn parses_full_config() {
        let text = r#"
seed = 7
beta = 0.25
restarts = 3
output_dir = "out"
kernels = ["heat", "FE"]
similarities = ["CS", "No", "k-means"]
rank_include_no = false

[[dataset]]
name = "washington"
kind = "webkb"
dir = "/data/webkb"

[[dataset]]
name = "citeseer"
kind = "citation"
content = "/data/citeseer.content"
cites = "/data/citeseer.cites"

[alpha_grids]
heat = [0.1, 1.0, 10.0]
"#;
        let config = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(
            config.kernels,
            vec![ProximityMeasure::Heat, ProximityMeasure::FreeEnergy]
        );
        assert_eq!(
            config.attribute_options,
            vec![
                AttributeOption::Measure(SimilarityMeasure::Cosine),
                AttributeOption::None
            ]
        );
        assert!(config.run_kmeans);
        assert!(!config.rank.include_no);
        assert_eq!(config.datasets.len(), 2);
        assert_eq!(
            config.alpha_overrides[&ProximityMeasure::Heat],
            vec![0.1, 1.0, 10.0]
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ExperimentConfig::from_toml("beta = 2.0").is_err());
        assert!(ExperimentConfig::from_toml(MINIMAL).is_ok());
        let bad_kernel = format!("kernels = [\"warp\"]\n{MINIMAL}");
        assert!(ExperimentConfig::from_toml(&bad_kernel).is_err());
        let bad_grid = format!("[alpha_grids]\npagerank = [1.5]\n{MINIMAL}");
        assert!(ExperimentConfig::from_toml(&bad_grid).is_err());
        let no_datasets = "seed = 1";
        assert!(ExperimentConfig::from_toml(no_datasets).is_err());
        let dup = r#"
[[dataset]]
name = "a"
kind = "canonical"
path = "x"
[[dataset]]
name = "a"
kind = "canonical"
path = "y"
"#;
        assert!(ExperimentConfig::from_toml(dup).is_err());
    }

    #[test]
    fn log_space_endpoints() {
        let grid = log_space(0.01, 20.0, 10);
        assert_eq!(grid.len(), 10);
        assert!((grid[0] - 0.01).abs() < 1e-12);
        assert!((grid[9] - 20.0).abs() < 1e-9);
        for pair in grid.windows(2) {
            assert!(pair[0] < pair[1]);
        }
    }
}
