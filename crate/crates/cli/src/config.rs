//! Experiment configuration: one JSON document describing the dataset,
//! the split, the seed list, and a hyperparameter grid.

use fairlens::data::{load_csv, make_synthetic, split, CsvSchema, Dataset, Split};
use fairlens::numerics::Rng;
use fairlens::trainer::TrainConfig;
use fairlens::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Where the data comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// CSV file with a schema. Relative paths resolve against the config
    /// file's directory.
    Csv { path: PathBuf, schema: CsvSchema },
    /// Generated biased data (mainly for demos and tests).
    Synthetic {
        n: usize,
        d: usize,
        bias: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: (f64, f64, f64),
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            fractions: (0.6, 0.2, 0.2),
            seed: 0,
        }
    }
}

/// Training method for every run of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum TrainMethod {
    Cfa,
    Reweight { eta: f64, outer_iters: usize },
}

impl Default for TrainMethod {
    fn default() -> Self {
        TrainMethod::Cfa
    }
}

/// Grid axes. Empty lists fall back to the base config's single value.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub learning_rate: Vec<f64>,
    pub weight_decay: Vec<f64>,
    pub dropout: Vec<f64>,
    pub lambda: Vec<f64>,
    pub distance: Vec<String>,
}

/// The whole experiment document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub split: SplitSpec,
    pub seeds: Vec<u64>,
    /// Defaults for every field the grid does not sweep.
    #[serde(default)]
    pub base: TrainConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub method: TrainMethod,
    pub output_dir: PathBuf,
}

/// One expanded grid cell.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub id: String,
    pub config: TrainConfig,
}

impl ExperimentConfig {
    /// Parse a config file; relative dataset paths are resolved against
    /// the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let DatasetSpec::Csv { path: data_path, .. } = &mut cfg.dataset {
            if data_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *data_path = dir.join(&data_path);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list must not be empty".into()));
        }
        let (a, b, c) = self.split.fractions;
        if a <= 0.0 || b <= 0.0 || c <= 0.0 {
            return Err(Error::Config("split fractions must be positive".into()));
        }
        self.base.validate()?;
        // Fail early on malformed distance names.
        for name in &self.grid.distance {
            name.parse::<fairlens::distances::DistanceKind>()?;
        }
        Ok(())
    }

    /// Load or generate the dataset, split it, and fit normalization.
    pub fn materialize_data(&self) -> Result<(Dataset, Split)> {
        let mut ds = match &self.dataset {
            DatasetSpec::Csv { path, schema } => load_csv(path, schema)?,
            DatasetSpec::Synthetic { n, d, bias, seed } => {
                make_synthetic(*n, *d, *bias, &mut Rng::new(*seed))?
            }
        };
        let sp = split(&ds, self.split.fractions, &mut Rng::new(self.split.seed))?;
        ds.normalize(&sp)?;
        Ok((ds, sp))
    }

    /// Cartesian product of the grid axes, in a fixed axis order, with
    /// deterministic cell ids.
    pub fn expand_grid(&self) -> Result<Vec<GridCell>> {
        let one = |xs: &[f64], fallback: f64| -> Vec<f64> {
            if xs.is_empty() {
                vec![fallback]
            } else {
                xs.to_vec()
            }
        };
        let lrs = one(&self.grid.learning_rate, self.base.learning_rate);
        let wds = one(&self.grid.weight_decay, self.base.weight_decay);
        let dropouts = one(&self.grid.dropout, self.base.dropout);
        let lambdas = one(&self.grid.lambda, self.base.lambda);
        let distances: Vec<String> = if self.grid.distance.is_empty() {
            vec![self.base.distance.kind.to_string()]
        } else {
            self.grid.distance.clone()
        };

        let mut cells = Vec::new();
        for &lr in &lrs {
            for &wd in &wds {
                for &dropout in &dropouts {
                    for &lambda in &lambdas {
                        for dist in &distances {
                            let kind = dist.parse()?;
                            let mut config = self.base.clone();
                            config.learning_rate = lr;
                            config.weight_decay = wd;
                            config.dropout = dropout;
                            config.lambda = lambda;
                            config.distance.kind = kind;
                            config.validate()?;
                            cells.push(GridCell {
                                id: format!("lr{lr}_wd{wd}_do{dropout}_lam{lambda}_{kind}"),
                                config,
                            });
                        }
                    }
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::Config("empty grid".into()));
        }
        Ok(cells)
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub parallel: Option<usize>,
    pub seed_override: Option<Vec<u64>>,
    pub distance: Option<String>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seeds) = &self.seed_override {
            if seeds.is_empty() {
                return Err(Error::Config("--seed-override needs at least one seed".into()));
            }
            cfg.seeds = seeds.clone();
        }
        if let Some(distance) = &self.distance {
            let kind = distance.parse()?;
            cfg.base.distance.kind = kind;
            cfg.grid.distance = vec![distance.clone()];
        }
        Ok(())
    }
}
