//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment and blank lines are ignored.
//! Unknown or repeated keys are errors. Command-line overrides go through
//! [`RunConfig::set`], so they obey the same parsing and validation.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baselines::AlsConfig;
use crate::data::RatingScale;
use crate::error::{Error, Result};
use crate::eval::Method;
use crate::solver::{Architecture, Coupling, SolverConfig, UpdateRule};
use crate::synthetic::SyntheticSpec;

/// Which ratings corpus a run reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    /// `u.data` plus the predefined `u1..u5` folds, tab separated.
    Ml100k,
    /// `ratings.dat`, `::` separated.
    Ml1m,
    /// `ratings.dat`, `::` separated, half-star ratings.
    Ml10m,
    /// Seeded MovieLens-like generator, no files needed.
    Synthetic,
}

impl DatasetKind {
    pub fn scale(self) -> RatingScale {
        match self {
            DatasetKind::Ml10m => RatingScale::HALF_STARS,
            _ => RatingScale::STARS,
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml100k" => Ok(DatasetKind::Ml100k),
            "ml1m" => Ok(DatasetKind::Ml1m),
            "ml10m" => Ok(DatasetKind::Ml10m),
            "synthetic" => Ok(DatasetKind::Synthetic),
            other => Err(Error::invalid(format!(
                "dataset_kind must be ml100k, ml1m, ml10m or synthetic, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Ml100k => "ml100k",
            DatasetKind::Ml1m => "ml1m",
            DatasetKind::Ml10m => "ml10m",
            DatasetKind::Synthetic => "synthetic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    DeepLfm,
    Als,
    Knn,
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deep_lfm" => Ok(MethodKind::DeepLfm),
            "als" => Ok(MethodKind::Als),
            "knn" => Ok(MethodKind::Knn),
            other => Err(Error::invalid(format!(
                "method must be deep_lfm, als or knn, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodKind::DeepLfm => "deep_lfm",
            MethodKind::Als => "als",
            MethodKind::Knn => "knn",
        })
    }
}

/// Every setting of a `train` or `cv` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset_path: Option<PathBuf>,
    pub dataset_kind: DatasetKind,
    pub method: MethodKind,
    pub arch: Architecture,
    pub gamma: f64,
    pub outer_iters: usize,
    pub inner_sweeps: usize,
    pub rel_tol: f64,
    pub pinv_tol: Option<f64>,
    pub coupling: Coupling,
    pub update: UpdateRule,
    pub lambda: f64,
    pub als_rank: usize,
    pub als_iters: usize,
    pub k_neighbors: usize,
    pub folds: usize,
    pub fold: usize,
    pub seed: u64,
    pub synthetic_users: usize,
    pub synthetic_items: usize,
    pub synthetic_ratings: usize,
    pub relevance_threshold: f64,
    pub output_dir: PathBuf,
}

/// Keys in the order the resolved configuration is written.
pub const KEYS: [&str; 23] = [
    "dataset_path",
    "dataset_kind",
    "method",
    "arch",
    "gamma",
    "outer_iters",
    "inner_sweeps",
    "rel_tol",
    "pinv_tol",
    "coupling",
    "update",
    "lambda",
    "als_rank",
    "als_iters",
    "k_neighbors",
    "folds",
    "fold",
    "seed",
    "synthetic_users",
    "synthetic_items",
    "synthetic_ratings",
    "relevance_threshold",
    "output_dir",
];

impl Default for RunConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        let als = AlsConfig::default();
        RunConfig {
            dataset_path: None,
            dataset_kind: DatasetKind::Ml100k,
            method: MethodKind::DeepLfm,
            arch: Architecture::new(vec![40, 20, 10]).expect("valid default"),
            gamma: solver.gamma,
            outer_iters: solver.outer_iters,
            inner_sweeps: solver.inner_sweeps,
            rel_tol: solver.rel_tol,
            pinv_tol: solver.pinv_tol,
            coupling: solver.coupling,
            update: solver.update,
            lambda: als.lambda,
            als_rank: als.rank,
            als_iters: als.iters,
            k_neighbors: 30,
            folds: 5,
            fold: 1,
            seed: 42,
            synthetic_users: 943,
            synthetic_items: 1682,
            synthetic_ratings: 100_000,
            relevance_threshold: 4.0,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    /// Parses configuration text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err =
                |message: String| Error::invalid(format!("config line {}: {message}", idx + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key = value, got {line:?}")))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(parse_err(format!("key {key:?} given twice")));
            }
            config
                .set(key, value.trim())
                .map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(config)
    }

    /// Reads and parses a configuration file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset_path" => {
                self.dataset_path = (!value.is_empty()).then(|| PathBuf::from(value));
            }
            "dataset_kind" => self.dataset_kind = value.parse()?,
            "method" => self.method = value.parse()?,
            "arch" => self.arch = value.parse()?,
            "gamma" => self.gamma = number(key, value)?,
            "outer_iters" => self.outer_iters = number(key, value)?,
            "inner_sweeps" => self.inner_sweeps = number(key, value)?,
            "rel_tol" => self.rel_tol = number(key, value)?,
            "pinv_tol" => {
                self.pinv_tol = match value {
                    "auto" => None,
                    v => Some(number(key, v)?),
                }
            }
            "coupling" => self.coupling = value.parse()?,
            "update" => self.update = value.parse()?,
            "lambda" => self.lambda = number(key, value)?,
            "als_rank" => self.als_rank = number(key, value)?,
            "als_iters" => self.als_iters = number(key, value)?,
            "k_neighbors" => self.k_neighbors = number(key, value)?,
            "folds" => self.folds = number(key, value)?,
            "fold" => self.fold = number(key, value)?,
            "seed" => self.seed = number(key, value)?,
            "synthetic_users" => self.synthetic_users = number(key, value)?,
            "synthetic_items" => self.synthetic_items = number(key, value)?,
            "synthetic_ratings" => self.synthetic_ratings = number(key, value)?,
            "relevance_threshold" => self.relevance_threshold = number(key, value)?,
            "output_dir" => {
                if value.is_empty() {
                    return Err(Error::invalid("output_dir must not be empty"));
                }
                self.output_dir = PathBuf::from(value);
            }
            other => return Err(Error::invalid(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<'a>(&mut self, pairs: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for pair in pairs {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("override {pair:?} is not key=value")))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Generator settings for `dataset_kind = synthetic`.
    pub fn synthetic(&self) -> SyntheticSpec {
        SyntheticSpec {
            users: self.synthetic_users,
            items: self.synthetic_items,
            ratings: self.synthetic_ratings,
            ..SyntheticSpec::ml100k_like(self.seed)
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            gamma: self.gamma,
            outer_iters: self.outer_iters,
            inner_sweeps: self.inner_sweeps,
            rel_tol: self.rel_tol,
            pinv_tol: self.pinv_tol,
            coupling: self.coupling,
            update: self.update,
        }
    }

    pub fn als(&self) -> AlsConfig {
        AlsConfig {
            rank: self.als_rank,
            lambda: self.lambda,
            iters: self.als_iters,
        }
    }

    pub fn to_method(&self) -> Method {
        match self.method {
            MethodKind::DeepLfm => Method::DeepLfm {
                arch: self.arch.clone(),
                config: self.solver(),
            },
            MethodKind::Als => Method::Als(self.als()),
            MethodKind::Knn => Method::Knn {
                k_neighbors: self.k_neighbors,
            },
        }
    }

    /// Checks every setting; performs no IO.
    pub fn validate(&self) -> Result<()> {
        if self.dataset_kind != DatasetKind::Synthetic && self.dataset_path.is_none() {
            return Err(Error::invalid(format!(
                "dataset_path is required for dataset_kind {}",
                self.dataset_kind
            )));
        }
        self.solver().validate()?;
        self.als().validate()?;
        if self.k_neighbors == 0 {
            return Err(Error::invalid("k_neighbors must be positive"));
        }
        if self.folds < 2 {
            return Err(Error::invalid(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.dataset_kind == DatasetKind::Ml100k && self.folds != 5 {
            return Err(Error::invalid(
                "ml100k uses its five predefined folds; folds must be 5",
            ));
        }
        if !(1..=self.folds).contains(&self.fold) {
            return Err(Error::invalid(format!(
                "fold {} not in 1..={}",
                self.fold, self.folds
            )));
        }
        let scale = self.dataset_kind.scale();
        if !(self.relevance_threshold >= scale.lo && self.relevance_threshold <= scale.hi) {
            return Err(Error::invalid(format!(
                "relevance_threshold {} outside the rating scale [{}, {}]",
                self.relevance_threshold, scale.lo, scale.hi
            )));
        }
        Ok(())
    }

    /// `key = value` lines for every key, in [`KEYS`] order.
    pub fn resolved(&self) -> String {
        let pinv = self
            .pinv_tol
            .map_or_else(|| "auto".to_string(), |t| t.to_string());
        let path = self
            .dataset_path
            .as_ref()
            .map_or_else(String::new, |p| p.display().to_string());
        let values = [
            path,
            self.dataset_kind.to_string(),
            self.method.to_string(),
            self.arch.to_string(),
            self.gamma.to_string(),
            self.outer_iters.to_string(),
            self.inner_sweeps.to_string(),
            self.rel_tol.to_string(),
            pinv,
            self.coupling.to_string(),
            self.update.to_string(),
            self.lambda.to_string(),
            self.als_rank.to_string(),
            self.als_iters.to_string(),
            self.k_neighbors.to_string(),
            self.folds.to_string(),
            self.fold.to_string(),
            self.seed.to_string(),
            self.synthetic_users.to_string(),
            self.synthetic_items.to_string(),
            self.synthetic_ratings.to_string(),
            self.relevance_threshold.to_string(),
            self.output_dir.display().to_string(),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
