use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cgs_core::baselines::DEFAULT_BINS;
use cgs_core::data::{DEFAULT_TEST_FRACTION, DEFAULT_VAL_FRACTION};
use cgs_core::train::{Method, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    /// Retrain the classifier on the selection, score on validation data.
    Mlp,
    /// Ridge-regularized linear discriminant, score on validation data.
    Probe,
}

/// Experiment description shared by every data-consuming subcommand.
/// Flags override file values; relative paths resolve against the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Task metadata JSON written by `generate`.
    pub task: Option<PathBuf>,
    /// Generate a planted task in memory instead of reading one.
    pub preset: Option<String>,
    /// External CSV; node geometry then comes from the topology file.
    pub csv: Option<PathBuf>,
    pub feature_dim: Option<usize>,
    pub n_classes: Option<usize>,
    /// Seeds the preset generator and the train/val/test split.
    pub data_seed: u64,
    pub test_fraction: f64,
    pub val_fraction: f64,
    /// `star`, `line`, or a topology file (JSON or TOML).
    pub topology: Option<String>,
    pub vertices: Option<usize>,
    pub root: Option<usize>,
    pub threshold: Option<f64>,
    pub thresholds: Vec<f64>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub bins: usize,
    pub evaluator: EvaluatorKind,
    pub out: Option<PathBuf>,
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: None,
            preset: None,
            csv: None,
            feature_dim: None,
            n_classes: None,
            data_seed: 0,
            test_fraction: DEFAULT_TEST_FRACTION,
            val_fraction: DEFAULT_VAL_FRACTION,
            topology: None,
            vertices: None,
            root: None,
            threshold: None,
            thresholds: vec![0.3, 0.5, 0.75, 1.0],
            methods: Method::ALL.to_vec(),
            seeds: (0..10).collect(),
            train: TrainConfig::default(),
            bins: DEFAULT_BINS,
            evaluator: EvaluatorKind::Mlp,
            out: None,
            record_wall_time: false,
        }
    }
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
            _ => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        };
        let base = path.parent().unwrap_or(Path::new("."));
        rebase(base, &mut cfg.task);
        rebase(base, &mut cfg.csv);
        rebase(base, &mut cfg.out);
        if let Some(t) = &cfg.topology {
            if !matches!(t.as_str(), "star" | "line") && Path::new(t).is_relative() {
                cfg.topology = Some(base.join(t).to_string_lossy().into_owned());
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let sources = [self.task.is_some(), self.preset.is_some(), self.csv.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if sources > 1 {
            bail!("give at most one of `task`, `preset` and `csv`");
        }
        if self.csv.is_some() && (self.feature_dim.is_none() || self.n_classes.is_none()) {
            bail!("`csv` input needs `feature_dim` and `n_classes`");
        }
        if self.vertices == Some(0) {
            bail!("`vertices` must be at least 1");
        }
        self.train.validate()?;
        Ok(())
    }
}
