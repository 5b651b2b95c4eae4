use serde::{Deserialize, Serialize};

use crate::concrete::AnnealSchedule;
use crate::error::{Error, Result};

/// Whether the temperature moves once per epoch or once per mini-batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnealUnit {
    Epoch,
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_selection: f64,
    pub lr_classifier: f64,
    pub tau_start: f64,
    pub tau_end: f64,
    pub anneal: AnnealUnit,
    pub n_rounds: usize,
    pub seed: u64,
    /// Stop after this many epochs without a better validation loss.
    pub patience: Option<usize>,
    pub hidden: usize,
    /// Weight of the pairwise-overlap penalty between vertex weights.
    pub distinct_penalty: f64,
    /// Conditional inference skips nodes already taken by other vertices.
    pub distinct_inference: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 32,
            lr_selection: 1e-2,
            lr_classifier: 1e-3,
            tau_start: 10.0,
            tau_end: 0.1,
            anneal: AnnealUnit::Epoch,
            n_rounds: 5,
            seed: 0,
            patience: None,
            hidden: 32,
            distinct_penalty: 0.0,
            distinct_inference: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("n_rounds", self.n_rounds),
            ("hidden", self.hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Parameter(format!("{name} must be >= 1")));
        }
        for (name, lr) in [("lr_selection", self.lr_selection), ("lr_classifier", self.lr_classifier)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive, got {lr}")));
            }
        }
        if self.patience == Some(0) {
            return Err(Error::Parameter("patience must be >= 1".into()));
        }
        if !(self.distinct_penalty >= 0.0 && self.distinct_penalty.is_finite()) {
            return Err(Error::Parameter("distinct_penalty must be >= 0".into()));
        }
        self.schedule(1).validate()
    }

    /// Schedule spanning the whole run for `batches_per_epoch` steps an epoch.
    pub fn schedule(&self, batches_per_epoch: usize) -> AnnealSchedule {
        let horizon = match self.anneal {
            AnnealUnit::Epoch => self.epochs.saturating_sub(1).max(1),
            AnnealUnit::Step => (self.epochs * batches_per_epoch).saturating_sub(1).max(1),
        };
        AnnealSchedule {
            tau_start: self.tau_start,
            tau_end: self.tau_end,
            horizon,
        }
    }
}
