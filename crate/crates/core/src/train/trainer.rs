use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, Tape, Var};
use crate::concrete::{seeded_rng, SeededRng};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::selection::{ConditionalSelection, IndependentSelection, LayerKind, SelectionLayer};
use crate::topology::{CommTopology, HardSelection};
use crate::train::{AnnealUnit, Mlp, TrainConfig};

/// Which selection layer to train.
#[derive(Debug, Clone, Copy)]
pub enum LayerSetup<'a> {
    /// `m` unconstrained concrete distributions.
    Independent { m: usize },
    Conditional(&'a CommTopology),
}

impl LayerSetup<'_> {
    pub fn kind(&self) -> LayerKind {
        match self {
            Self::Independent { .. } => LayerKind::Independent,
            Self::Conditional(_) => LayerKind::Conditional,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub tau: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub entropies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub layer: SelectionLayer,
    pub classifier: Mlp,
    pub selection: HardSelection,
    pub feature_dim: usize,
    pub epochs_ran: usize,
    pub best_epoch: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<EpochRecord>,
}

impl TrainedModel {
    /// Loss and accuracy of the classifier on the inferred hard selection.
    pub fn evaluate(&self, data: &Dataset) -> Result<(f64, f64)> {
        self.classifier.evaluate(&data.gather(&self.selection.assignment), data.labels())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let model: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if model.classifier.input_dim() != model.layer.n_vertices() * model.feature_dim {
            return Err(Error::Parameter("classifier input does not match the selection".into()));
        }
        Ok(model)
    }

    /// Per-epoch curves as CSV text.
    pub fn curves_csv(&self) -> String {
        let m = self.layer.n_vertices();
        let mut out = String::from("epoch,tau,train_loss,val_loss,val_acc");
        for v in 0..m {
            out.push_str(&format!(",entropy_v{v}"));
        }
        out.push('\n');
        for r in &self.curves {
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?}",
                r.epoch, r.tau, r.train_loss, r.val_loss, r.val_acc
            ));
            for e in &r.entropies {
                out.push_str(&format!(",{e:?}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn init_layer(setup: LayerSetup<'_>, n_nodes: usize, config: &TrainConfig, rng: &mut SeededRng) -> Result<SelectionLayer> {
    Ok(match setup {
        LayerSetup::Independent { m } => SelectionLayer::Independent(IndependentSelection::new(m, n_nodes, rng)?),
        LayerSetup::Conditional(topology) => {
            if topology.n_nodes() != n_nodes {
                return Err(Error::Parameter(format!(
                    "topology has {} nodes, data has {n_nodes}",
                    topology.n_nodes()
                )));
            }
            SelectionLayer::Conditional(
                ConditionalSelection::new(topology.clone(), rng)?.with_distinct_inference(config.distinct_inference),
            )
        }
    })
}

/// `sum_{m != m'} <z_m, z_m'>` averaged over the batch.
fn overlap_penalty(tape: &mut Tape, z: Var, batch: usize, m: usize, n: usize) -> Result<Var> {
    let ones = tape.constant(vec![batch, m], vec![1.0; batch * m])?;
    let total = tape.batched_matmul(ones, z, 1, m, n)?;
    let sq_total = tape.mul(total, total)?;
    let sq_total = tape.sum(sq_total);
    let sq_each = tape.mul(z, z)?;
    let sq_each = tape.sum(sq_each);
    let neg = tape.scale(sq_each, -1.0);
    let diff = tape.add(sq_total, neg)?;
    Ok(tape.scale(diff, 1.0 / batch as f64))
}

/// Jointly trains a selection layer and a classifier on `train`, keeping the
/// parameters with the lowest validation loss under hard inference.
pub fn train(train: &Dataset, val: &Dataset, setup: LayerSetup<'_>, config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Parameter("training and validation sets must be nonempty".into()));
    }
    let (n, l, c) = (train.n_nodes(), train.feature_dim(), train.n_classes());
    let mut rng = seeded_rng(config.seed);
    let mut layer = init_layer(setup, n, config, &mut rng)?;
    let m = layer.n_vertices();
    let mut mlp = Mlp::new(m * l, config.hidden, c, &mut rng)?;
    let mut opt_sel = Adam::with_lr(config.lr_selection)?;
    let mut opt_clf = Adam::with_lr(config.lr_classifier)?;

    let batches = train.len().div_ceil(config.batch_size);
    let schedule = config.schedule(batches);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut curves = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, SelectionLayer, Mlp)> = None;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut tau_epoch = 0.0;
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            let tau = match config.anneal {
                AnnealUnit::Epoch => schedule.at(epoch as f64)?,
                AnnealUnit::Step => schedule.at((epoch * batches + bi) as f64)?,
            };
            tau_epoch = tau.value();
            let b = chunk.len();
            let mut x = Vec::with_capacity(b * n * l);
            chunk.iter().for_each(|&i| x.extend_from_slice(train.sample(i)));
            let labels: Vec<usize> = chunk.iter().map(|&i| train.labels()[i]).collect();

            let mut tape = Tape::new();
            let sel_vars = layer.bind(&mut tape);
            let clf_vars = mlp.bind(&mut tape);
            let xv = tape.constant(vec![b, n * l], x)?;
            let z = layer.weights(&mut tape, &sel_vars, b, tau, config.n_rounds, &mut rng)?;
            let feats = tape.batched_matmul(z, xv, m, n, l)?;
            let logits = mlp.forward(&mut tape, &clf_vars, feats)?;
            let mut loss = tape.cross_entropy(logits, &labels)?;
            if config.distinct_penalty > 0.0 {
                let pen = overlap_penalty(&mut tape, z, b, m, n)?;
                let pen = tape.scale(pen, config.distinct_penalty);
                loss = tape.add(loss, pen)?;
            }
            let value = tape.value(loss)[0];
            if !value.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: bi,
                    loss: value,
                });
            }
            epoch_loss += value * b as f64;

            let grads = tape.backward(loss)?;
            for (v, p) in sel_vars.iter().zip(layer.params_mut()) {
                grads.accumulate_into(*v, p)?;
            }
            for (v, p) in clf_vars.iter().zip(mlp.params_mut()) {
                grads.accumulate_into(*v, p)?;
            }
            opt_sel.step(&mut layer.params_mut())?;
            opt_clf.step(&mut mlp.params_mut())?;
        }

        if let SelectionLayer::Conditional(cl) = &layer {
            let sample = cl.hard_sample(&mut rng)?;
            if !cl.topology().check_edges(&sample) {
                return Err(Error::Invariant(format!(
                    "epoch {epoch}: hard sample {sample} violates the distance constraints"
                )));
            }
        }
        let selection = layer.infer()?;
        let (val_loss, val_acc) = mlp.evaluate(&val.gather(&selection.assignment), val.labels())?;
        curves.push(EpochRecord {
            epoch,
            tau: tau_epoch,
            train_loss: epoch_loss / train.len() as f64,
            val_loss,
            val_acc,
            entropies: layer.entropies()?,
        });
        let improved = best.as_ref().is_none_or(|(bl, ..)| val_loss < *bl);
        if improved {
            best = Some((val_loss, epoch, layer.clone(), mlp.clone()));
        } else if let (Some(p), Some((_, be, ..))) = (config.patience, &best) {
            if epoch - be >= p {
                break;
            }
        }
    }

    let epochs_ran = curves.len();
    let (_, best_epoch, layer, classifier) = best.expect("at least one epoch");
    let selection = layer.infer()?;
    Ok(TrainedModel {
        layer,
        classifier,
        selection,
        feature_dim: l,
        epochs_ran,
        best_epoch,
        curves,
    })
}
