use rand::seq::SliceRandom;

use crate::autodiff::{Adam, Tape};
use crate::baselines::Evaluator;
use crate::concrete::seeded_rng;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::topology::HardSelection;
use crate::train::Mlp;

/// Scores a fixed selection by training a fresh classifier on it and
/// reporting accuracy on a held-out set. Every call reuses `seed`, so equal
/// selections score equally.
#[derive(Debug, Clone)]
pub struct MlpProbe<'a> {
    pub train: &'a Dataset,
    pub eval: &'a Dataset,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl<'a> MlpProbe<'a> {
    pub fn new(train: &'a Dataset, eval: &'a Dataset, seed: u64) -> Self {
        Self {
            train,
            eval,
            hidden: 32,
            epochs: 60,
            batch_size: 32,
            lr: 1e-2,
            seed,
        }
    }

    pub fn fit(&self, nodes: &[usize]) -> Result<Mlp> {
        if nodes.is_empty() || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Parameter("probe needs nodes, epochs and a batch size".into()));
        }
        if let Some(&bad) = nodes.iter().find(|&&n| n >= self.train.n_nodes()) {
            return Err(Error::Parameter(format!("node {bad} out of range")));
        }
        let dim = nodes.len() * self.train.feature_dim();
        let x = self.train.gather(nodes);
        let mut rng = seeded_rng(self.seed);
        let mut mlp = Mlp::new(dim, self.hidden, self.train.n_classes(), &mut rng)?;
        let mut opt = Adam::with_lr(self.lr)?;
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        for _ in 0..self.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(self.batch_size) {
                let mut xb = Vec::with_capacity(chunk.len() * dim);
                chunk.iter().for_each(|&i| xb.extend_from_slice(&x[i * dim..(i + 1) * dim]));
                let labels: Vec<usize> = chunk.iter().map(|&i| self.train.labels()[i]).collect();
                let mut tape = Tape::new();
                let vars = mlp.bind(&mut tape);
                let xv = tape.constant(vec![chunk.len(), dim], xb)?;
                let logits = mlp.forward(&mut tape, &vars, xv)?;
                let loss = tape.cross_entropy(logits, &labels)?;
                let grads = tape.backward(loss)?;
                for (v, p) in vars.iter().zip(mlp.params_mut()) {
                    grads.accumulate_into(*v, p)?;
                }
                opt.step(&mut mlp.params_mut())?;
            }
        }
        Ok(mlp)
    }
}

impl Evaluator for MlpProbe<'_> {
    fn score(&self, sel: &HardSelection) -> Result<f64> {
        let mlp = self.fit(&sel.assignment)?;
        Ok(mlp.evaluate(&self.eval.gather(&sel.assignment), self.eval.labels())?.1)
    }
}
