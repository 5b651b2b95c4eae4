use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// One tanh hidden layer over flattened selected features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    w1: Tensor,
    b1: Tensor,
    w2: Tensor,
    b2: Tensor,
}

fn xavier<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Vec<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..fan_in * fan_out).map(|_| rng.random_range(-a..=a)).collect()
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, classes: usize, rng: &mut R) -> Result<Self> {
        if input == 0 || hidden == 0 || classes < 2 {
            return Err(Error::Parameter(format!(
                "classifier needs input, hidden >= 1 and >= 2 classes, got {input}, {hidden}, {classes}"
            )));
        }
        Ok(Self {
            w1: Tensor::new(vec![input, hidden], xavier(input, hidden, rng))?.param().named("w1"),
            b1: Tensor::zeros(vec![hidden]).param().named("b1"),
            w2: Tensor::new(vec![hidden, classes], xavier(hidden, classes, rng))?.param().named("w2"),
            b2: Tensor::zeros(vec![classes]).param().named("b2"),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.shape()[0]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.shape()[1]
    }

    pub fn n_classes(&self) -> usize {
        self.w2.shape()[1]
    }

    pub fn params(&self) -> Vec<&Tensor> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params().into_iter().map(|p| tape.leaf(p)).collect()
    }

    /// Class logits `[B, classes]` for inputs `[B, input]`.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let [w1, b1, w2, b2] = vars else {
            return Err(Error::Parameter(format!("expected 4 bound parameters, got {}", vars.len())));
        };
        let batch = tape.shape(x)[0];
        let h = tape.matmul(x, *w1)?;
        let bias = tape.broadcast_rows(*b1, batch)?;
        let h = tape.add(h, bias)?;
        let h = tape.tanh(h);
        let out = tape.matmul(h, *w2)?;
        let bias = tape.broadcast_rows(*b2, batch)?;
        tape.add(out, bias)
    }

    /// Mean cross-entropy and accuracy on row-major inputs.
    pub fn evaluate(&self, x: &[f64], labels: &[usize]) -> Result<(f64, f64)> {
        if labels.is_empty() {
            return Err(Error::Parameter("cannot evaluate on an empty set".into()));
        }
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let xv = tape.constant(vec![labels.len(), self.input_dim()], x.to_vec())?;
        let logits = self.forward(&mut tape, &vars, xv)?;
        let c = self.n_classes();
        let values = tape.value(logits);
        let hits = values
            .chunks(c)
            .zip(labels)
            .filter(|(row, &y)| crate::concrete::argmax(row) == y)
            .count();
        let loss = tape.cross_entropy(logits, labels)?;
        Ok((tape.value(loss)[0], hits as f64 / labels.len() as f64))
    }
}
