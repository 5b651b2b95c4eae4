use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{categorical, check_finite, entropy, gumbel_values, uniform_init};
use crate::autodiff::{Tape, Tensor, Var};
use crate::concrete::{argmax, concrete_rows, gumbel_max, GumbelNoise, Temperature};
use crate::error::{Error, Result};
use crate::topology::HardSelection;

/// `M` unrelated concrete distributions over `N` nodes, one per logits row.
/// With `M = 1` this is the single-feature layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IndependentRecord", into = "IndependentRecord")]
pub struct IndependentSelection {
    logits: Tensor,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndependentRecord {
    logits: Vec<Vec<f64>>,
}

impl From<IndependentSelection> for IndependentRecord {
    fn from(s: IndependentSelection) -> Self {
        let (m, n) = (s.n_vertices(), s.n_nodes());
        Self {
            logits: (0..m).map(|r| s.logits.values()[r * n..(r + 1) * n].to_vec()).collect(),
        }
    }
}

impl TryFrom<IndependentRecord> for IndependentSelection {
    type Error = Error;

    fn try_from(r: IndependentRecord) -> Result<Self> {
        let m = r.logits.len();
        let n = r.logits.first().map_or(0, Vec::len);
        if r.logits.iter().any(|row| row.len() != n) {
            return Err(Error::Parameter("logit rows differ in length".into()));
        }
        Self::from_logits(Tensor::new(vec![m, n], r.logits.concat())?)
    }
}

impl IndependentSelection {
    pub fn new<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Parameter(format!("need M, N >= 1, got M = {m}, N = {n}")));
        }
        Self::from_logits(Tensor::new(vec![m, n], uniform_init(m * n, rng))?)
    }

    pub fn from_logits(logits: Tensor) -> Result<Self> {
        let shape = logits.shape();
        if shape.len() != 2 || shape[0] == 0 || shape[1] == 0 {
            return Err(Error::Dimension {
                op: "independent logits",
                shapes: vec![shape.to_vec()],
            });
        }
        check_finite(logits.values(), "logits")?;
        Ok(Self {
            logits: logits.param().named("logits"),
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.logits.shape()[0]
    }

    pub fn n_nodes(&self) -> usize {
        self.logits.shape()[1]
    }

    pub fn logits(&self) -> &Tensor {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut Tensor {
        &mut self.logits
    }

    pub fn row(&self, m: usize) -> &[f64] {
        self.logits.row(m)
    }

    /// Row-wise argmax, lowest index on ties.
    pub fn infer(&self) -> HardSelection {
        HardSelection::new((0..self.n_vertices()).map(|m| argmax(self.row(m))).collect())
    }

    pub fn hard_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HardSelection> {
        let n = self.n_nodes();
        (0..self.n_vertices())
            .map(|m| gumbel_max(self.row(m), &GumbelNoise::sample(n, rng)))
            .collect::<Result<Vec<_>>>()
            .map(HardSelection::new)
    }

    pub fn entropies(&self) -> Vec<f64> {
        (0..self.n_vertices()).map(|m| entropy(&categorical(self.row(m)))).collect()
    }

    pub(super) fn weights<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        batch: usize,
        tau: Temperature,
        n_rounds: usize,
        rng: &mut R,
    ) -> Result<Var> {
        let [logits] = vars else {
            return Err(Error::Parameter(format!("expected 1 bound parameter, got {}", vars.len())));
        };
        let (m, n) = (self.n_vertices(), self.n_nodes());
        let tiled = tape.broadcast_rows(*logits, batch)?;
        let mut acc: Option<Var> = None;
        for _ in 0..n_rounds {
            let noise = gumbel_values(batch * m * n, rng);
            let z = concrete_rows(tape, tiled, tau, &noise)?;
            acc = Some(match acc {
                None => z,
                Some(a) => tape.add(a, z)?,
            });
        }
        let mut z = acc.expect("n_rounds >= 1");
        if n_rounds > 1 {
            z = tape.scale(z, 1.0 / n_rounds as f64);
        }
        tape.reshape(z, vec![batch, m * n])
    }
}
