//! Differentiable selection layers and their inference rules.
//!
//! Both layers produce, per batch element, one simplex vector `z^(m)` over
//! the `N` nodes for each of the `M` vertices. The selected features are
//! `Z^T X`: row `m` is the `z^(m)`-weighted mixture of node feature rows.

mod conditional;
mod independent;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use conditional::ConditionalSelection;
pub use independent::IndependentSelection;

use crate::autodiff::{Tape, Tensor, Var};
use crate::concrete::{is_masked, Temperature, MASKED_LOGIT};
use crate::error::{Error, Result};
use crate::topology::HardSelection;

/// Half-width of the uniform logit initialization.
pub const INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Independent,
    Conditional,
}

impl std::str::FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" | "vanilla" => Ok(Self::Independent),
            "conditional" => Ok(Self::Conditional),
            other => Err(Error::Parameter(format!("unknown layer kind `{other}`"))),
        }
    }
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SelectionLayer {
    Independent(IndependentSelection),
    Conditional(ConditionalSelection),
}

impl SelectionLayer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Self::Independent(_) => LayerKind::Independent,
            Self::Conditional(_) => LayerKind::Conditional,
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            Self::Independent(l) => l.n_nodes(),
            Self::Conditional(l) => l.n_nodes(),
        }
    }

    pub fn n_vertices(&self) -> usize {
        match self {
            Self::Independent(l) => l.n_vertices(),
            Self::Conditional(l) => l.n_vertices(),
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Self::Independent(l) => vec![l.logits()],
            Self::Conditional(l) => l.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Self::Independent(l) => vec![l.logits_mut()],
            Self::Conditional(l) => l.params_mut(),
        }
    }

    /// Records the parameters on `tape`, in [`Self::params`] order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params().into_iter().map(|p| tape.leaf(p)).collect()
    }

    /// Averaged selection weights for `batch` independent noise draws:
    /// `[batch, M * N]`, vertex-major within each row.
    pub fn weights<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        batch: usize,
        tau: Temperature,
        n_rounds: usize,
        rng: &mut R,
    ) -> Result<Var> {
        if n_rounds == 0 {
            return Err(Error::Parameter("n_rounds must be >= 1".into()));
        }
        if batch == 0 {
            return Err(Error::Parameter("batch must be >= 1".into()));
        }
        match self {
            Self::Independent(l) => l.weights(tape, vars, batch, tau, n_rounds, rng),
            Self::Conditional(l) => l.weights(tape, vars, batch, tau, n_rounds, rng),
        }
    }

    /// Selected features `Z^T X` for a batch `x` of shape `[B, N * L]`;
    /// returns `[B, M * L]`.
    #[allow(clippy::too_many_arguments)]
    pub fn select_batch<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        x: Var,
        feature_dim: usize,
        tau: Temperature,
        n_rounds: usize,
        rng: &mut R,
    ) -> Result<Var> {
        let (n, m) = (self.n_nodes(), self.n_vertices());
        let shape = tape.shape(x).to_vec();
        if shape.len() != 2 || shape[1] != n * feature_dim {
            return Err(Error::Dimension {
                op: "select_batch",
                shapes: vec![shape, vec![n, feature_dim]],
            });
        }
        let z = self.weights(tape, vars, shape[0], tau, n_rounds, rng)?;
        tape.batched_matmul(z, x, m, n, feature_dim)
    }

    /// Single-sample forward: `x` is `[N, L]`, the result `[M, L]`.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        x: Var,
        tau: Temperature,
        n_rounds: usize,
        rng: &mut R,
    ) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        if shape.len() != 2 || shape[0] != self.n_nodes() {
            return Err(Error::Dimension {
                op: "selection forward",
                shapes: vec![shape, vec![self.n_nodes()]],
            });
        }
        let l = shape[1];
        let flat = tape.reshape(x, vec![1, self.n_nodes() * l])?;
        let out = self.select_batch(tape, vars, flat, l, tau, n_rounds, rng)?;
        tape.reshape(out, vec![self.n_vertices(), l])
    }

    pub fn infer(&self) -> Result<HardSelection> {
        match self {
            Self::Independent(l) => Ok(l.infer()),
            Self::Conditional(l) => l.infer(),
        }
    }

    /// Exact draw in the discrete limit.
    pub fn hard_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HardSelection> {
        match self {
            Self::Independent(l) => l.hard_sample(rng),
            Self::Conditional(l) => l.hard_sample(rng),
        }
    }

    /// Entropy (nats) of each vertex's categorical distribution, in vertex
    /// order. Conditional vertices report the row selected at inference.
    pub fn entropies(&self) -> Result<Vec<f64>> {
        match self {
            Self::Independent(l) => Ok(l.entropies()),
            Self::Conditional(l) => l.entropies(),
        }
    }
}

/// Normalized probabilities of a logit vector; masked entries get 0.
pub fn categorical(logits: &[f64]) -> Vec<f64> {
    let max = logits
        .iter()
        .copied()
        .filter(|&l| !is_masked(l))
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; logits.len()];
    }
    let mut p: Vec<f64> = logits
        .iter()
        .map(|&l| if is_masked(l) { 0.0 } else { (l - max).exp() })
        .collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

fn uniform_init<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE)).collect()
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter(format!("{what} must be finite")));
    }
    Ok(())
}

/// `logits * keep + offset` with `keep` 1/0 and the offset pinning masked
/// entries to [`MASKED_LOGIT`]; masked entries get exactly zero gradient.
fn masked_logits(tape: &mut Tape, logits: Var, mask: &[bool]) -> Result<Var> {
    let shape = tape.shape(logits).to_vec();
    let keep = tape.constant(
        shape.clone(),
        mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    )?;
    let offset = tape.constant(
        shape,
        mask.iter().map(|&b| if b { 0.0 } else { MASKED_LOGIT }).collect(),
    )?;
    let kept = tape.mul(logits, keep)?;
    tape.add(kept, offset)
}

fn gumbel_values<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| crate::concrete::gumbel(rng)).collect()
}
