//! Gumbel noise, the Gumbel-Max trick and concrete (Gumbel-Softmax) samples.
//!
//! Logits are unconstrained log-probabilities. A logit equal to
//! `f64::NEG_INFINITY`, or at or below [`MASKED_LOGIT`], marks a class with
//! zero probability: it is never selected by [`gumbel_max`] and receives an
//! exact zero weight in [`concrete_sample`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Finite stand-in for `-inf` used inside the stabilized softmax.
pub const MASKED_LOGIT: f64 = -1e9;

/// Uniform draws are clamped into `[GUMBEL_EPS, 1 - GUMBEL_EPS]`.
pub const GUMBEL_EPS: f64 = 1e-12;

/// Deterministic generator used throughout the crate.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn is_masked(logit: f64) -> bool {
    logit <= MASKED_LOGIT
}

/// One standard Gumbel draw, `-ln(-ln(u))`.
pub fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let u = u.clamp(GUMBEL_EPS, 1.0 - GUMBEL_EPS);
    -(-u.ln()).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GumbelNoise {
    values: Vec<f64>,
    seed: Option<u64>,
}

impl GumbelNoise {
    pub fn sample<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self {
            values: (0..len).map(|_| gumbel(rng)).collect(),
            seed: None,
        }
    }

    pub fn from_seed(len: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        Self {
            seed: Some(seed),
            ..Self::sample(len, &mut rng)
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self::from_values(vec![0.0; len])
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values, seed: None }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Positive softmax temperature.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::Parameter(format!("temperature must be > 0, got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Relaxed selection weights: `columns` simplex vectors of length `n`,
/// stored column after column.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteSample {
    n: usize,
    weights: Vec<f64>,
}

impl ConcreteSample {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if n == 0 || columns.iter().any(|c| c.len() != n) {
            return Err(Error::Parameter("concrete sample columns must share a nonzero length".into()));
        }
        Ok(Self {
            n,
            weights: columns.concat(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn n_columns(&self) -> usize {
        self.weights.len() / self.n.max(1)
    }

    pub fn column(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n..(m + 1) * self.n]
    }

    /// The single column of a one-selection sample.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Per-column argmax with lowest-index tie-break.
    pub fn harden(&self) -> Vec<usize> {
        (0..self.n_columns()).map(|m| argmax(self.column(m))).collect()
    }

    /// Entries in `[0, 1]` and every column summing to one within `tol`.
    pub fn is_on_simplex(&self, tol: f64) -> bool {
        (0..self.n_columns()).all(|m| {
            let col = self.column(m);
            col.iter().all(|w| (0.0..=1.0).contains(w))
                && (col.iter().sum::<f64>() - 1.0).abs() <= tol
        })
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn check_noise(logits: &[f64], noise: &GumbelNoise) -> Result<()> {
    if logits.len() != noise.len() || logits.is_empty() {
        return Err(Error::Dimension {
            op: "gumbel noise",
            shapes: vec![vec![logits.len()], vec![noise.len()]],
        });
    }
    Ok(())
}

/// Exact categorical draw: `argmax_n(logits_n + g_n)` over unmasked classes.
pub fn gumbel_max(logits: &[f64], noise: &GumbelNoise) -> Result<usize> {
    check_noise(logits, noise)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, (&l, &g)) in logits.iter().zip(noise.values()).enumerate() {
        if is_masked(l) {
            continue;
        }
        let score = l + g;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::InfeasibleDistribution)
}

/// `z_n = exp((logits_n + g_n)/tau) / sum_j exp((logits_j + g_j)/tau)`.
/// Masked classes get an exact zero.
pub fn concrete_sample(
    logits: &[f64],
    tau: Temperature,
    noise: &GumbelNoise,
) -> Result<ConcreteSample> {
    check_noise(logits, noise)?;
    if logits.iter().all(|&l| is_masked(l)) {
        return Err(Error::InfeasibleDistribution);
    }
    let perturbed: Vec<f64> = logits
        .iter()
        .zip(noise.values())
        .map(|(&l, &g)| if is_masked(l) { f64::NEG_INFINITY } else { l + g })
        .collect();
    let max = perturbed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = perturbed
        .iter()
        .map(|&v| {
            if v == f64::NEG_INFINITY {
                0.0
            } else {
                ((v - max) / tau.value()).exp()
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(ConcreteSample {
        n: logits.len(),
        weights,
    })
}

/// Mean of `n_rounds` independent concrete samples drawn from `rng`.
pub fn averaged_sample<R: Rng + ?Sized>(
    logits: &[f64],
    tau: Temperature,
    n_rounds: usize,
    rng: &mut R,
) -> Result<ConcreteSample> {
    if n_rounds == 0 {
        return Err(Error::Parameter("n_rounds must be >= 1".into()));
    }
    let mut acc = vec![0.0; logits.len()];
    for _ in 0..n_rounds {
        let noise = GumbelNoise::sample(logits.len(), rng);
        let s = concrete_sample(logits, tau, &noise)?;
        acc.iter_mut().zip(s.weights()).for_each(|(a, w)| *a += w);
    }
    acc.iter_mut().for_each(|a| *a /= n_rounds as f64);
    Ok(ConcreteSample {
        n: logits.len(),
        weights: acc,
    })
}

/// Differentiable concrete samples for each row of `logits` (`[rows, n]`),
/// with `noise` laid out like `logits`.
pub fn concrete_rows(tape: &mut Tape, logits: Var, tau: Temperature, noise: &[f64]) -> Result<Var> {
    let shape = tape.shape(logits).to_vec();
    let g = tape.constant(shape.clone(), noise.to_vec())?;
    let perturbed = tape.add(logits, g)?;
    tape.softmax_t(perturbed, shape.len() - 1, tau.value())
}

/// Exponential temperature decay from `tau_start` to `tau_end` over
/// `horizon` epochs (or steps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub tau_start: f64,
    pub tau_end: f64,
    pub horizon: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            tau_start: 10.0,
            tau_end: 0.1,
            horizon: 300,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_end > 0.0 && self.tau_start >= self.tau_end && self.tau_start.is_finite()) {
            return Err(Error::Parameter(format!(
                "anneal: need tau_start >= tau_end > 0, got {} -> {}",
                self.tau_start, self.tau_end
            )));
        }
        if self.horizon == 0 && self.tau_start != self.tau_end {
            return Err(Error::Parameter("anneal: zero horizon with distinct endpoints".into()));
        }
        Ok(())
    }

    /// `tau(e) = tau_start * (tau_end / tau_start)^(e / horizon)`.
    pub fn anneal(&self, epoch: usize) -> Result<Temperature> {
        self.validate()?;
        if epoch > self.horizon {
            return Err(Error::Parameter(format!(
                "anneal: epoch {epoch} beyond horizon {}",
                self.horizon
            )));
        }
        self.at(epoch as f64)
    }

    /// Fractional position, used for per-step annealing; clamps to the
    /// horizon.
    pub fn at(&self, position: f64) -> Result<Temperature> {
        self.validate()?;
        if self.horizon == 0 || position <= 0.0 {
            return Temperature::new(self.tau_start);
        }
        if position >= self.horizon as f64 {
            return Temperature::new(self.tau_end);
        }
        let frac = position / self.horizon as f64;
        Temperature::new(self.tau_start * (self.tau_end / self.tau_start).powf(frac))
    }
}
