use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
}

/// Adam with bias correction. One instance per parameter group; the moment
/// state is keyed by the position of each tensor in the slice passed to
/// [`Adam::step`].
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    steps: u64,
    state: Vec<Moments>,
}

impl Adam {
    pub fn new(lr: f64, betas: (f64, f64), eps: f64) -> Result<Self> {
        let valid = lr > 0.0
            && (0.0..1.0).contains(&betas.0)
            && (0.0..1.0).contains(&betas.1)
            && eps > 0.0;
        if !valid {
            return Err(Error::Parameter(format!(
                "adam: lr={lr}, betas={betas:?}, eps={eps}"
            )));
        }
        Ok(Self {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps,
            steps: 0,
            state: Vec::new(),
        })
    }

    pub fn with_lr(lr: f64) -> Result<Self> {
        Self::new(lr, (0.9, 0.999), 1e-8)
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update to every tensor in `params` and clears their
    /// gradients.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        for (i, p) in params.iter().enumerate() {
            if p.grad().is_none() {
                let name = p.label().map_or_else(|| format!("#{i}"), str::to_string);
                return Err(Error::MissingGrad(name));
            }
        }
        if self.state.is_empty() {
            self.state = params
                .iter()
                .map(|p| Moments {
                    first: vec![0.0; p.numel()],
                    second: vec![0.0; p.numel()],
                })
                .collect();
        }
        if self.state.len() != params.len()
            || self.state.iter().zip(params.iter()).any(|(s, p)| s.first.len() != p.numel())
        {
            return Err(Error::Parameter(
                "adam: parameter set changed between steps".into(),
            ));
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (p, s) in params.iter_mut().zip(self.state.iter_mut()) {
            let grad = p.grad().expect("checked above").to_vec();
            let values = p.values_mut();
            for j in 0..values.len() {
                let g = grad[j];
                s.first[j] = self.beta1 * s.first[j] + (1.0 - self.beta1) * g;
                s.second[j] = self.beta2 * s.second[j] + (1.0 - self.beta2) * g * g;
                let m_hat = s.first[j] / c1;
                let v_hat = s.second[j] / c2;
                values[j] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            p.zero_grad();
        }
        Ok(())
    }
}
