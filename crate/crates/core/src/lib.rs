//! Differentiable feature-subset selection with Gumbel-Softmax and its
//! conditional extension for pairwise distance constraints.
//!
//! The crate is organized bottom-up:
//!
//! - [`autodiff`]: a small tape-based reverse-mode engine with Adam.
//! - [`concrete`]: Gumbel noise, Gumbel-Max, concrete (Gumbel-Softmax)
//!   sampling and temperature annealing.
//! - [`topology`]: node geometry, communication graphs, the transposed
//!   Bayesian network and feasibility masks.
//! - [`selection`]: independent and conditional selection layers.
//! - [`baselines`]: mutual-information greedy baseline and exhaustive oracle.
//! - [`train`]: joint training loop, threshold sweeps and the MSFBCNN
//!   parameter calculator.
//! - [`data`]: planted synthetic tasks and CSV ingestion.

pub mod autodiff;
pub mod baselines;
pub mod concrete;
pub mod data;
pub mod error;
pub mod selection;
pub mod topology;
pub mod train;

pub use error::{Error, Result};
