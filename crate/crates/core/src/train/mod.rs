//! Joint training of selection layers and classifiers, threshold sweeps and
//! the MSFBCNN parameter calculator.

mod arch;
mod config;
mod mlp;
mod probe;
mod sweep;
mod trainer;

pub use arch::{arch_calc, ArchInputs, ArchReport, ArchSpec, LayerCount, LayerSpec, Monomial, Symbol, POOL_STRIDE};
pub use config::{AnnealUnit, TrainConfig};
pub use mlp::Mlp;
pub use probe::MlpProbe;
pub use sweep::{
    mean_std, sweep_threshold, CellStatus, Method, SummaryRow, SweepConfig, SweepData, SweepReport, SweepRow,
};
pub use trainer::{init_layer, train, EpochRecord, LayerSetup, TrainedModel};
