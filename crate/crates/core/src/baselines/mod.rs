//! Mutual-information greedy baseline, linear probe and exhaustive oracle.

mod greedy;
mod mi;
mod oracle;
mod probe;

pub use greedy::greedy_constrained_select;
pub use mi::{
    discrete_mi, equal_frequency_bins, mi_from_summaries, mi_rank, summary, MIRanking, DEFAULT_BINS,
};
pub use oracle::{oracle_search, OracleResult};
pub use probe::{lda_accuracy, Evaluator, FnEvaluator, Lda, LinearProbe, DEFAULT_RIDGE};
