//! Evaluation protocol: random train/test splits, word error rate, paired
//! t-tests and the model comparison table with its ablations.

mod config;
mod experiment;
mod stats;
mod wer;

pub use config::{CorpusSource, ExperimentConfig};
pub use experiment::{
    make_splits, run_experiment, run_experiment_with, Comparison, ExperimentCorpus, ModelRow, ResultTable, Split,
    ML_DOP, ML_DOP_NONHEAD1, ML_DOP_NOSEM, SIMPLE_DOP, TRIGRAM,
};
pub use stats::{paired_t, t_critical, PairedT, ALPHA};
pub use wer::{align, corpus_wer, wer, EditCounts};
