//! Normalization, optimization, the training loop, hyperparameter search and
//! error metrics.

pub mod bayes;
pub mod data;
pub mod lbfgs;
pub mod metrics;
pub mod train;

pub use bayes::{bayes_opt, BoResult, BoTrial, Dim, SearchSpace};
pub use data::{
    dataset_to_csv, parse_csv, read_csv, write_csv, Channel, ChannelStats, Dataset, NormStats,
    Role, Sample, CSV_HEADER,
};
pub use lbfgs::{lbfgs_minimize, LbfgsConfig, LbfgsReport, Termination};
pub use metrics::{metrics, normalized_metrics, Metrics};
pub use train::{predict, train, train_with_stats, TrainConfig, TrainReport};
