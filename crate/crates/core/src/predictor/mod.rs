//! Trainable failure predictors: layers, models, datasets, training and
//! evaluation.

pub mod auc;
pub mod checkpoint;
pub mod data;
pub mod layers;
pub mod model;
pub mod train;

pub use auc::{auc_standard_error, roc_auc};
pub use data::{encode_prefix, encode_round, make_osla_dataset, make_prefix_dataset, ExampleSet, OslaInput, OslaOptions, ONE_MORE, STOP_NOW};
pub use model::{Architecture, Predictor, Workspace, PAD};
pub use train::{train, EpochLog, TrainConfig, TrainReport};
