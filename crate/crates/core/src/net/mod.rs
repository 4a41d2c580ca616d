//! Multi-stream fully-connected classifiers, training and tooling.

pub mod checkpoint;
pub mod dense;
pub mod gradcheck;
pub mod model;
pub mod ops;
pub mod train;

pub use dense::{Activation, Dense};
pub use model::{
    cross_entropy, Architecture, ForwardCache, MultiStreamNet, Params, StreamSpec, TtmSpec,
    Variant,
};
pub use train::{
    evaluate, featurize_sequences, lr_at, prepare_samples, sgd_momentum_step, train, write_metrics_csv, EpochMetrics,
    EvalReport, InputPipeline, Sample, TrainConfig,
};
pub use checkpoint::{
    first_layer_matrix, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint,
    write_matrix_csv, CheckpointMeta,
};
pub use gradcheck::{gradcheck, GroupCheck};
pub use ops::{count_multadds, LayerCount, OpCount};
