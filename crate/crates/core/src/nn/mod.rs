//! Minimal reverse-mode numeric core: tensors, a gradient tape with the
//! fused layer operations the model needs, layer parameter containers and
//! binary checkpoints.

pub mod checkpoint;
pub mod layers;
pub mod tape;
pub mod tensor;


pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use layers::{BatchNorm, Dense, Lstm, BATCH_NORM_EPS, BATCH_NORM_MOMENTUM, COSINE_EPS};
pub use tape::{
    selu_scalar, BatchStats, Gradients, NormMode, SequenceBatch, Tape, Var, SELU_ALPHA, SELU_LAMBDA,
};
pub use tensor::Tensor;
