//! Zero-shot recognition of artwork materials from subject descriptions.
//!
//! Images (as precomputed backbone feature vectors) and per-material class
//! descriptions (the most frequent description words of each material,
//! embedded with pretrained word vectors) are mapped into a shared space by
//! two branches: a dense layer with batch normalization for images and an
//! LSTM with batch normalization for text. A sigmoid of their cosine
//! similarity scores an (image, material) pair, so materials never seen in
//! training can still be ranked through their descriptions.
//!
//! Modules:
//! - [`text`]: tokenization, stop words, embedding tables and sequences
//! - [`corpus`]: manifests, class balancing, class descriptions, zero-shot splits
//! - [`nn`]: tensors, the gradient tape and layer parameters
//! - [`optim`]: AdaGrad, RMSProp and Adam
//! - [`model`]: the joint-embedding network and its training loop
//! - [`eval`]: ranking, accuracies, metric smoothing and CSV output
//! - [`synth`]: synthetic corpora for tests, benchmarks and demos

pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod synth;
pub mod text;

pub use corpus::{Artwork, ClassDescription, Dataset, ZslSplit};
pub use error::{Error, Result};
pub use eval::{MetricSeries, Prediction};
pub use model::{Depth, ModelConfig, ModelParams, TrainRun};
pub use nn::Tensor;
pub use optim::{OptimConfig, OptimKind};
pub use text::{EmbeddedSequence, EmbeddingTable, Stoplist, Token};
