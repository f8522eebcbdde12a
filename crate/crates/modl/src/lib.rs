//! Many-to-one distribution learning (MODL) with K-nearest-neighbor
//! smoothing (KNNS) for multi-label classification under noisy labels.
//!
//! A fixed set of reference models is pre-trained on the classification loss
//! alone, their probability predictions are averaged into a per-sample soft
//! label distribution, and a single target model then trains against three
//! terms at once: the masked classification loss, a per-class Bernoulli KL
//! toward the soft labels, and a smoothing loss that ties each sample's
//! predictions to its K nearest neighbors in soft-label space. Only the
//! target is kept at inference time.
//!
//! Entry points:
//! - [`data`]: synthetic noisy datasets, CSV label files, splits
//! - [`labels`]: uncertainty policies and soft-label aggregation
//! - [`neighbors`]: the fixed K-nearest-neighbor pool
//! - [`train`]: the two-stage training procedure
//! - [`eval`]: per-class ROC/AUC, ensembles, ablation tables
//! - [`config`] and [`runner`]: the config-driven experiment harness
//!
//! The `examples/` directory walks through each capability; the `modl`
//! binary wraps the harness behind `validate`, `run`, `report`, and
//! `sweep-k` subcommands.

pub mod adam;
pub mod bytes;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod graph;
pub mod labels;
pub mod losses;
pub mod neighbors;
pub mod net;
pub mod runner;
pub mod tensor;
pub mod train;
pub mod zoo;

pub use error::{Error, Result};
pub use tensor::Tensor;
