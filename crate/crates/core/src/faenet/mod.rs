//! FAENet on canonical views.
//!
//! The network never sees raw coordinates under frame averaging: each view
//! is a canonicalized copy of the input, its radius graph is rebuilt in that
//! frame, and outputs are mapped back by the strategy.

mod config;
mod gradcheck;
mod model;
mod train;

pub use config::{EnergyHead, FAENetConfig, MpVariant};
pub use model::{rbf, FAENet, GraphInputs, ViewOutput};
pub use train::{batch_gradients, sample_loss, train_step, Objective, Sample};
pub use gradcheck::{gradcheck_model, ModelGradcheck};
