//! Reverse-mode differentiation over dense `f64` arrays, plus AdamW and a
//! finite-difference gradient checker.

mod gradcheck;
mod optim;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{
    check_gradients, relative_error, GradcheckOptions, GradcheckReport, TensorCheck, FD_STEP,
    REL_FLOOR, TOLERANCE,
};
pub use optim::AdamW;
pub use params::{glorot_uniform, Checkpoint, CheckpointEntry, ParamStore, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use tape::{BackwardFault, Gradients, OpKind, Tape, Var};
pub use tensor::Tensor;

