//! Frame averaging for Euclidean-symmetric structure-to-property prediction.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: atomic systems, rigid transforms and periodic radius graphs.
//! * [`frames`]: PCA frames, canonical views and frame-averaged prediction.
//! * [`strategy`]: the symmetry-preservation methods (full FA, stochastic FA,
//!   data augmentation, none) behind one trait, looked up by name.
//! * [`diffmath`]: a small reverse-mode tape over dense `f64` arrays and AdamW.
//! * [`faenet`]: the FAENet model built on the tape.
//! * [`audit`]: symmetry metrics and method comparison.
//! * [`expressivity`]: synthetic k-chain / rotational-symmetry benchmarks.
//! * [`xyz`]: extended-XYZ reading and writing.

pub mod audit;
pub mod diffmath;
pub mod elements;
pub mod error;
pub mod expressivity;
pub mod faenet;
pub mod frames;
pub mod geometry;
pub mod parallel;
pub mod strategy;
pub mod xyz;

pub use error::{Error, Result};
pub use frames::{CanonicalView, Frame, FrameGroup, Prediction, StructureModel};
pub use geometry::{AtomicSystem, EuclideanTransform, Group, RadiusGraph};
pub use strategy::{StrategyRegistry, SymmetryStrategy};

/// Seeded generator used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build a [`Rng`] from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    rand::SeedableRng::seed_from_u64(seed)
}
