//! Atomic systems, Euclidean group actions and radius graphs under periodic
//! boundary conditions.

mod graph;
mod system;
mod transform;

pub use graph::{build_radius_graph, pbc_edge_vector, Edge, RadiusGraph};
pub use system::AtomicSystem;
pub use transform::{random_reflection, random_transform, EuclideanTransform, Group};

pub use nalgebra::{Matrix3, Vector3};

/// `ρ₁(g)`: positions `X ↦ XUᵀ + 1tᵀ`, cell rows rotated; see
/// [`AtomicSystem::transformed`].
pub fn apply_transform(system: &AtomicSystem, g: &EuclideanTransform) -> AtomicSystem {
    system.transformed(g)
}
