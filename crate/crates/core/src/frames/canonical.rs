use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{AtomicSystem, EuclideanTransform};
use crate::{Error, Result};

/// A system expressed in the coordinates of one frame element, together with
/// the element used so outputs can be mapped back.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalView {
    pub system: AtomicSystem,
    pub transform: EuclideanTransform,
}

/// `ρ₁(g)⁻¹`: positions become `(X − 1tᵀ)U`; cell rows become `CU`.
pub fn canonicalize(system: &AtomicSystem, g: &EuclideanTransform) -> CanonicalView {
    let t = g.translation();
    let ut = g.rotation().transpose();
    let positions = system.positions().iter().map(|p| ut * (p - t)).collect();
    let cell = system.cell().map(|c| c * g.rotation());
    CanonicalView {
        system: system.remapped(positions, cell),
        transform: *g,
    }
}

/// Whether an output is invariant (left alone by `ρ₂`) or equivariant
/// (rows right-multiplied by `Uᵀ`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Invariant,
    Equivariant,
}

/// Model output in canonical coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelOutput {
    Scalar(f64),
    Vectors(Vec<Vector3<f64>>),
}

/// `ρ₂(g)` applied to a canonical-space output.
pub fn uncanonicalize_output(
    output: ModelOutput,
    g: &EuclideanTransform,
    kind: OutputKind,
) -> Result<ModelOutput> {
    match (kind, output) {
        (OutputKind::Invariant, out) => Ok(out),
        (OutputKind::Equivariant, ModelOutput::Vectors(rows)) => Ok(ModelOutput::Vectors(
            rows.iter().map(|v| g.rotation() * v).collect(),
        )),
        (OutputKind::Equivariant, ModelOutput::Scalar(_)) => Err(Error::ShapeMismatch {
            op: "uncanonicalize_output",
            lhs: vec![1],
            rhs: vec![3],
        }),
    }
}

/// Map per-atom vectors back from canonical coordinates (`v ↦ vUᵀ`).
pub fn uncanonicalize_vectors(rows: &[Vector3<f64>], g: &EuclideanTransform) -> Vec<Vector3<f64>> {
    rows.iter().map(|v| g.rotation() * v).collect()
}

/// Largest coordinate difference between two views of the same atom order,
/// including their cells; `None` if they are not comparable.
pub fn view_distance(a: &AtomicSystem, b: &AtomicSystem) -> Option<f64> {
    if a.len() != b.len() || a.atomic_numbers() != b.atomic_numbers() {
        return None;
    }
    let mut d = a
        .positions()
        .iter()
        .zip(b.positions())
        .map(|(p, q)| (p - q).amax())
        .fold(0.0, f64::max);
    match (a.cell(), b.cell()) {
        (Some(c), Some(e)) => d = d.max((c - e).amax()),
        (None, None) => {}
        _ => return None,
    }
    Some(d)
}

/// Whether two collections of views are equal as multisets, matching views
/// greedily within `tol` per coordinate.
pub fn same_view_multiset(a: &[CanonicalView], b: &[CanonicalView], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    'outer: for va in a {
        for (k, vb) in b.iter().enumerate() {
            if !used[k] && view_distance(&va.system, &vb.system).is_some_and(|d| d <= tol) {
                used[k] = true;
                continue 'outer;
            }
        }
        return false;
    }
    true
}
